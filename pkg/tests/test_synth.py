import numpy as np
import pytest

from epialign.aligner import epipolar_residuals
from epialign.geometry import project
from epialign.metrics import pairwise_errors
from epialign.pairing import select_pairs
from epialign.synth import SynthConfig, calibrate_noise, generate, perturb


def test_exact_matches_satisfy_epipolar_constraint():
    scene = generate(SynthConfig(n_cameras=2, n_points=100, seed=0))
    e, stats = epipolar_residuals(scene.rig, scene.matches)
    assert stats.degenerate_correspondences == 0
    assert np.nanmax(e) < 1e-9


def test_generation_is_deterministic():
    cfg = SynthConfig(n_cameras=5, n_points=80, seed=1)
    a = generate(cfg)
    b = generate(cfg)
    for fa, fb in zip(a.rig.frames, b.rig.frames):
        assert np.array_equal(fa.pose.R, fb.pose.R)
        assert np.array_equal(fa.pose.t, fb.pose.t)
    assert np.array_equal(a.cloud.points, b.cloud.points)
    for pa, pb in zip(a.matches.pairs, b.matches.pairs):
        assert np.array_equal(pa.xy_i, pb.xy_i)
        assert np.array_equal(pa.xy_j, pb.xy_j)
    for k in a.depths:
        assert np.array_equal(a.depths[k].values, b.depths[k].values)


def test_orbit_pairs_match_exhaustive_oracle():
    scene = generate(SynthConfig(n_cameras=30, n_points=100, seed=2))
    sel = select_pairs(scene.rig, 30.0)
    z = scene.rig.forward_axes()
    expected = {(i, j)
                for i in range(30) for j in range(i + 1, 30)
                if np.degrees(np.arccos(np.clip(z[i] @ z[j], -1, 1))) <= 30.0}
    assert sel.as_set() == expected
    assert len(expected) > 0


def test_depth_at_keypoints_matches_camera_depth():
    scene = generate(SynthConfig(n_cameras=3, n_points=150, seed=3))
    checked = 0
    for pm, idx in zip(scene.matches.pairs, scene.point_indices):
        dm = scene.depths[pm.frame_i]
        cam = scene.rig[pm.frame_i]
        for k, p in enumerate(idx):
            uv, z = project(scene.cloud.points[p], cam)
            px = int(round(uv[0]))
            py = int(round(uv[1]))
            assert abs(dm.values[py, px] - z) < 1e-6
            checked += 1
    assert checked > 100


def test_matches_only_reference_covisible_unoccluded_points():
    scene = generate(SynthConfig(n_cameras=4, n_points=400, seed=4))
    for pm, idx in zip(scene.matches.pairs, scene.point_indices):
        assert len(pm) == len(idx)
        assert len(set(idx)) == len(idx)


def test_zero_noise_perturb_is_identity():
    cfg = SynthConfig(n_cameras=4, n_points=60, seed=5)
    scene = generate(cfg)
    rig, matches, stats = perturb(scene.rig, scene.matches, cfg)
    for fa, fb in zip(rig.frames, scene.rig.frames):
        assert np.array_equal(fa.pose.R, fb.pose.R)
        assert np.array_equal(fa.pose.t, fb.pose.t)
    for pa, pb in zip(matches.pairs, scene.matches.pairs):
        assert np.array_equal(pa.xy_i, pb.xy_i)
    assert stats.mean_rre_deg < 1e-5   # arccos noise floor on identical rigs
    assert sum(stats.outlier_counts) == 0


def test_perturb_reports_realized_errors():
    cfg = SynthConfig(n_cameras=10, n_points=100, seed=6,
                      rot_sigma_deg=1.5, trans_sigma_frac=0.01)
    scene = generate(cfg)
    rig, _, stats = perturb(scene.rig, scene.matches, cfg)
    m = pairwise_errors(rig, scene.rig, order_invariant=True)
    assert np.isclose(stats.mean_rre_deg, m.rre_mean, rtol=1e-12)
    assert np.isclose(stats.mean_rte_deg, m.rte_mean, rtol=1e-12)
    assert stats.mean_rre_deg > 0.5


def test_perturb_freeze_keeps_frames_exact():
    cfg = SynthConfig(n_cameras=6, n_points=80, seed=7,
                      rot_sigma_deg=2.0, trans_sigma_frac=0.02)
    scene = generate(cfg)
    rig, _, _ = perturb(scene.rig, scene.matches, cfg, freeze=(0,))
    assert rig[0] is scene.rig[0]
    assert not np.array_equal(rig[1].pose.R, scene.rig[1].pose.R)


def test_outlier_fraction_is_respected():
    cfg = SynthConfig(n_cameras=2, n_points=900, seed=8, outlier_frac=0.1)
    scene = generate(cfg)
    n = scene.matches.total_correspondences()
    _, noisy, stats = perturb(scene.rig, scene.matches, cfg)
    replaced = sum(stats.outlier_counts)
    # binomial bound: 5 sigma around n * 0.1
    sigma = np.sqrt(n * 0.1 * 0.9)
    assert abs(replaced - 0.1 * n) < 5 * sigma
    # outliers actually break the epipolar constraint
    e, _ = epipolar_residuals(scene.rig, noisy)
    assert (e > 1.0).sum() >= replaced * 0.9


def test_pixel_noise_stays_in_bounds():
    cfg = SynthConfig(n_cameras=2, n_points=300, seed=9, pixel_sigma_px=5.0)
    scene = generate(cfg)
    _, noisy, _ = perturb(scene.rig, scene.matches, cfg)
    for pm in noisy.pairs:
        assert pm.xy_i[:, 0].min() >= 0 and pm.xy_i[:, 0].max() <= 639
        assert pm.xy_i[:, 1].min() >= 0 and pm.xy_i[:, 1].max() <= 479


def test_same_seed_same_perturbation():
    cfg = SynthConfig(n_cameras=5, n_points=100, seed=10,
                      rot_sigma_deg=1.0, outlier_frac=0.05)
    scene = generate(cfg)
    r1, m1, _ = perturb(scene.rig, scene.matches, cfg)
    r2, m2, _ = perturb(scene.rig, scene.matches, cfg)
    for fa, fb in zip(r1.frames, r2.frames):
        assert np.array_equal(fa.pose.R, fb.pose.R)
    for pa, pb in zip(m1.pairs, m2.pairs):
        assert np.array_equal(pa.xy_i, pb.xy_i)


def test_calibration_reaches_bands():
    cfg = SynthConfig(n_cameras=20, n_points=200, seed=11, focal_px=1500.0,
                      width=2000, height=1500, rot_sigma_deg=1.0,
                      trans_sigma_frac=0.001)
    scene = generate(cfg)
    tuned, stats = calibrate_noise(scene, cfg, (1.0, 1.2), (1.6, 1.9),
                                   freeze=(0,))
    assert 1.0 <= stats.mean_rre_deg <= 1.2
    assert 1.6 <= stats.mean_rte_deg <= 1.9


def test_shell_layout_generates_valid_scene():
    scene = generate(SynthConfig(layout="shell", n_cameras=8, n_points=150,
                                 seed=12))
    assert len(scene.matches) > 0
    e, _ = epipolar_residuals(scene.rig, scene.matches)
    assert np.nanmax(e) < 1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_cameras=0)
    with pytest.raises(ValueError):
        SynthConfig(outlier_frac=1.0)
    with pytest.raises(ValueError):
        SynthConfig(layout="spiral")
    with pytest.raises(ValueError):
        SynthConfig(rot_sigma_deg=-1.0)
