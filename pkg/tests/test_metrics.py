import numpy as np
import pytest

from epialign.errors import EmptyCloud, EmptySequence, FrameMismatch
from epialign.geometry import CameraFrame, CameraPose, CameraRig
from epialign.metrics import (
    ate_rmse,
    auc_at_30,
    chamfer,
    evaluate_poses,
    fit_similarity,
    pairwise_errors,
)
from epialign.pointcloud import ScenePointCloud
from epialign.synth import SynthConfig, generate, perturb

from helpers import make_frame, random_pose, random_rotation


def _rig(rng, n):
    return CameraRig(tuple(make_frame(f"f{i}", random_pose(rng)) for i in range(n)))


def _left_transformed(rig, H_R, H_t):
    frames = []
    for f in rig.frames:
        R = H_R @ f.pose.R
        t = H_R @ f.pose.t + H_t
        frames.append(CameraFrame(f.frame_id, f.intrinsics, CameraPose(R, t)))
    return CameraRig(tuple(frames))


# ---------------------------------------------------------------------------
# pairwise errors
# ---------------------------------------------------------------------------

def test_identical_rigs_have_zero_errors():
    rng = np.random.default_rng(0)
    rig = _rig(rng, 5)
    for flag in (False, True):
        m = pairwise_errors(rig, rig, order_invariant=flag)
        # arccos near 1 has a ~1e-6 deg noise floor
        assert np.allclose(m.rre_deg, 0.0, atol=1e-5)
        assert np.allclose(m.rte_deg, 0.0, atol=1e-5)
        expected_pairs = 10 * (2 if flag else 1)
        assert m.pair_count == expected_pairs


def test_global_left_transform_is_invisible():
    rng = np.random.default_rng(1)
    rig = _rig(rng, 5)
    moved = _left_transformed(rig, random_rotation(rng), rng.normal(size=3))
    m = pairwise_errors(moved, rig, order_invariant=True)
    assert np.allclose(m.rre_deg, 0.0, atol=1e-5)
    assert np.allclose(m.rte_deg, 0.0, atol=1e-5)


def test_rre_is_symmetric_in_pair_direction():
    rng = np.random.default_rng(2)
    pred = _rig(rng, 4)
    gt = _rig(rng, 4)
    m = pairwise_errors(pred, gt, order_invariant=True)
    # directions alternate (i,j), (j,i) in the doubled sequence
    rre = m.rre_deg.reshape(-1, 2)
    assert np.allclose(rre[:, 0], rre[:, 1], atol=1e-12)


def test_reversed_frame_order_changes_rte_without_flag():
    rng = np.random.default_rng(3)
    pred = _rig(rng, 3)
    gt = _rig(rng, 3)
    rev = list(range(2, -1, -1))
    pred_r = CameraRig(tuple(pred[i] for i in rev))
    gt_r = CameraRig(tuple(gt[i] for i in rev))
    plain = pairwise_errors(pred, gt, order_invariant=False)
    plain_rev = pairwise_errors(pred_r, gt_r, order_invariant=False)
    inv = pairwise_errors(pred, gt, order_invariant=True)
    inv_rev = pairwise_errors(pred_r, gt_r, order_invariant=True)
    assert abs(plain.rte_mean - plain_rev.rte_mean) > 1e-6
    assert np.isclose(inv.rte_mean, inv_rev.rte_mean, atol=1e-12)


def test_frames_matched_by_id_not_order():
    rng = np.random.default_rng(4)
    rig = _rig(rng, 4)
    perm = [2, 0, 3, 1]
    shuffled = CameraRig(tuple(rig[i] for i in perm))
    m = pairwise_errors(shuffled, rig, order_invariant=True)
    assert np.allclose(m.rre_deg, 0.0, atol=1e-5)
    assert np.allclose(m.rte_deg, 0.0, atol=1e-5)


def test_frame_mismatch_raises():
    rng = np.random.default_rng(5)
    a = _rig(rng, 3)
    b = CameraRig(tuple(
        CameraFrame(f"other{i}", f.intrinsics, f.pose) for i, f in enumerate(a.frames)))
    with pytest.raises(FrameMismatch):
        pairwise_errors(a, b)
    with pytest.raises(FrameMismatch):
        pairwise_errors(a, CameraRig(a.frames[:2]))


def test_zero_baseline_pairs_flagged():
    rng = np.random.default_rng(6)
    pose = random_pose(rng)
    # two frames with identical translations: Eq.5 translation block is zero
    rig = CameraRig((make_frame("a", pose),
                     make_frame("b", CameraPose(random_rotation(rng), pose.t))))
    m = pairwise_errors(rig, rig)
    assert m.zero_baseline_flags.all()
    assert np.all(m.rte_deg == 0.0)


# ---------------------------------------------------------------------------
# AUC@30
# ---------------------------------------------------------------------------

def test_auc_all_zero_errors():
    assert auc_at_30(np.zeros(10), np.zeros(10)) == 1.0


def test_auc_all_large_errors():
    assert auc_at_30(np.full(7, 30.0), np.full(7, 45.0)) == 0.0


def test_auc_single_step_integral():
    assert auc_at_30(np.array([15.0]), np.array([0.0])) == 0.5


def test_auc_uses_max_combinator():
    assert auc_at_30(np.array([0.0]), np.array([15.0])) == 0.5
    assert auc_at_30(np.array([15.0]), np.array([15.0])) == 0.5


def test_auc_monotone_under_added_bad_pairs():
    rng = np.random.default_rng(7)
    rre = rng.uniform(0, 10, 20)
    rte = rng.uniform(0, 10, 20)
    base = auc_at_30(rre, rte)
    worse = auc_at_30(np.append(rre, 30.0), np.append(rte, 30.0))
    assert worse < base


def test_auc_validates_input():
    with pytest.raises(EmptySequence):
        auc_at_30(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        auc_at_30(np.zeros(3), np.zeros(4))


def test_order_invariant_auc_stable_under_permutations():
    cfg = SynthConfig(n_cameras=10, n_points=200, seed=8,
                      rot_sigma_deg=2.0, trans_sigma_frac=0.01)
    scene = generate(cfg)
    noisy, _, _ = perturb(scene.rig, scene.matches, cfg)
    ref = evaluate_poses(noisy, scene.rig, order_invariant=True).auc_at_30
    rng = np.random.default_rng(9)
    spread_plain = set()
    for _ in range(20):
        perm = rng.permutation(10)
        pred_p = CameraRig(tuple(noisy[i] for i in perm))
        gt_p = CameraRig(tuple(scene.rig[i] for i in perm))
        inv = evaluate_poses(pred_p, gt_p, order_invariant=True).auc_at_30
        assert abs(inv - ref) < 1e-12
        spread_plain.add(round(
            evaluate_poses(pred_p, gt_p, order_invariant=False).auc_at_30, 15))
    assert len(spread_plain) > 1   # the conventional metric is order-sensitive


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------

def test_ate_zero_for_identical_rigs():
    rng = np.random.default_rng(10)
    rig = _rig(rng, 6)
    assert ate_rmse(rig, rig).ate_rmse < 1e-12


def test_ate_absorbs_similarity_transform():
    rng = np.random.default_rng(11)
    rig = _rig(rng, 8)
    s = 3.0
    Rg = random_rotation(rng)
    tg = rng.normal(size=3)
    frames = []
    for f in rig.frames:
        c_new = s * Rg @ f.pose.center + tg
        R_new = f.pose.R @ Rg.T
        frames.append(CameraFrame(f.frame_id, f.intrinsics,
                                  CameraPose(R_new, -R_new @ c_new)))
    moved = CameraRig(tuple(frames))
    tm = ate_rmse(moved, rig)
    assert tm.ate_rmse < 1e-9
    assert np.isclose(tm.similarity.scale, 1.0 / s, rtol=1e-9)


def test_ate_single_displacement_bound_and_refit_oracle():
    from scipy.optimize import minimize

    rng = np.random.default_rng(12)
    rig = _rig(rng, 10)
    d = 0.5
    frames = list(rig.frames)
    f = frames[3]
    c_new = f.pose.center + np.array([d, 0.0, 0.0])
    frames[3] = CameraFrame(f.frame_id, f.intrinsics,
                            CameraPose(f.pose.R, -f.pose.R @ c_new))
    moved = CameraRig(tuple(frames))
    tm = ate_rmse(moved, rig)
    assert tm.ate_rmse <= d / np.sqrt(10) + 1e-12

    # oracle: generic numerical refit over (rotvec, log-scale, translation)
    src = moved.centers()
    dst = rig.centers()

    def cost(x):
        w = x[:3]
        angle = np.linalg.norm(w)
        if angle < 1e-12:
            R = np.eye(3)
        else:
            k = w / angle
            K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
            R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)
        s = np.exp(x[3])
        t = x[4:]
        r = s * (src @ R.T) + t - dst
        return (r ** 2).sum()

    best = min(
        minimize(cost, np.concatenate([rng.normal(0, 0.1, 3), [0.0],
                                       rng.normal(0, 0.1, 3)]),
                 method="Nelder-Mead",
                 options={"maxiter": 20000, "xatol": 1e-12, "fatol": 1e-15}).fun
        for _ in range(3))
    oracle_rmse = np.sqrt(best / 10)
    assert tm.ate_rmse <= oracle_rmse + 1e-6


def test_fit_similarity_flags_degenerate():
    line = np.stack([np.linspace(0, 1, 5), np.zeros(5), np.zeros(5)], axis=1)
    sim = fit_similarity(line, line)
    assert sim.degenerate
    coincident = np.zeros((4, 3))
    sim2 = fit_similarity(coincident, coincident)
    assert sim2.degenerate


# ---------------------------------------------------------------------------
# chamfer
# ---------------------------------------------------------------------------

def test_chamfer_identical_clouds():
    rng = np.random.default_rng(13)
    pts = rng.normal(size=(100, 3))
    cm = chamfer(ScenePointCloud(pts), ScenePointCloud(pts.copy()))
    assert cm.accuracy == 0.0 and cm.completeness == 0.0 and cm.overall == 0.0


def test_chamfer_one_extra_far_point():
    rng = np.random.default_rng(14)
    gt = rng.normal(size=(50, 3))
    # anchoring at the max-x point makes the nearest-neighbour distance
    # exactly 100 (any other point is farther in x alone)
    base = gt[np.argmax(gt[:, 0])]
    far = base + np.array([100.0, 0.0, 0.0])
    pred = np.vstack([gt, far])
    cm = chamfer(ScenePointCloud(pred), ScenePointCloud(gt))
    assert cm.completeness == 0.0
    assert np.isclose(cm.accuracy, 100.0 / 51, rtol=1e-12)
    assert np.isclose(cm.overall, (cm.accuracy + cm.completeness) / 2, atol=0)


def test_chamfer_matches_bruteforce_oracle():
    rng = np.random.default_rng(15)
    a = rng.normal(size=(1000, 3))
    b = rng.normal(size=(1000, 3))
    cm = chamfer(ScenePointCloud(a), ScenePointCloud(b))
    acc = np.mean([np.sqrt(((b - p) ** 2).sum(axis=1)).min() for p in a])
    comp = np.mean([np.sqrt(((a - q) ** 2).sum(axis=1)).min() for q in b])
    assert abs(cm.accuracy - acc) < 1e-12
    assert abs(cm.completeness - comp) < 1e-12


def test_chamfer_accuracy_completeness_duality():
    rng = np.random.default_rng(16)
    a = ScenePointCloud(rng.normal(size=(200, 3)))
    b = ScenePointCloud(rng.normal(size=(300, 3)))
    assert chamfer(a, b).accuracy == chamfer(b, a).completeness


def test_chamfer_prealign():
    rng = np.random.default_rng(17)
    pts = rng.normal(size=(200, 3))
    Rg = random_rotation(rng)
    moved = 2.0 * pts @ Rg.T + np.array([1.0, 2.0, 3.0])
    sim = fit_similarity(moved, pts)
    cm = chamfer(ScenePointCloud(moved), ScenePointCloud(pts), prealign=sim)
    assert cm.overall < 1e-9


def test_chamfer_rejects_empty():
    rng = np.random.default_rng(18)
    good = ScenePointCloud(rng.normal(size=(10, 3)))
    with pytest.raises(EmptyCloud):
        chamfer(good, ScenePointCloud(np.zeros((0, 3))))
