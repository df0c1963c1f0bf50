import csv
import json

import pytest

from epialign import formats
from epialign.cli import main
from epialign.synth import SynthConfig, generate

SYNTH_CFG = {
    "layout": "orbit",
    "n_cameras": 12,
    "n_points": 200,
    "width": 1600,
    "height": 1200,
    "focal_px": 1200.0,
    "rot_sigma_deg": 0.6,
    "trans_sigma_frac": 0.002,
    "seed": 21,
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One synth run shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "synth.json"
    cfg_path.write_text(json.dumps(SYNTH_CFG))
    out = root / "scene"
    report = root / "synth_report.json"
    code = main(["synth", "--config", str(cfg_path), "--out", str(out),
                 "--report", str(report)])
    assert code == 0
    return root


def _read_json(path):
    return json.loads(path.read_text())


def test_synth_writes_interchange_set(workdir):
    out = workdir / "scene"
    assert (out / "cameras.json").exists()
    assert (out / "matches.bin").exists()
    assert (out / "gt" / "cameras.json").exists()
    assert (out / "gt" / "points.ply").exists()
    rig = formats.load_rig(out / "cameras.json")
    assert len(list((out / "depth").glob("*.pfm"))) == len(rig)
    rep = _read_json(workdir / "synth_report.json")
    assert rep["cameras"] == SYNTH_CFG["n_cameras"]
    assert rep["realized_mean_rre_deg"] > 0.1


def test_align_refines_and_reports(workdir):
    out = workdir / "scene"
    aligned = workdir / "aligned"
    report = workdir / "align_report.json"
    code = main(["align", "--cameras", str(out / "cameras.json"),
                 "--matches", str(out / "matches.bin"),
                 "--out", str(aligned), "--report", str(report)])
    assert code == 0
    rep = _read_json(report)
    assert rep["iterations"] == 300
    assert len(rep["loss_trace"]) == 300
    assert rep["final_median_px"] < rep["initial_median_px"]
    assert (aligned / "cameras.json").exists()


def test_eval_pose_report_and_trajectory(workdir):
    out = workdir / "scene"
    traj = workdir / "traj.csv"
    report = workdir / "eval_report.json"
    code = main(["eval-pose", "--pred", str(out / "cameras.json"),
                 "--gt", str(out / "gt" / "cameras.json"),
                 "--order-invariant", "--trajectory-csv", str(traj),
                 "--report", str(report)])
    assert code == 0
    rep = _read_json(report)
    assert 0.0 <= rep["auc_at_30"] <= 1.0
    assert rep["rre_mean_deg"] > 0.0
    with open(traj) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == SYNTH_CFG["n_cameras"]
    assert {"frame_id", "pred_x", "gt_z"} <= set(rows[0])


def test_weights_then_select_points(workdir, tmp_path):
    out = workdir / "scene"
    wcsv = tmp_path / "weights.csv"
    report = tmp_path / "weights_report.json"
    code = main(["weights", "--cameras", str(out / "cameras.json"),
                 "--matches", str(out / "matches.bin"),
                 "--out", str(wcsv), "--report", str(report)])
    assert code == 0
    rep = _read_json(report)
    assert rep["correspondences"] > 0
    assert (tmp_path / "weights.hist.csv").exists()
    with open(wcsv) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == rep["correspondences"]
    hist_rows = list(csv.DictReader(open(tmp_path / "weights.hist.csv")))
    assert len(hist_rows) == 100

    ply = tmp_path / "points.ply"
    report2 = tmp_path / "select_report.json"
    code = main(["select-points", "--cameras", str(out / "cameras.json"),
                 "--matches", str(out / "matches.bin"),
                 "--weights", str(wcsv), "--depth-dir", str(out / "depth"),
                 "--threshold", "0.3", "--out", str(ply),
                 "--report", str(report2)])
    assert code == 0
    cloud = formats.load_ply(ply)
    rep2 = _read_json(report2)
    assert len(cloud) == rep2["points"] > 0


def test_eval_points_with_prealign(workdir, tmp_path):
    out = workdir / "scene"
    gt_ply = out / "gt" / "points.ply"
    code = main(["eval-points", "--pred", str(gt_ply), "--gt", str(gt_ply),
                 "--report", str(tmp_path / "r.json")])
    assert code == 0
    rep = _read_json(tmp_path / "r.json")
    assert rep["overall"] == 0.0

    code = main(["eval-points", "--pred", str(gt_ply), "--gt", str(gt_ply),
                 "--prealign",
                 "--pred-cameras", str(out / "gt" / "cameras.json"),
                 "--gt-cameras", str(out / "gt" / "cameras.json"),
                 "--report", str(tmp_path / "r2.json")])
    assert code == 0
    rep2 = _read_json(tmp_path / "r2.json")
    assert rep2["prealigned"] and rep2["overall"] < 1e-9


def test_prealign_without_cameras_is_usage_error(workdir, tmp_path):
    gt_ply = workdir / "scene" / "gt" / "points.ply"
    code = main(["eval-points", "--pred", str(gt_ply), "--gt", str(gt_ply),
                 "--prealign"])
    assert code == 2


def test_missing_file_is_data_error(tmp_path):
    code = main(["eval-pose", "--pred", str(tmp_path / "nope.json"),
                 "--gt", str(tmp_path / "nope.json")])
    assert code == 3


def test_corrupt_matches_is_data_error(workdir, tmp_path):
    out = workdir / "scene"
    bad = tmp_path / "bad.bin"
    bad.write_bytes((out / "matches.bin").read_bytes()[:-3])
    code = main(["align", "--cameras", str(out / "cameras.json"),
                 "--matches", str(bad), "--out", str(tmp_path / "x")])
    assert code == 3


def test_numerical_failure_exit_code(tmp_path):
    # a two-camera scene whose pair angle excludes everything -> no pairs
    scene = generate(SynthConfig(n_cameras=2, n_points=50, seed=3))
    cams = tmp_path / "cameras.json"
    matches = tmp_path / "matches.bin"
    formats.save_rig(scene.rig, cams)
    formats.save_matches(scene.matches, matches)
    code = main(["align", "--cameras", str(cams), "--matches", str(matches),
                 "--out", str(tmp_path / "o"), "--pair-angle-deg", "0.0001"])
    assert code == 3


def test_synth_rejects_unknown_config_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_cameras": 3, "bogus": 1}))
    code = main(["synth", "--config", str(cfg), "--out", str(tmp_path / "s")])
    assert code == 3


def test_cli_seed_overrides_config(tmp_path):
    base = dict(SYNTH_CFG)
    base["n_cameras"] = 6
    base["n_points"] = 80
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(base))
    for seed, name in ((5, "a"), (5, "b"), (6, "c")):
        assert main(["synth", "--config", str(cfg), "--out",
                     str(tmp_path / name), "--seed", str(seed),
                     "--report", str(tmp_path / f"{name}.json")]) == 0
    a = (tmp_path / "a" / "matches.bin").read_bytes()
    b = (tmp_path / "b" / "matches.bin").read_bytes()
    c = (tmp_path / "c" / "matches.bin").read_bytes()
    assert a == b
    assert a != c
