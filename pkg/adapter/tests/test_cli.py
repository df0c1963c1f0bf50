import json

from epialign_adapter import make_fixture
from epialign_adapter.cli import main


def _write_manifest(tmp_path, manifest, preds_name="preds.npz"):
    doc = {
        "source": manifest.source,
        "output_dir": manifest.output_dir,
        "predictions": preds_name,
        "frames": [
            {"id": f.frame_id, "image": f.image_path,
             "width": f.width, "height": f.height}
            for f in manifest.frames
        ],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def test_cli_exports_file_set(tmp_path, capsys):
    manifest, preds = make_fixture(n_frames=5, out_dir=tmp_path / "out")
    preds.save_npz(tmp_path / "preds.npz")
    code = main(["--manifest", str(_write_manifest(tmp_path, manifest))])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pairs"] == 5
    assert (tmp_path / "out" / "cameras.json").exists()
    assert (tmp_path / "out" / "matches.bin").exists()
    assert len(list((tmp_path / "out" / "depth").glob("*.pfm"))) == 5


def test_cli_reports_failures(tmp_path, capsys):
    manifest, preds = make_fixture(n_frames=4, out_dir=tmp_path / "out")
    bad = preds.rotations.copy()
    bad[1] *= 2.0
    preds.rotations = bad
    preds.save_npz(tmp_path / "preds.npz")
    code = main(["--manifest", str(_write_manifest(tmp_path, manifest))])
    assert code == 1
    assert "export failed" in capsys.readouterr().err


def test_cli_requires_predictions_key(tmp_path, capsys):
    manifest, preds = make_fixture(n_frames=3, out_dir=tmp_path / "out")
    path = _write_manifest(tmp_path, manifest)
    doc = json.loads(path.read_text())
    del doc["predictions"]
    path.write_text(json.dumps(doc))
    code = main(["--manifest", str(path)])
    assert code == 1
