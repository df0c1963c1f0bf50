"""Command-line entry point: export predictions per a manifest file.

The manifest JSON names the source model, the frame list, the output
directory, and a ``predictions`` key pointing at an .npz archive with the
prediction arrays (see PredictionSet for the schema).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import AdapterError, ManifestError
from .export import AdapterManifest, PredictionSet, export


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="epialign-export",
        description="Export model predictions into epialign interchange files")
    ap.add_argument("--manifest", required=True)
    args = ap.parse_args(argv)

    try:
        manifest = AdapterManifest.load(args.manifest)
        try:
            doc = json.loads(Path(args.manifest).read_text())
            preds_path = doc["predictions"]
        except (KeyError, TypeError):
            raise ManifestError(
                f"{args.manifest}: missing 'predictions' (.npz path)") from None
        preds_file = Path(args.manifest).parent / preds_path
        preds = PredictionSet.load_npz(preds_file)
        result = export(manifest, preds)
    except AdapterError as exc:
        print(f"export failed: {exc}", file=sys.stderr)
        return 1
    report = {
        "cameras": str(result.cameras_path),
        "matches": str(result.matches_path),
        "depth_maps": len(result.depth_paths),
        "pairs": result.pair_count,
        "correspondences": result.correspondence_count,
    }
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
