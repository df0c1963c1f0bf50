"""Command-line interface.

Subcommands: synth, align, eval-pose, eval-points, select-points, weights.
Every subcommand prints a JSON report to stdout (or ``--report FILE``).
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import formats, metrics, pointcloud, synth
from .aligner import AlignerConfig, align, epipolar_residuals
from .errors import DataError, NumericalError, ParseError
from .pairing import MatchSet, cap_correspondences, select_pairs
from .weighting import adaptive_weights, build_histogram, WeightTable

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _emit_report(doc: dict, report_path: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if report_path:
        Path(report_path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_bound_matches(cameras_path: str, matches_path: str):
    rig = formats.load_rig(cameras_path)
    matches = formats.load_matches(matches_path)
    return rig, formats.bind_matches(rig, matches, name=str(matches_path))


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> dict:
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{args.config}: {exc}") from None
    known = set(synth.SynthConfig.__dataclass_fields__)
    bad = set(raw) - known
    if bad:
        raise ParseError(f"{args.config}: unknown config keys {sorted(bad)}")
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = synth.SynthConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{args.config}: {exc}") from None

    scene = synth.generate(cfg)
    noisy_rig, noisy_matches, stats = synth.perturb(scene.rig, scene.matches, cfg)

    out = Path(args.out)
    formats.save_rig(noisy_rig, out / "cameras.json")
    formats.save_matches(noisy_matches, out / "matches.bin")
    depth_dir = out / "depth"
    for idx, dm in scene.depths.items():
        formats.save_pfm(dm, depth_dir / f"{scene.rig[idx].frame_id}.pfm")
    gt_dir = out / "gt"
    formats.save_rig(scene.rig, gt_dir / "cameras.json")
    formats.save_ply(scene.cloud, gt_dir / "points.ply")

    return {
        "command": "synth",
        "out": str(out),
        "cameras": len(scene.rig),
        "points": len(scene.cloud),
        "pairs": len(scene.matches),
        "correspondences": scene.matches.total_correspondences(),
        "realized_mean_rre_deg": stats.mean_rre_deg,
        "realized_mean_rte_deg": stats.mean_rte_deg,
        "outliers": int(sum(stats.outlier_counts)),
    }


# ---------------------------------------------------------------------------
# align
# ---------------------------------------------------------------------------

def _filter_by_angle(rig, matches: MatchSet, angle_deg: float):
    selection = select_pairs(rig, angle_deg).as_set()
    kept = tuple(pm for pm in matches.pairs
                 if (min(pm.frame_i, pm.frame_j), max(pm.frame_i, pm.frame_j))
                 in selection)
    return MatchSet(kept), len(matches.pairs) - len(kept)


def _cmd_align(args) -> dict:
    rig, matches = _load_bound_matches(args.cameras, args.matches)
    matches, dropped_by_angle = _filter_by_angle(rig, matches, args.pair_angle_deg)
    matches = cap_correspondences(matches, args.max_matches, seed=args.seed or 0)
    cfg = AlignerConfig(
        iterations=args.iterations,
        lr0=args.lr0, lr1=args.lr1, lr2=args.lr2,
        b1=args.b1, b2=args.b2,
        optimize_focal=args.optimize_focal,
        residual_mode=args.residual_mode,
        alpha=args.alpha,
    )
    refined, report = align(rig, matches, cfg)
    out = Path(args.out)
    formats.save_rig(refined, out / "cameras.json")
    doc = {"command": "align", "out": str(out),
           "pairs_dropped_by_angle": dropped_by_angle}
    doc.update(report.to_dict())
    return doc


# ---------------------------------------------------------------------------
# eval-pose
# ---------------------------------------------------------------------------

def _cmd_eval_pose(args) -> dict:
    pred = formats.load_rig(args.pred)
    gt = formats.load_rig(args.gt)
    pm = metrics.evaluate_poses(pred, gt, order_invariant=args.order_invariant)
    tm = metrics.ate_rmse(pred, gt)
    if args.trajectory_csv:
        aligned = tm.similarity.apply(pred.centers())
        gt_centers = np.stack(
            [gt[k].pose.center for k in metrics._match_frames(pred, gt)])
        with open(args.trajectory_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame_id", "pred_x", "pred_y", "pred_z",
                        "gt_x", "gt_y", "gt_z"])
            for f, a, g in zip(pred.frames, aligned, gt_centers):
                w.writerow([f.frame_id, *(repr(float(x)) for x in a),
                            *(repr(float(x)) for x in g)])
    return {
        "command": "eval-pose",
        "order_invariant": bool(args.order_invariant),
        "pair_count": pm.pair_count,
        "rre_mean_deg": pm.rre_mean,
        "rte_mean_deg": pm.rte_mean,
        "auc_at_30": pm.auc_at_30,
        "ate_rmse": tm.ate_rmse,
        "ate_scale": tm.similarity.scale,
        "ate_degenerate": tm.similarity.degenerate,
        "zero_baseline_pairs": int(pm.zero_baseline_flags.sum()),
    }


# ---------------------------------------------------------------------------
# eval-points
# ---------------------------------------------------------------------------

def _cmd_eval_points(args) -> dict:
    pred = formats.load_ply(args.pred)
    gt = formats.load_ply(args.gt)
    sim = None
    if args.prealign:
        if not (args.pred_cameras and args.gt_cameras):
            raise UsageError(
                "--prealign needs --pred-cameras and --gt-cameras to fit "
                "the similarity from camera centers")
        rig_p = formats.load_rig(args.pred_cameras)
        rig_g = formats.load_rig(args.gt_cameras)
        idx = metrics._match_frames(rig_p, rig_g)
        sim = metrics.fit_similarity(
            rig_p.centers(), np.stack([rig_g[k].pose.center for k in idx]))
    cm = metrics.chamfer(pred, gt, prealign=sim)
    doc = {
        "command": "eval-points",
        "pred_points": len(pred),
        "gt_points": len(gt),
        "accuracy": cm.accuracy,
        "completeness": cm.completeness,
        "overall": cm.overall,
        "prealigned": bool(args.prealign),
    }
    if sim is not None:
        doc["prealign_scale"] = sim.scale
        doc["prealign_degenerate"] = sim.degenerate
    return doc


# ---------------------------------------------------------------------------
# select-points
# ---------------------------------------------------------------------------

def _load_weight_csv(path: str, matches: MatchSet) -> WeightTable:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    total = matches.total_correspondences()
    if len(rows) != total:
        raise ParseError(
            f"{path}: {len(rows)} weight rows, match set has {total} correspondences")
    try:
        w = np.array([float(r["weight"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: malformed weight column ({exc})") from None
    return WeightTable(w, float("nan"), float("nan"))


def _cmd_select_points(args) -> dict:
    rig, matches = _load_bound_matches(args.cameras, args.matches)
    wt = _load_weight_csv(args.weights, matches)
    depth_dir = Path(args.depth_dir)
    depths = {}
    for idx, frame in enumerate(rig.frames):
        path = depth_dir / f"{frame.frame_id}.pfm"
        if path.exists():
            dm = formats.load_pfm(path)
            k = frame.intrinsics
            if dm.width != k.width or dm.height != k.height:
                raise ParseError(
                    f"{path}: depth is {dm.width}x{dm.height}, frame expects "
                    f"{k.width}x{k.height}")
            depths[idx] = dm
    cloud, skipped = pointcloud.select_matched_points(
        matches, wt, depths, rig, weight_threshold=args.threshold)
    formats.save_ply(cloud, args.out)
    return {
        "command": "select-points",
        "out": args.out,
        "threshold": args.threshold,
        "points": len(cloud),
        "skipped_invalid_depth": skipped,
    }


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def _cmd_weights(args) -> dict:
    rig, matches = _load_bound_matches(args.cameras, args.matches)
    residuals, stats = epipolar_residuals(rig, matches, mode=args.residual_mode)
    hist = build_histogram(residuals)
    wt = adaptive_weights(residuals, hist, alpha=args.alpha)

    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair_index", "frame_i", "frame_j", "corr_index",
                    "u_i", "v_i", "u_j", "v_j", "residual_px", "weight"])
        off = 0
        for p, pm in enumerate(matches.pairs):
            for k in range(len(pm)):
                w.writerow([p, pm.frame_i, pm.frame_j, k,
                            repr(float(pm.xy_i[k, 0])), repr(float(pm.xy_i[k, 1])),
                            repr(float(pm.xy_j[k, 0])), repr(float(pm.xy_j[k, 1])),
                            repr(float(residuals[off + k])),
                            repr(float(wt.weights[off + k]))])
            off += len(pm)
    hist_path = args.hist_csv or str(out.with_suffix(".hist.csv"))
    with open(hist_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count", "density"])
        for b in range(hist.n_bins):
            w.writerow([repr(float(hist.bin_edges[b])),
                        repr(float(hist.bin_edges[b + 1])),
                        int(hist.counts[b]), repr(float(hist.densities[b]))])
    finite = residuals[np.isfinite(residuals)]
    return {
        "command": "weights",
        "out": str(out),
        "hist_csv": hist_path,
        "correspondences": matches.total_correspondences(),
        "degenerate_correspondences": stats.degenerate_correspondences,
        "median_residual_px": float(np.median(finite)) if finite.size else None,
        "avg_density": wt.avg_density,
        "alpha": args.alpha,
    }


# ---------------------------------------------------------------------------

class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="epialign",
        description="Camera-rig global alignment and evaluation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--report", help="write the JSON report here instead of stdout")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic scene file set")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("align", help="refine camera poses with epipolar alignment")
    p.add_argument("--cameras", required=True)
    p.add_argument("--matches", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--lr0", type=float, default=5e-4)
    p.add_argument("--lr1", type=float, default=1e-3)
    p.add_argument("--lr2", type=float, default=1e-2)
    p.add_argument("--b1", type=float, default=2.5)
    p.add_argument("--b2", type=float, default=7.5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--pair-angle-deg", type=float, default=30.0)
    p.add_argument("--max-matches", type=int, default=4096)
    p.add_argument("--residual-mode", choices=["algebraic", "geometric"],
                   default="geometric")
    p.add_argument("--optimize-focal", action="store_true")
    common(p)
    p.set_defaults(fn=_cmd_align)

    p = sub.add_parser("eval-pose", help="pose metrics of a predicted rig vs GT")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--order-invariant", action="store_true")
    p.add_argument("--trajectory-csv")
    common(p)
    p.set_defaults(fn=_cmd_eval_pose)

    p = sub.add_parser("eval-points", help="Chamfer metrics of two PLY clouds")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--prealign", action="store_true")
    p.add_argument("--pred-cameras", help="rig for fitting the prealign similarity")
    p.add_argument("--gt-cameras", help="GT rig for fitting the prealign similarity")
    common(p)
    p.set_defaults(fn=_cmd_eval_points)

    p = sub.add_parser("select-points",
                       help="export high-weight matched points as a PLY cloud")
    p.add_argument("--cameras", required=True)
    p.add_argument("--matches", required=True)
    p.add_argument("--weights", required=True, help="weight CSV from `weights`")
    p.add_argument("--depth-dir", required=True)
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(fn=_cmd_select_points)

    p = sub.add_parser("weights", help="emit residual histogram and weight table")
    p.add_argument("--cameras", required=True)
    p.add_argument("--matches", required=True)
    p.add_argument("--out", required=True, help="weight table CSV")
    p.add_argument("--hist-csv", help="histogram CSV (default: <out>.hist.csv)")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--residual-mode", choices=["algebraic", "geometric"],
                   default="geometric")
    common(p)
    p.set_defaults(fn=_cmd_weights)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        doc = args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit_report(doc, args.report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
