"""Validate model predictions and write the interchange file set."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import ManifestError, NonRotationExtrinsic, ShapeMismatch

SOURCES = ("vggt", "pi3", "other")
ROTATION_REJECT_TOL = 1e-3


@dataclass(frozen=True)
class FrameSpec:
    frame_id: str
    image_path: str
    width: int
    height: int


@dataclass(frozen=True)
class AdapterManifest:
    source: str
    frames: tuple[FrameSpec, ...]
    output_dir: str

    @staticmethod
    def load(path: str | Path) -> "AdapterManifest":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"{path}: {exc}") from None
        try:
            source = doc["source"]
            frames = tuple(
                FrameSpec(str(f["id"]), str(f.get("image", "")),
                          int(f["width"]), int(f["height"]))
                for f in doc["frames"])
            out = str(doc["output_dir"])
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"{path}: missing or malformed key ({exc})") from None
        if source not in SOURCES:
            raise ManifestError(f"{path}: unknown source {source!r}")
        if not frames:
            raise ManifestError(f"{path}: empty frame list")
        return AdapterManifest(source, frames, out)


@dataclass
class PredictionSet:
    """Per-frame model outputs plus optional tracking correspondences.

    ``match_frames`` is (P, 2) frame-index pairs; ``match_offsets`` is the
    (P+1,) prefix-sum partitioning ``match_uv`` (K, 4) rows (u, v, u', v')
    and the optional ``match_confidence`` (K,) among pairs.
    """

    intrinsics: np.ndarray    # (N, 3, 3)
    rotations: np.ndarray     # (N, 3, 3) world-to-camera
    translations: np.ndarray  # (N, 3)
    depth: np.ndarray         # (N, H, W)
    match_frames: np.ndarray | None = None
    match_offsets: np.ndarray | None = None
    match_uv: np.ndarray | None = None
    match_confidence: np.ndarray | None = None

    @staticmethod
    def load_npz(path: str | Path) -> "PredictionSet":
        with np.load(path) as blob:
            get = lambda k: blob[k] if k in blob.files else None
            return PredictionSet(
                intrinsics=blob["intrinsics"],
                rotations=blob["rotations"],
                translations=blob["translations"],
                depth=blob["depth"],
                match_frames=get("match_frames"),
                match_offsets=get("match_offsets"),
                match_uv=get("match_uv"),
                match_confidence=get("match_confidence"),
            )

    def save_npz(self, path: str | Path) -> None:
        arrays = {
            "intrinsics": self.intrinsics,
            "rotations": self.rotations,
            "translations": self.translations,
            "depth": self.depth,
        }
        for key in ("match_frames", "match_offsets", "match_uv",
                    "match_confidence"):
            val = getattr(self, key)
            if val is not None:
                arrays[key] = val
        np.savez(path, **arrays)


@dataclass(frozen=True)
class ExportResult:
    cameras_path: Path
    matches_path: Path
    depth_paths: tuple[Path, ...]
    pair_count: int
    correspondence_count: int


def _as_rotation(R: np.ndarray, where: str) -> np.ndarray:
    """Accept near-rotations (float32 storage), reject everything else.

    Predictions usually arrive in reduced precision, so the block is
    projected onto the nearest proper rotation; blocks farther than the
    reject tolerance (or reflections) abort the export.
    """
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    err = np.linalg.norm(R.T @ R - np.eye(3))
    det = np.linalg.det(R)
    if err > ROTATION_REJECT_TOL or det <= 0:
        raise NonRotationExtrinsic(
            f"{where}: |R^T R - I| = {err:.3e}, det = {det:.6f}")
    U, _, Vt = np.linalg.svd(R)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    return U @ S @ Vt


def export(manifest: AdapterManifest, preds: PredictionSet) -> ExportResult:
    """Write cameras.json, matches.bin, and depth/<id>.pfm for the manifest."""
    n = len(manifest.frames)
    for name, arr, shape in (
        ("intrinsics", preds.intrinsics, (n, 3, 3)),
        ("rotations", preds.rotations, (n, 3, 3)),
        ("translations", preds.translations, (n, 3)),
    ):
        if tuple(np.shape(arr)) != shape:
            raise ShapeMismatch(
                f"{name}: got {tuple(np.shape(arr))}, expected {shape}")
    if preds.depth.ndim != 3 or preds.depth.shape[0] != n:
        raise ShapeMismatch(
            f"depth: got {preds.depth.shape}, expected ({n}, H, W)")
    for idx, spec in enumerate(manifest.frames):
        h, w = preds.depth.shape[1:]
        if (h, w) != (spec.height, spec.width):
            raise ShapeMismatch(
                f"frame {spec.frame_id}: depth is {w}x{h}, manifest declares "
                f"{spec.width}x{spec.height}")

    frames = []
    for idx, spec in enumerate(manifest.frames):
        K = np.asarray(preds.intrinsics[idx], dtype=np.float64)
        R = _as_rotation(preds.rotations[idx], f"frame {spec.frame_id}")
        frames.append({
            "id": spec.frame_id,
            "width": spec.width,
            "height": spec.height,
            "fx": K[0, 0], "fy": K[1, 1], "cx": K[0, 2], "cy": K[1, 2],
            "R": R,
            "t": np.asarray(preds.translations[idx], dtype=np.float64),
        })

    pairs = []
    total = 0
    if preds.match_frames is not None:
        mf = np.asarray(preds.match_frames)
        off = np.asarray(preds.match_offsets)
        uv = np.asarray(preds.match_uv)
        if off.shape != (mf.shape[0] + 1,) or off[-1] != uv.shape[0]:
            raise ShapeMismatch(
                f"match_offsets {off.shape} does not partition "
                f"{uv.shape[0]} correspondences over {mf.shape[0]} pairs")
        for p in range(mf.shape[0]):
            i, j = int(mf[p, 0]), int(mf[p, 1])
            if not (0 <= i < n and 0 <= j < n):
                raise ShapeMismatch(
                    f"pair {p} references frames ({i}, {j}) outside {n}")
            lo, hi = int(off[p]), int(off[p + 1])
            conf = (preds.match_confidence[lo:hi]
                    if preds.match_confidence is not None else None)
            pairs.append({"frame_i": i, "frame_j": j,
                          "uv_i": uv[lo:hi, 0:2], "uv_j": uv[lo:hi, 2:4],
                          "confidence": conf})
            total += hi - lo

    out = Path(manifest.output_dir)
    cameras = out / "cameras.json"
    matches = out / "matches.bin"
    formats.write_rig_json(frames, cameras)
    formats.write_matches_bin(pairs, matches)
    depth_paths = []
    for idx, spec in enumerate(manifest.frames):
        path = out / "depth" / f"{spec.frame_id}.pfm"
        formats.write_pfm(preds.depth[idx], path)
        depth_paths.append(path)
    return ExportResult(cameras, matches, tuple(depth_paths), len(pairs), total)
