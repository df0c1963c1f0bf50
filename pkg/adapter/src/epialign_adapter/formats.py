"""Writers for the epialign interchange formats.

These re-implement the canonical encodings from the format contracts so the
adapter stays decoupled from the toolkit package: camera rigs as version-1
world-to-camera JSON, matches as the `EPMT` little-endian binary layout, and
depth maps as bottom-up grayscale PFM. The byte encodings are exact, so a
file written here, loaded by the toolkit, and saved again is bit-identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

RIG_FORMAT_VERSION = 1
MATCH_MAGIC = b"EPMT"
MATCH_VERSION = 1


def write_rig_json(frames: list[dict], path: str | Path) -> None:
    """``frames`` entries: id, width, height, fx, fy, cx, cy, R (3,3), t (3,)."""
    doc_frames = []
    for fr in frames:
        R = np.asarray(fr["R"], dtype=np.float64).reshape(3, 3)
        t = np.asarray(fr["t"], dtype=np.float64).reshape(3)
        doc_frames.append({
            "id": str(fr["id"]),
            "width": int(fr["width"]),
            "height": int(fr["height"]),
            "fx": float(fr["fx"]),
            "fy": float(fr["fy"]),
            "cx": float(fr["cx"]),
            "cy": float(fr["cy"]),
            "R": [float(x) for x in R.reshape(9)],
            "t": [float(x) for x in t],
        })
    doc = {
        "format_version": RIG_FORMAT_VERSION,
        "convention": "world_to_camera",
        "frames": doc_frames,
    }
    _write(path, (json.dumps(doc, indent=2) + "\n").encode("ascii"))


def write_matches_bin(pairs: list[dict], path: str | Path) -> None:
    """``pairs`` entries: frame_i, frame_j, uv_i (k,2), uv_j (k,2), confidence?"""
    out = bytearray()
    out += MATCH_MAGIC
    out += struct.pack("<II", MATCH_VERSION, len(pairs))
    for pair in pairs:
        uv_i = np.asarray(pair["uv_i"], dtype="<f4").reshape(-1, 2)
        uv_j = np.asarray(pair["uv_j"], dtype="<f4").reshape(-1, 2)
        conf = pair.get("confidence")
        k = uv_i.shape[0]
        if uv_j.shape[0] != k or (conf is not None and len(conf) != k):
            raise ValueError("pair arrays must have matching lengths")
        out += struct.pack("<IIIB", int(pair["frame_i"]), int(pair["frame_j"]),
                           k, int(conf is not None))
        rec = np.empty((k, 5 if conf is not None else 4), dtype="<f4")
        rec[:, 0:2] = uv_i
        rec[:, 2:4] = uv_j
        if conf is not None:
            rec[:, 4] = np.asarray(conf, dtype="<f4")
        out += rec.tobytes()
    _write(path, bytes(out))


def match_file_size(pair_counts: list[tuple[int, bool]]) -> int:
    """Exact byte length of a match file: (k, has_confidence) per pair."""
    size = 12
    for k, has_conf in pair_counts:
        size += 13 + 4 * (5 if has_conf else 4) * k
    return size


def write_pfm(depth: np.ndarray, path: str | Path) -> None:
    depth = np.asarray(depth, dtype="<f4")
    if depth.ndim != 2:
        raise ValueError("depth must be a 2-D array")
    h, w = depth.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    _write(path, header + np.ascontiguousarray(depth[::-1]).tobytes())


def _write(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
