"""Interchange file formats: camera rigs, matches, depth maps, point clouds.

* Camera rigs are JSON (format_version 1, world-to-camera convention); float
  values round-trip exactly through the shortest-repr decimal encoding.
* Matches use a little-endian binary layout: magic ``EPMT``, u32 version,
  u32 pair count, then per pair u32 frame_i, u32 frame_j, u32 k, u8
  has_confidence followed by k records of f32 (u, v, u', v'[, confidence]).
* Depth maps are grayscale PFM (bottom-up scanlines, negative scale header
  for little-endian).
* Point clouds are binary little-endian PLY with float x/y/z and optional
  uchar RGB.

``save(load(path))`` reproduces match, depth, and cloud files byte for byte.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError, RotationInvalid, VersionMismatch
from .geometry import (
    CameraFrame,
    CameraIntrinsics,
    CameraPose,
    CameraRig,
    rotmat_to_quat_wxyz,
)
from .pairing import MatchSet, PairMatches
from .pointcloud import DepthMap, ScenePointCloud

RIG_FORMAT_VERSION = 1
MATCH_MAGIC = b"EPMT"
MATCH_VERSION = 1


# ---------------------------------------------------------------------------
# camera rig JSON
# ---------------------------------------------------------------------------

def rig_to_dict(rig: CameraRig) -> dict:
    frames = []
    for f in rig.frames:
        k = f.intrinsics
        frames.append({
            "id": f.frame_id,
            "width": k.width,
            "height": k.height,
            "fx": k.fx,
            "fy": k.fy,
            "cx": k.cx,
            "cy": k.cy,
            "R": [float(x) for x in f.pose.R.reshape(9)],
            "t": [float(x) for x in f.pose.t],
        })
    return {
        "format_version": RIG_FORMAT_VERSION,
        "convention": "world_to_camera",
        "frames": frames,
    }


def save_rig(rig: CameraRig, path: str | Path) -> None:
    text = json.dumps(rig_to_dict(rig), indent=2) + "\n"
    _write_bytes(path, text.encode("ascii"))


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ParseError(f"{where}: missing key {key!r}")
    return doc[key]


def load_rig(path: str | Path) -> CameraRig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    version = _require(doc, "format_version", str(path))
    if version != RIG_FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format_version {version} != {RIG_FORMAT_VERSION}")
    convention = _require(doc, "convention", str(path))
    if convention != "world_to_camera":
        raise ParseError(f"{path}: unsupported convention {convention!r}")
    raw_frames = _require(doc, "frames", str(path))
    frames = []
    ids = set()
    for n, fr in enumerate(raw_frames):
        where = f"{path}: frames[{n}]"
        fid = str(_require(fr, "id", where))
        if fid in ids:
            raise ParseError(f"{where}: duplicate frame id {fid!r}")
        ids.add(fid)
        try:
            intr = CameraIntrinsics(
                float(_require(fr, "fx", where)), float(_require(fr, "fy", where)),
                float(_require(fr, "cx", where)), float(_require(fr, "cy", where)),
                int(_require(fr, "width", where)), int(_require(fr, "height", where)),
            )
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}") from None
        R = np.asarray(_require(fr, "R", where), dtype=np.float64)
        t = np.asarray(_require(fr, "t", where), dtype=np.float64)
        if R.shape != (9,) or t.shape != (3,):
            raise ParseError(f"{where}: R must have 9 entries and t 3")
        try:
            pose = CameraPose(R.reshape(3, 3), t)
        except RotationInvalid as exc:
            raise RotationInvalid(f"{where}: {exc}") from None
        frames.append(CameraFrame(fid, intr, pose))
    return CameraRig(tuple(frames))


# ---------------------------------------------------------------------------
# binary match file
# ---------------------------------------------------------------------------

def save_matches(matches: MatchSet, path: str | Path) -> None:
    _write_bytes(path, matches_to_bytes(matches))


def matches_to_bytes(matches: MatchSet) -> bytes:
    out = bytearray()
    out += MATCH_MAGIC
    out += struct.pack("<II", MATCH_VERSION, len(matches.pairs))
    for pm in matches.pairs:
        has_conf = pm.confidence is not None
        out += struct.pack("<IIIB", pm.frame_i, pm.frame_j, len(pm), int(has_conf))
        cols = [pm.xy_i, pm.xy_j]
        rec = np.empty((len(pm), 5 if has_conf else 4), dtype="<f4")
        rec[:, 0:2] = cols[0]
        rec[:, 2:4] = cols[1]
        if has_conf:
            rec[:, 4] = pm.confidence
        out += rec.tobytes()
    return bytes(out)


def load_matches(path: str | Path) -> MatchSet:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return matches_from_bytes(blob, name=str(path))


def matches_from_bytes(blob: bytes, name: str = "<bytes>") -> MatchSet:
    if len(blob) < 12:
        raise ParseError(f"{name}: file too short ({len(blob)} bytes, need >= 12)")
    if blob[:4] != MATCH_MAGIC:
        raise ParseError(f"{name}: bad magic {blob[:4]!r}, expected {MATCH_MAGIC!r}")
    version, n_pairs = struct.unpack_from("<II", blob, 4)
    if version != MATCH_VERSION:
        raise VersionMismatch(f"{name}: match version {version} != {MATCH_VERSION}")
    off = 12
    pairs = []
    for p in range(n_pairs):
        if off + 13 > len(blob):
            raise ParseError(
                f"{name}: truncated pair header {p}: need {off + 13} bytes, "
                f"file has {len(blob)}")
        fi, fj, k, has_conf = struct.unpack_from("<IIIB", blob, off)
        off += 13
        if has_conf not in (0, 1):
            raise ParseError(f"{name}: pair {p}: has_confidence byte is {has_conf}")
        stride = 5 if has_conf else 4
        nbytes = 4 * stride * k
        if off + nbytes > len(blob):
            raise ParseError(
                f"{name}: truncated pair {p}: need {off + nbytes} bytes, "
                f"file has {len(blob)}")
        rec = np.frombuffer(blob, dtype="<f4", count=stride * k, offset=off)
        rec = rec.reshape(k, stride).astype(np.float64)
        off += nbytes
        conf = rec[:, 4] if has_conf else None
        pairs.append(PairMatches(int(fi), int(fj), rec[:, 0:2], rec[:, 2:4], conf))
    if off != len(blob):
        raise ParseError(
            f"{name}: {len(blob) - off} trailing bytes after {n_pairs} pairs")
    return MatchSet(tuple(pairs))


def bind_matches(rig: CameraRig, matches: MatchSet, name: str = "<matches>") -> MatchSet:
    """Validate frame indices and pixel bounds of a loaded match set."""
    n = len(rig)
    for p, pm in enumerate(matches.pairs):
        if not (0 <= pm.frame_i < n and 0 <= pm.frame_j < n):
            raise ParseError(
                f"{name}: pair {p} references frames ({pm.frame_i}, {pm.frame_j}) "
                f"outside rig of {n}")
        if pm.frame_i == pm.frame_j:
            raise ParseError(f"{name}: pair {p} references a frame with itself")
        for f, xy in ((pm.frame_i, pm.xy_i), (pm.frame_j, pm.xy_j)):
            k = rig[f].intrinsics
            if len(pm) and (
                xy[:, 0].min() < -1e-9 or xy[:, 0].max() > k.width - 1 + 1e-9
                or xy[:, 1].min() < -1e-9 or xy[:, 1].max() > k.height - 1 + 1e-9
            ):
                raise ParseError(
                    f"{name}: pair {p} has pixels outside image bounds of frame {f}")
    return matches


# ---------------------------------------------------------------------------
# PFM depth maps
# ---------------------------------------------------------------------------

def save_pfm(depth: DepthMap, path: str | Path) -> None:
    header = f"Pf\n{depth.width} {depth.height}\n-1.0\n".encode("ascii")
    rows = np.ascontiguousarray(depth.values[::-1], dtype="<f4")  # bottom-up
    _write_bytes(path, header + rows.tobytes())


def load_pfm(path: str | Path) -> DepthMap:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    try:
        magic, dims, scale, rest = blob.split(b"\n", 3)
    except ValueError:
        raise ParseError(f"{path}: incomplete PFM header") from None
    if magic != b"Pf":
        raise ParseError(f"{path}: bad PFM magic {magic!r}, expected b'Pf'")
    try:
        w, h = (int(x) for x in dims.split())
        scale_val = float(scale)
    except ValueError:
        raise ParseError(f"{path}: malformed PFM dimensions or scale") from None
    if scale_val >= 0:
        raise ParseError(f"{path}: big-endian PFM not supported (scale {scale_val})")
    expected = 4 * w * h
    if len(rest) != expected:
        raise ParseError(
            f"{path}: payload is {len(rest)} bytes, expected {expected} for {w}x{h}")
    data = np.frombuffer(rest, dtype="<f4").reshape(h, w)[::-1]
    return DepthMap(data.astype(np.float64))


# ---------------------------------------------------------------------------
# PLY point clouds
# ---------------------------------------------------------------------------

def save_ply(cloud: ScenePointCloud, path: str | Path) -> None:
    n = len(cloud)
    has_color = cloud.colors is not None
    lines = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if has_color:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines.append("end_header")
    header = ("\n".join(lines) + "\n").encode("ascii")
    if has_color:
        rec = np.zeros(n, dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)])
        rec["xyz"] = cloud.points
        rec["rgb"] = cloud.colors
    else:
        rec = np.zeros(n, dtype=[("xyz", "<f4", 3)])
        rec["xyz"] = cloud.points
    _write_bytes(path, header + rec.tobytes())


def load_ply(path: str | Path) -> ScenePointCloud:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply\n") or end < 0:
        raise ParseError(f"{path}: not a PLY file")
    header = blob[:end].decode("ascii", errors="replace").splitlines()
    body = blob[end + len(b"end_header\n"):]
    if "format binary_little_endian 1.0" not in header[1]:
        raise ParseError(f"{path}: only binary little-endian PLY is supported")
    n = None
    props = []
    for line in header[2:]:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts and parts[0] == "element":
            raise ParseError(f"{path}: unsupported element {parts[1]!r}")
        elif parts and parts[0] == "property":
            props.append((parts[1], parts[2]))
    if n is None:
        raise ParseError(f"{path}: missing vertex element")
    if [p for p in props[:3]] != [("float", "x"), ("float", "y"), ("float", "z")]:
        raise ParseError(f"{path}: vertex must start with float x, y, z")
    has_color = [p[1] for p in props[3:6]] == ["red", "green", "blue"]
    if has_color:
        dtype = np.dtype([("xyz", "<f4", 3), ("rgb", "u1", 3)])
    elif len(props) == 3:
        dtype = np.dtype([("xyz", "<f4", 3)])
    else:
        raise ParseError(f"{path}: unsupported vertex properties {props[3:]}")
    if len(body) != n * dtype.itemsize:
        raise ParseError(
            f"{path}: payload is {len(body)} bytes, expected {n * dtype.itemsize}")
    rec = np.frombuffer(body, dtype=dtype)
    colors = rec["rgb"].copy() if has_color else None
    return ScenePointCloud(rec["xyz"].astype(np.float64), colors=colors)


# ---------------------------------------------------------------------------
# COLMAP text export
# ---------------------------------------------------------------------------

def export_colmap_text(rig: CameraRig, cloud: ScenePointCloud | None,
                       out_dir: str | Path) -> None:
    """Write cameras.txt / images.txt / points3D.txt for downstream trainers."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    cam_lines = ["# Camera list with one line of data per camera:",
                 "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]"]
    img_lines = ["# Image list with two lines of data per image:",
                 "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
                 "#   POINTS2D[] as (X, Y, POINT3D_ID)"]
    for n, f in enumerate(rig.frames, start=1):
        k = f.intrinsics
        cam_lines.append(
            f"{n} PINHOLE {k.width} {k.height} {k.fx!r} {k.fy!r} {k.cx!r} {k.cy!r}")
        q = [float(x) for x in rotmat_to_quat_wxyz(f.pose.R)]
        t = [float(x) for x in f.pose.t]
        img_lines.append(
            f"{n} {q[0]!r} {q[1]!r} {q[2]!r} {q[3]!r} "
            f"{t[0]!r} {t[1]!r} {t[2]!r} {n} {f.frame_id}")
        img_lines.append("")

    pt_lines = ["# 3D point list with one line of data per point:",
                "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)"]
    if cloud is not None:
        colors = cloud.colors
        for n in range(len(cloud)):
            x, y, z = (float(v) for v in cloud.points[n])
            r, g, b = (colors[n] if colors is not None else (255, 255, 255))
            pt_lines.append(f"{n + 1} {x!r} {y!r} {z!r} {int(r)} {int(g)} {int(b)} 0.0")

    _write_bytes(out / "cameras.txt", ("\n".join(cam_lines) + "\n").encode("ascii"))
    _write_bytes(out / "images.txt", ("\n".join(img_lines) + "\n").encode("ascii"))
    _write_bytes(out / "points3D.txt", ("\n".join(pt_lines) + "\n").encode("ascii"))


# ---------------------------------------------------------------------------

def _write_bytes(path: str | Path, payload: bytes) -> None:
    try:
        path = Path(path)
        if path.parent != Path(""):
            os.makedirs(path.parent, exist_ok=True)
        path.write_bytes(payload)
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from None
