"""Initialization point clouds from high-weight correspondences and depth maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import MissingDepthMap
from .geometry import CameraRig, unproject
from .pairing import MatchSet
from .weighting import WeightTable


@dataclass(frozen=True)
class DepthMap:
    """Row-major per-pixel depth in scene units; non-positive marks invalid."""

    values: np.ndarray   # (height, width)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("depth map must be a 2-D array")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ScenePointCloud:
    """3D points with optional colors and a provenance tag."""

    points: np.ndarray                    # (n, 3) float64
    colors: np.ndarray | None = None      # (n, 3) uint8
    source: str = "external"              # matched | random | external
    consistency: np.ndarray | None = None  # per-point endpoint disagreement

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(p).all():
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "points", p)
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if c.shape[0] != p.shape[0]:
                raise ValueError("colors must align 1:1 with points")
            object.__setattr__(self, "colors", c)
        if self.consistency is not None:
            s = np.asarray(self.consistency, dtype=np.float64).reshape(-1)
            if s.shape[0] != p.shape[0]:
                raise ValueError("consistency must align 1:1 with points")
            object.__setattr__(self, "consistency", s)

    def __len__(self) -> int:
        return self.points.shape[0]


def sample_depth(depth: DepthMap, u: float, v: float) -> float:
    """Depth at a subpixel location; 0.0 when no valid sample exists.

    Bilinear over the four surrounding pixel centers when all four are valid;
    otherwise the nearest pixel's value (which also covers image borders via
    clamping). Returns 0.0 when even the nearest pixel is invalid.
    """
    h, w = depth.values.shape
    x0 = int(np.floor(u))
    y0 = int(np.floor(v))
    xs = np.clip([x0, x0 + 1], 0, w - 1)
    ys = np.clip([y0, y0 + 1], 0, h - 1)
    q = depth.values[np.ix_(ys, xs)]
    if (q > 0).all():
        fx = u - x0
        fy = v - y0
        top = q[0, 0] * (1 - fx) + q[0, 1] * fx
        bot = q[1, 0] * (1 - fx) + q[1, 1] * fx
        return float(top * (1 - fy) + bot * fy)
    xn = int(np.clip(round(u), 0, w - 1))
    yn = int(np.clip(round(v), 0, h - 1))
    val = float(depth.values[yn, xn])
    return val if val > 0 else 0.0


def select_matched_points(matches: MatchSet, weights: WeightTable,
                          depths: Mapping[int, DepthMap], rig: CameraRig,
                          weight_threshold: float = 0.3,
                          ) -> tuple[ScenePointCloud, int]:
    """Unproject correspondences whose weight strictly exceeds the threshold.

    Each surviving correspondence is lifted from both endpoints with its
    frame's depth map, emitting two world points that carry the endpoint
    disagreement as a consistency score. Returns the cloud and the number of
    correspondences skipped because either endpoint landed on invalid depth.
    """
    if weight_threshold < 0:
        raise ValueError("weight threshold must be >= 0")
    per_pair = weights.split(matches)
    points: list[np.ndarray] = []
    scores: list[float] = []
    skipped = 0
    for pm, w in zip(matches.pairs, per_pair):
        for f in (pm.frame_i, pm.frame_j):
            if f not in depths:
                raise MissingDepthMap(f"no depth map for frame index {f}")
        d_i = depths[pm.frame_i]
        d_j = depths[pm.frame_j]
        cam_i = rig[pm.frame_i]
        cam_j = rig[pm.frame_j]
        for k in np.flatnonzero(w > weight_threshold):
            zi = sample_depth(d_i, pm.xy_i[k, 0], pm.xy_i[k, 1])
            zj = sample_depth(d_j, pm.xy_j[k, 0], pm.xy_j[k, 1])
            if zi <= 0 or zj <= 0:
                skipped += 1
                continue
            p_i = unproject(pm.xy_i[k], zi, cam_i)
            p_j = unproject(pm.xy_j[k], zj, cam_j)
            gap = float(np.linalg.norm(p_i - p_j))
            points.extend([p_i, p_j])
            scores.extend([gap, gap])
    pts = np.array(points).reshape(-1, 3)
    cloud = ScenePointCloud(pts, source="matched",
                            consistency=np.array(scores))
    return cloud, skipped


def random_cloud(rig: CameraRig, count: int, seed: int = 0) -> ScenePointCloud:
    """Uniform points in the camera-center bounding box inflated twofold."""
    if count < 1:
        raise ValueError("count must be >= 1")
    centers = rig.centers()
    lo = centers.min(axis=0)
    hi = centers.max(axis=0)
    mid = (lo + hi) / 2.0
    half = (hi - lo)            # 2x the original half-extent
    rng = np.random.default_rng(seed)
    pts = mid + (rng.uniform(-1.0, 1.0, size=(count, 3)) * half)
    return ScenePointCloud(pts, source="random")
