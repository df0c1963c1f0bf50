"""Candidate pair selection and correspondence storage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientFrames
from .geometry import CameraRig

MAX_CORRESPONDENCES = 4096


@dataclass(frozen=True)
class PairMatches:
    """Correspondences of one image pair: pixel (u, v) in frame i and j."""

    frame_i: int
    frame_j: int
    xy_i: np.ndarray                      # (k, 2) float64
    xy_j: np.ndarray                      # (k, 2)
    confidence: np.ndarray | None = None  # (k,) in [0, 1], optional

    def __post_init__(self):
        xi = np.ascontiguousarray(self.xy_i, dtype=np.float64).reshape(-1, 2)
        xj = np.ascontiguousarray(self.xy_j, dtype=np.float64).reshape(-1, 2)
        if xi.shape != xj.shape:
            raise ValueError("endpoint arrays must have matching shapes")
        object.__setattr__(self, "xy_i", xi)
        object.__setattr__(self, "xy_j", xj)
        if self.confidence is not None:
            c = np.ascontiguousarray(self.confidence, dtype=np.float64).reshape(-1)
            if c.shape[0] != xi.shape[0]:
                raise ValueError("confidence length must match correspondence count")
            object.__setattr__(self, "confidence", c)

    def __len__(self) -> int:
        return self.xy_i.shape[0]

    def take(self, idx: np.ndarray) -> "PairMatches":
        conf = None if self.confidence is None else self.confidence[idx]
        return PairMatches(self.frame_i, self.frame_j,
                           self.xy_i[idx], self.xy_j[idx], conf)


@dataclass(frozen=True)
class MatchSet:
    """Correspondences grouped by image pair, in a stable pair order."""

    pairs: tuple[PairMatches, ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def total_correspondences(self) -> int:
        return sum(len(p) for p in self.pairs)

    def has_confidence(self) -> bool:
        return all(p.confidence is not None for p in self.pairs) and len(self.pairs) > 0


@dataclass(frozen=True)
class PairSelection:
    """Pairs passing the view-angle filter, with their angles in degrees."""

    pairs: tuple[tuple[int, int], ...]
    view_angle_deg: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        a = np.asarray(self.view_angle_deg, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "view_angle_deg", a)

    def __len__(self) -> int:
        return len(self.pairs)

    def as_set(self) -> set[tuple[int, int]]:
        return set(self.pairs)


def select_pairs(rig: CameraRig, threshold_deg: float) -> PairSelection:
    """All frame pairs (i < j) whose optical axes meet within the threshold.

    The view angle is arccos of the dot product of the two forward axes.
    Output is sorted by (i, j).
    """
    if len(rig) < 2:
        raise InsufficientFrames(f"need at least 2 frames, got {len(rig)}")
    if not (0.0 < threshold_deg <= 180.0):
        raise ValueError(f"threshold must be in (0, 180], got {threshold_deg}")
    z = rig.forward_axes()
    cos = np.clip(z @ z.T, -1.0, 1.0)
    ang = np.degrees(np.arccos(cos))
    n = len(rig)
    pairs = []
    angles = []
    for i in range(n):
        for j in range(i + 1, n):
            if ang[i, j] <= threshold_deg:
                pairs.append((i, j))
                angles.append(ang[i, j])
    return PairSelection(tuple(pairs), np.array(angles))


def cap_correspondences(matches: MatchSet, cap: int = MAX_CORRESPONDENCES,
                        seed: int = 0) -> MatchSet:
    """Limit every pair to at most ``cap`` correspondences.

    Pairs with confidences keep the highest-confidence entries; pairs without
    are subsampled uniformly with a generator seeded by the pair index, so
    repeated runs retain the identical subset. Retained correspondences keep
    their original relative order.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    out = []
    for pm in matches.pairs:
        k = len(pm)
        if k <= cap:
            out.append(pm)
            continue
        if pm.confidence is not None:
            order = np.lexsort((np.arange(k), -pm.confidence))
            keep = np.sort(order[:cap])
        else:
            rng = np.random.default_rng([seed, pm.frame_i, pm.frame_j])
            keep = np.sort(rng.choice(k, size=cap, replace=False))
        out.append(pm.take(keep))
    return MatchSet(tuple(out))
