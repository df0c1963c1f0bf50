"""Adaptive correspondence weights from the residual-density histogram.

Weights follow w = (f(e) / avg(f(e)))^alpha where f is a histogram density of
the epipolar residuals, clipped to [0, 20] px, and the average is taken over
the density evaluated at every residual of the population (not over bins).
Residuals computed once from the initial cameras stay frozen for the whole
optimization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyResiduals, MissingConfidence
from .pairing import MatchSet

CLIP_RANGE = (0.0, 20.0)
N_BINS = 100
DENSITY_FLOOR = 1e-6
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class ResidualHistogram:
    """Histogram density of epipolar residuals over the clip range."""

    bin_edges: np.ndarray   # (n_bins + 1,)
    densities: np.ndarray   # (n_bins,), integrates to 1 over the range
    counts: np.ndarray      # (n_bins,), raw sample counts
    clip_range: tuple[float, float]
    n_bins: int


@dataclass(frozen=True)
class WeightTable:
    """Per-correspondence weights, flat in match-set iteration order."""

    weights: np.ndarray
    alpha: float
    avg_density: float

    def split(self, matches: MatchSet) -> list[np.ndarray]:
        """Views of the weight vector per pair, following the set order."""
        out = []
        off = 0
        for pm in matches.pairs:
            out.append(self.weights[off:off + len(pm)])
            off += len(pm)
        if off != self.weights.shape[0]:
            raise ValueError("weight table does not match the match set size")
        return out


def build_histogram(residuals: np.ndarray, n_bins: int = N_BINS,
                    clip_range: tuple[float, float] = CLIP_RANGE) -> ResidualHistogram:
    """Equal-width histogram of residuals clamped into the clip range.

    NaN residuals (degenerate correspondences) are ignored. Empty bins get a
    density floor before normalization so no weight is ever exactly zero.
    """
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    r = r[np.isfinite(r)]
    if r.size == 0:
        raise EmptyResiduals("no finite residuals to histogram")
    lo, hi = clip_range
    r = np.clip(r, lo, hi)
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(r, bins=edges)
    raw = counts.astype(np.float64)
    raw[raw == 0.0] = DENSITY_FLOOR
    width = (hi - lo) / n_bins
    densities = raw / (raw.sum() * width)
    return ResidualHistogram(edges, densities, counts, (lo, hi), n_bins)


def density_at(hist: ResidualHistogram, residuals: np.ndarray) -> np.ndarray:
    """Evaluate the histogram density at each residual (clamped; NaN -> NaN)."""
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    out = np.full(r.shape, np.nan)
    finite = np.isfinite(r)
    lo, hi = hist.clip_range
    rc = np.clip(r[finite], lo, hi)
    idx = np.searchsorted(hist.bin_edges, rc, side="right") - 1
    idx = np.clip(idx, 0, hist.n_bins - 1)
    out[finite] = hist.densities[idx]
    return out


def adaptive_weights(residuals: np.ndarray, hist: ResidualHistogram,
                     alpha: float = DEFAULT_ALPHA) -> WeightTable:
    """Density-ratio weights for every residual of the population.

    Degenerate (NaN) residuals receive weight zero and do not enter the
    average density.
    """
    f = density_at(hist, residuals)
    finite = np.isfinite(f)
    if not finite.any():
        raise EmptyResiduals("no finite residuals to weight")
    avg = float(f[finite].mean())
    w = np.zeros(f.shape)
    w[finite] = (f[finite] / avg) ** alpha
    return WeightTable(w, float(alpha), avg)


def confidence_weights(matches: MatchSet) -> WeightTable:
    """Matcher-confidence weights, the comparison baseline to the adaptive ones."""
    if len(matches) == 0 or not matches.has_confidence():
        raise MissingConfidence("match set carries no confidences")
    w = np.concatenate([pm.confidence for pm in matches.pairs])
    return WeightTable(w.astype(np.float64), 1.0, float("nan"))


def uniform_weights(matches: MatchSet) -> WeightTable:
    """All-ones weights (plain mean of residuals)."""
    return WeightTable(np.ones(matches.total_correspondences()), 0.0, float("nan"))
