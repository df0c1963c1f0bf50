"""Pose, trajectory, and point-cloud evaluation metrics.

Relative errors follow the pair convention (Ri^T Rj, Ri^T (tj - ti)). The
rotation part is insensitive to the pair direction; the translation part is
not, so the order-invariant mode doubles the sequence with the reversed
direction of every pair, making the aggregate metrics independent of the
input frame order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, EmptySequence, FrameMismatch
from .geometry import CameraRig, relative_pose, rotation_angle_deg
from .parallel import worker_count
from .pointcloud import ScenePointCloud

ZERO_BASELINE_TOL = 1e-9


@dataclass(frozen=True)
class PoseMetrics:
    """Per-pair relative rotation/translation errors in degrees."""

    rre_deg: np.ndarray
    rte_deg: np.ndarray
    rre_mean: float
    rte_mean: float
    pair_count: int
    auc_at_30: float | None
    zero_baseline_flags: np.ndarray   # True where a degenerate baseline forced RTE = 0


@dataclass(frozen=True)
class Similarity:
    """Fitted Sim(3): x -> scale * R @ x + t."""

    scale: float
    R: np.ndarray
    t: np.ndarray
    degenerate: bool

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return self.scale * (pts @ self.R.T) + self.t


@dataclass(frozen=True)
class TrajectoryMetrics:
    ate_rmse: float
    similarity: Similarity


@dataclass(frozen=True)
class ChamferMetrics:
    accuracy: float
    completeness: float
    overall: float


# ---------------------------------------------------------------------------
# relative pose errors
# ---------------------------------------------------------------------------

def _match_frames(pred: CameraRig, gt: CameraRig) -> list[int]:
    """For each pred frame, the index of the gt frame with the same id."""
    if len(pred) != len(gt) or len(pred) < 2:
        raise FrameMismatch(f"rigs must share >= 2 frames, got {len(pred)} vs {len(gt)}")
    gt_index = gt.index_by_id()
    try:
        return [gt_index[f.frame_id] for f in pred.frames]
    except KeyError as exc:
        raise FrameMismatch(f"frame id {exc.args[0]!r} missing from ground truth") from None


def _direction_angle_deg(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    """Angle between two translation directions; zero baselines flag as (0, True)."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < ZERO_BASELINE_TOL or nb < ZERO_BASELINE_TOL:
        return 0.0, True
    c = float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
    return float(np.degrees(np.arccos(c))), False


def pairwise_errors(pred: CameraRig, gt: CameraRig,
                    order_invariant: bool = False) -> PoseMetrics:
    """RRE/RTE over all frame pairs (i < j) in the pred rig's frame order.

    With ``order_invariant`` every pair contributes both directions, which
    leaves RRE untouched and makes the RTE multiset independent of frame
    order.
    """
    gt_of = _match_frames(pred, gt)
    n = len(pred)
    directed = []
    for i in range(n):
        for j in range(i + 1, n):
            directed.append((i, j))
            if order_invariant:
                directed.append((j, i))
    rre = np.empty(len(directed))
    rte = np.empty(len(directed))
    flags = np.zeros(len(directed), dtype=bool)
    for k, (i, j) in enumerate(directed):
        rel_p = relative_pose(pred[i].pose, pred[j].pose)
        rel_g = relative_pose(gt[gt_of[i]].pose, gt[gt_of[j]].pose)
        rre[k] = rotation_angle_deg(rel_g.dR.T @ rel_p.dR)
        rte[k], flags[k] = _direction_angle_deg(rel_p.dt, rel_g.dt)
    return PoseMetrics(
        rre_deg=rre, rte_deg=rte,
        rre_mean=float(rre.mean()), rte_mean=float(rte.mean()),
        pair_count=len(directed), auc_at_30=None,
        zero_baseline_flags=flags,
    )


def auc_at_30(rre_deg: np.ndarray, rte_deg: np.ndarray) -> float:
    """Exact area under the accuracy curve from 0 to 30 degrees.

    The per-pair error is max(RRE, RTE); accuracy(theta) is the fraction of
    pairs with error strictly below theta, integrated in closed form.
    """
    rre = np.asarray(rre_deg, dtype=np.float64).reshape(-1)
    rte = np.asarray(rte_deg, dtype=np.float64).reshape(-1)
    if rre.shape != rte.shape:
        raise ValueError("RRE and RTE sequences must have equal length")
    if rre.size == 0:
        raise EmptySequence("cannot integrate an empty error sequence")
    err = np.maximum(rre, rte)
    return float(np.maximum(0.0, 30.0 - err).sum() / (30.0 * err.size))


def evaluate_poses(pred: CameraRig, gt: CameraRig,
                   order_invariant: bool = False) -> PoseMetrics:
    """Pairwise errors with the AUC@30 field filled in."""
    m = pairwise_errors(pred, gt, order_invariant)
    return PoseMetrics(
        rre_deg=m.rre_deg, rte_deg=m.rte_deg,
        rre_mean=m.rre_mean, rte_mean=m.rte_mean,
        pair_count=m.pair_count,
        auc_at_30=auc_at_30(m.rre_deg, m.rte_deg),
        zero_baseline_flags=m.zero_baseline_flags,
    )


# ---------------------------------------------------------------------------
# trajectory alignment
# ---------------------------------------------------------------------------

def fit_similarity(src: np.ndarray, dst: np.ndarray) -> Similarity:
    """Closed-form least-squares Sim(3) mapping src points onto dst points.

    Degenerate inputs (fewer than 3 points, or collinear/coincident targets)
    are flagged; the fit still returns a usable transform.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape or src.shape[0] == 0:
        raise ValueError("point sets must be non-empty with matching shapes")
    n = src.shape[0]
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cs = src - mu_s
    cd = dst - mu_d
    var_s = float((cs ** 2).sum() / n)
    cov = cd.T @ cs / n
    sv = np.linalg.svd(cd, compute_uv=False) if n >= 3 else np.zeros(2)
    degenerate = n < 3 or sv[1] <= 1e-9 * max(sv[0], 1e-300)
    if var_s <= 1e-300:
        return Similarity(1.0, np.eye(3), dst.mean(axis=0) - src.mean(axis=0), True)
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    scale = float(np.trace(np.diag(D) @ S) / var_s)
    if scale <= 0:
        scale = 1.0
        degenerate = True
    t = mu_d - scale * R @ mu_s
    return Similarity(scale, R, t, bool(degenerate))


def ate_rmse(pred: CameraRig, gt: CameraRig) -> TrajectoryMetrics:
    """RMSE of camera centers after the best-fit similarity alignment."""
    gt_of = _match_frames(pred, gt)
    c_pred = pred.centers()
    c_gt = np.stack([gt[k].pose.center for k in gt_of])
    sim = fit_similarity(c_pred, c_gt)
    resid = sim.apply(c_pred) - c_gt
    return TrajectoryMetrics(
        ate_rmse=float(np.sqrt((resid ** 2).sum(axis=1).mean())),
        similarity=sim,
    )


# ---------------------------------------------------------------------------
# point-cloud metrics
# ---------------------------------------------------------------------------

def chamfer(pred: ScenePointCloud, gt: ScenePointCloud,
            prealign: Similarity | None = None) -> ChamferMetrics:
    """Exact nearest-neighbour Chamfer metrics between two clouds.

    ``accuracy`` is the mean distance from pred points to their nearest gt
    point, ``completeness`` the reverse, ``overall`` their mean. ``prealign``
    maps the pred cloud into the gt frame before measuring.
    """
    p = pred.points
    g = gt.points
    if p.shape[0] == 0 or g.shape[0] == 0:
        raise EmptyCloud("both clouds must be non-empty")
    if prealign is not None:
        p = prealign.apply(p)
    workers = worker_count()
    d_pg, _ = cKDTree(g).query(p, k=1, workers=workers)
    d_gp, _ = cKDTree(p).query(g, k=1, workers=workers)
    acc = float(np.mean(d_pg))
    comp = float(np.mean(d_gp))
    return ChamferMetrics(acc, comp, (acc + comp) / 2.0)
