"""Gradient-based refinement of camera poses under the weighted epipolar loss.

The loss is the weight-normalized sum of per-correspondence epipolar
residuals over all selected pairs. Each camera except the gauge frame gets a
residual block (6D rotation, 3D translation, optionally one log-focal scale)
seeded at identity on top of its frozen initial pose. Optimization is
full-batch adaptive-moment gradient descent with a learning rate picked once
from the initial median residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyResiduals, InsufficientCorrespondences, ZeroTotalWeight
from .geometry import (
    CameraFrame,
    CameraPose,
    CameraRig,
    PoseResidual,
    apply_residual,
    rot6d_backward,
    rot6d_decode,
    rotation_angle_deg,
    skew,
)
from .pairing import MatchSet
from .parallel import map_ordered
from .weighting import (
    WeightTable,
    adaptive_weights,
    build_histogram,
    confidence_weights,
    uniform_weights,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
F_NORM_EPS = 1e-15
MIN_TOTAL_CORRESPONDENCES = 8


@dataclass(frozen=True)
class AlignerConfig:
    """Knobs of the alignment run; defaults are the published operating point."""

    iterations: int = 300
    lr0: float = 5e-4
    lr1: float = 1e-3
    lr2: float = 1e-2
    b1: float = 2.5
    b2: float = 7.5
    optimize_focal: bool = False
    gauge_frame: int = 0
    residual_mode: str = "geometric"
    alpha: float = 0.5
    weight_mode: str = "adaptive"    # adaptive | uniform | confidence
    reweight_every: int = 0          # 0 keeps the weights frozen

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0 < self.lr0 <= self.lr1 <= self.lr2):
            raise ValueError("learning rates must satisfy 0 < lr0 <= lr1 <= lr2")
        if not (0 < self.b1 < self.b2):
            raise ValueError("bands must satisfy 0 < b1 < b2")
        kernels.mode_id(self.residual_mode)

    @property
    def param_dim(self) -> int:
        return 10 if self.optimize_focal else 9


@dataclass(frozen=True)
class AlignmentReport:
    """Diagnostics of one alignment run."""

    initial_median_px: float
    final_median_px: float
    learning_rate: float
    loss_trace: np.ndarray           # one entry per iteration
    rotation_delta_deg: np.ndarray   # per frame, degrees
    translation_delta: np.ndarray    # per frame, scene units
    dropped_pairs: int               # empty or degenerate pairs excluded
    degenerate_correspondences: int  # skip events summed over iterations

    def to_dict(self) -> dict:
        return {
            "initial_median_px": self.initial_median_px,
            "final_median_px": self.final_median_px,
            "learning_rate": self.learning_rate,
            "iterations": int(self.loss_trace.shape[0]),
            "loss_initial": float(self.loss_trace[0]),
            "loss_final": float(self.loss_trace[-1]),
            "loss_trace": [float(x) for x in self.loss_trace],
            "rotation_delta_deg": [float(x) for x in self.rotation_delta_deg],
            "translation_delta": [float(x) for x in self.translation_delta],
            "dropped_pairs": self.dropped_pairs,
            "degenerate_correspondences": self.degenerate_correspondences,
        }


@dataclass(frozen=True)
class LossGradient:
    loss: float
    grad: np.ndarray   # (n_frames, param_dim), gauge block exactly zero
    skipped: int


@dataclass(frozen=True)
class ResidualStats:
    degenerate_pairs: int
    degenerate_correspondences: int


def identity_params(n_frames: int, optimize_focal: bool = False) -> np.ndarray:
    """Residual parameter block that decodes to the identity correction."""
    dim = 10 if optimize_focal else 9
    p = np.zeros((n_frames, dim))
    p[:, 0] = 1.0
    p[:, 4] = 1.0
    return p


def select_learning_rate(median_residual: float, cfg: AlignerConfig) -> float:
    """Band rule on the median residual; boundary values take the middle band."""
    if median_residual < 0:
        raise ValueError("median residual must be >= 0")
    if median_residual < cfg.b1:
        return cfg.lr0
    if median_residual > cfg.b2:
        return cfg.lr2
    return cfg.lr1


class _Problem:
    """Precomputed pair data plus loss/gradient evaluation at parameter blocks."""

    def __init__(self, rig: CameraRig, matches: MatchSet, cfg: AlignerConfig):
        self.cfg = cfg
        self.mode = kernels.mode_id(cfg.residual_mode)
        self.n_frames = len(rig)
        self.base_R = np.stack([f.pose.R for f in rig.frames])
        self.base_t = np.stack([f.pose.t for f in rig.frames])
        self.base_Kinv = np.stack([f.intrinsics.inverse_matrix() for f in rig.frames])
        self.pairs = [
            (pm.frame_i, pm.frame_j,
             np.ascontiguousarray(pm.xy_i), np.ascontiguousarray(pm.xy_j))
            for pm in matches.pairs
        ]
        counts = [p[2].shape[0] for p in self.pairs]
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
        self.total = int(self.offsets[-1])

    # -- state assembly -------------------------------------------------------

    def _decode(self, params: np.ndarray):
        n = self.n_frames
        Rs = np.empty((n, 3, 3))
        ts = np.empty((n, 3))
        Kinv = np.empty((n, 3, 3))
        for f in range(n):
            dR = rot6d_decode(params[f, :6])
            Rs[f] = dR @ self.base_R[f]
            ts[f] = self.base_t[f] + params[f, 6:9]
            if self.cfg.optimize_focal:
                Kinv[f] = self.base_Kinv[f].copy()
                Kinv[f][:2] *= np.exp(-params[f, 9])
            else:
                Kinv[f] = self.base_Kinv[f]
        return Rs, ts, Kinv

    @staticmethod
    def _pair_F(Rs, ts, Kinv, i, j):
        R_ij = Rs[j] @ Rs[i].T
        t_ij = ts[j] - R_ij @ ts[i]
        E = skew(t_ij) @ R_ij
        F_raw = Kinv[j].T @ E @ Kinv[i]
        r = np.linalg.norm(F_raw)
        if r < F_NORM_EPS:
            return None
        return R_ij, t_ij, E, F_raw, r

    # -- evaluation -----------------------------------------------------------

    def residuals(self, params: np.ndarray) -> tuple[np.ndarray, ResidualStats]:
        """Per-correspondence residuals in match order; NaN marks degenerates."""
        Rs, ts, Kinv = self._decode(params)

        def task(pair):
            i, j, xi, xj = pair
            geom = self._pair_F(Rs, ts, Kinv, i, j)
            if geom is None:
                return np.full(xi.shape[0], np.nan), xi.shape[0], True
            *_, F_raw, r = geom
            e, ndeg = kernels.pair_residuals(F_raw / r, xi, xj, self.mode)
            return e, ndeg, False

        out = map_ordered(task, self.pairs)
        e_all = np.concatenate([o[0] for o in out]) if out else np.empty(0)
        deg_corr = sum(o[1] for o in out)
        deg_pairs = sum(1 for o in out if o[2])
        return e_all, ResidualStats(deg_pairs, deg_corr)

    def loss_and_gradient(self, params: np.ndarray, weights: np.ndarray) -> LossGradient:
        Rs, ts, Kinv = self._decode(params)
        cfg = self.cfg

        def task(item):
            idx, (i, j, xi, xj) = item
            w = weights[self.offsets[idx]:self.offsets[idx + 1]]
            geom = self._pair_F(Rs, ts, Kinv, i, j)
            if geom is None:
                return None, xi.shape[0]
            R_ij, t_ij, E, F_raw, r = geom
            Fhat = F_raw / r
            loss_sum, w_sum, G_hat, nskip = kernels.pair_accumulate(
                Fhat, xi, xj, w, self.mode)
            # back through the unit-Frobenius scaling
            G_raw = (G_hat - np.vdot(G_hat, Fhat) * Fhat) / r
            # F = Kj^-T E Ki^-1
            G_E = Kinv[j] @ G_raw @ Kinv[i].T
            g_si = g_sj = 0.0
            if cfg.optimize_focal:
                G_B = E.T @ Kinv[j] @ G_raw
                G_A = G_raw @ Kinv[i].T @ E.T
                g_si = -float((G_B[:2] * Kinv[i][:2]).sum())
                g_sj = -float((G_A[:, :2] * Kinv[j].T[:, :2]).sum())
            # E = [t_ij]x R_ij: antisymmetric part of G_E R^T gives the t block
            M = G_E @ R_ij.T
            g_trel = np.array([M[2, 1] - M[1, 2],
                               M[0, 2] - M[2, 0],
                               M[1, 0] - M[0, 1]])
            G_Rrel = skew(t_ij).T @ G_E - np.outer(g_trel, ts[i])
            return (i, j, loss_sum, w_sum, nskip,
                    G_Rrel @ Rs[i], G_Rrel.T @ Rs[j],
                    -R_ij.T @ g_trel, g_trel, g_si, g_sj), 0

        results = map_ordered(task, list(enumerate(self.pairs)))

        num = 0.0
        den = 0.0
        skipped = 0
        G_R = np.zeros((self.n_frames, 3, 3))
        g_t = np.zeros((self.n_frames, 3))
        g_s = np.zeros(self.n_frames)
        for payload, pair_skip in results:
            skipped += pair_skip
            if payload is None:
                continue
            i, j, loss_sum, w_sum, nskip, G_Rj, G_Ri, g_ti, g_tj, g_si, g_sj = payload
            num += loss_sum
            den += w_sum
            skipped += nskip
            G_R[j] += G_Rj
            G_R[i] += G_Ri
            g_t[i] += g_ti
            g_t[j] += g_tj
            g_s[i] += g_si
            g_s[j] += g_sj
        if den <= 0:
            raise ZeroTotalWeight("no correspondence carries positive weight")

        grad = np.zeros((self.n_frames, cfg.param_dim))
        for f in range(self.n_frames):
            if f == cfg.gauge_frame:
                continue
            G_dR = G_R[f] @ self.base_R[f].T
            grad[f, :6] = rot6d_backward(params[f, :6], G_dR)
            grad[f, 6:9] = g_t[f]
            if cfg.optimize_focal:
                grad[f, 9] = g_s[f]
        grad /= den
        return LossGradient(num / den, grad, skipped)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def epipolar_residuals(rig: CameraRig, matches: MatchSet,
                       mode: str = "geometric") -> tuple[np.ndarray, ResidualStats]:
    """Residuals of every correspondence at the given cameras (NaN = degenerate)."""
    cfg = AlignerConfig(residual_mode=mode)
    prob = _Problem(rig, matches, cfg)
    return prob.residuals(identity_params(len(rig)))


def weighted_epipolar_loss(rig: CameraRig, matches: MatchSet, weights: WeightTable,
                           mode: str = "geometric") -> float:
    """Weight-normalized mean epipolar residual at the given cameras."""
    e, _ = epipolar_residuals(rig, matches, mode)
    w = weights.weights
    if w.shape[0] != e.shape[0]:
        raise ValueError("weight table size does not match the match set")
    valid = np.isfinite(e)
    wsum = float(w[valid].sum())
    if wsum <= 0:
        raise ZeroTotalWeight("total weight of valid correspondences is zero")
    return float((w[valid] * e[valid]).sum() / wsum)


def loss_at(rig: CameraRig, matches: MatchSet, weights: WeightTable,
            params: np.ndarray, cfg: AlignerConfig | None = None) -> float:
    """Loss evaluated at a residual parameter block (finite-difference probe)."""
    cfg = cfg or AlignerConfig()
    prob = _Problem(rig, matches, cfg)
    e, _ = prob.residuals(params)
    w = weights.weights
    valid = np.isfinite(e)
    wsum = float(w[valid].sum())
    if wsum <= 0:
        raise ZeroTotalWeight("total weight of valid correspondences is zero")
    return float((w[valid] * e[valid]).sum() / wsum)


def loss_gradient(rig: CameraRig, matches: MatchSet, weights: WeightTable,
                  params: np.ndarray | None = None,
                  cfg: AlignerConfig | None = None) -> LossGradient:
    """Analytic gradient of the loss w.r.t. every frame's residual block.

    The gauge frame's entries are excluded from the parameterization and come
    back as exact zeros.
    """
    cfg = cfg or AlignerConfig()
    prob = _Problem(rig, matches, cfg)
    if params is None:
        params = identity_params(len(rig), cfg.optimize_focal)
    return prob.loss_and_gradient(params, weights.weights)


def _make_weights(cfg: AlignerConfig, matches: MatchSet,
                  initial_residuals: np.ndarray) -> WeightTable:
    if cfg.weight_mode == "uniform":
        return uniform_weights(matches)
    if cfg.weight_mode == "confidence":
        return confidence_weights(matches)
    if cfg.weight_mode == "adaptive":
        hist = build_histogram(initial_residuals)
        return adaptive_weights(initial_residuals, hist, cfg.alpha)
    raise ValueError(f"unknown weight mode {cfg.weight_mode!r}")


def align(rig: CameraRig, matches: MatchSet, cfg: AlignerConfig | None = None,
          weights: WeightTable | None = None) -> tuple[CameraRig, AlignmentReport]:
    """Refine all camera poses except the gauge frame.

    Pipeline: residuals at the input cameras -> histogram -> adaptive weights
    (frozen) -> learning rate from the initial median -> bias-corrected
    adaptive-moment descent over identity-seeded pose residuals -> residuals
    applied to the input rig. Deterministic for identical inputs.
    """
    cfg = cfg or AlignerConfig()
    live = [pm for pm in matches.pairs if len(pm) > 0]
    dropped = len(matches.pairs) - len(live)
    mset = MatchSet(tuple(live))
    total = mset.total_correspondences()
    if len(live) < 1 or total < MIN_TOTAL_CORRESPONDENCES:
        raise InsufficientCorrespondences(
            f"need >= 1 pair and >= {MIN_TOTAL_CORRESPONDENCES} correspondences, "
            f"got {len(live)} pairs / {total}")
    if not (0 <= cfg.gauge_frame < len(rig)):
        raise ValueError(f"gauge frame {cfg.gauge_frame} outside rig of {len(rig)}")

    # Optimize in a canonical gauge with the origin at the camera centroid.
    # Rigid re-expressions of the input then differ only by a rotation about
    # that origin, under which the parameterized loss is identical, so the
    # loss trace does not depend on the input's world frame.
    centroid = rig.centers().mean(axis=0)
    canon = CameraRig(tuple(
        CameraFrame(f.frame_id, f.intrinsics,
                    CameraPose(f.pose.R, f.pose.t + f.pose.R @ centroid))
        for f in rig.frames))

    prob = _Problem(canon, mset, cfg)
    params = identity_params(len(rig), cfg.optimize_focal)
    e0, _ = prob.residuals(params)
    if not np.isfinite(e0).any():
        raise EmptyResiduals("every correspondence is degenerate at the input cameras")
    wt = weights if weights is not None else _make_weights(cfg, mset, e0)
    if wt.weights.shape[0] != total:
        raise ValueError("weight table size does not match the match set")
    if float(wt.weights.sum()) <= 0:
        raise ZeroTotalWeight("total correspondence weight is zero")

    median0 = float(np.median(e0[np.isfinite(e0)]))
    lr = select_learning_rate(median0, cfg)

    m = np.zeros_like(params)
    v = np.zeros_like(params)
    trace = np.empty(cfg.iterations)
    skipped = 0
    wt_run = wt
    for t in range(1, cfg.iterations + 1):
        if cfg.reweight_every > 0 and t > 1 and (t - 1) % cfg.reweight_every == 0:
            e_now, _ = prob.residuals(params)
            wt_run = _make_weights(cfg, mset, e_now)
        step = prob.loss_and_gradient(params, wt_run.weights)
        trace[t - 1] = step.loss
        skipped += step.skipped
        g = step.grad
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1 ** t)
        v_hat = v / (1.0 - ADAM_BETA2 ** t)
        params = params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    frames = []
    rot_delta = np.zeros(len(rig))
    trans_delta = np.zeros(len(rig))
    for f, frame in enumerate(rig.frames):
        if f == cfg.gauge_frame:
            frames.append(frame)
            continue
        res = PoseResidual(params[f, :6], params[f, 6:9])
        pose_c = apply_residual(canon[f].pose, res)
        pose = CameraPose(pose_c.R, pose_c.t - pose_c.R @ centroid)
        intr = frame.intrinsics
        if cfg.optimize_focal:
            intr = intr.scaled_focal(params[f, 9])
        frames.append(CameraFrame(frame.frame_id, intr, pose))
        rot_delta[f] = rotation_angle_deg(rot6d_decode(params[f, :6]))
        trans_delta[f] = float(np.linalg.norm(params[f, 6:9]))
    refined = CameraRig(tuple(frames))

    e1, _ = prob.residuals(params)
    fin = e1[np.isfinite(e1)]
    median1 = float(np.median(fin)) if fin.size else float("nan")
    report = AlignmentReport(
        initial_median_px=median0,
        final_median_px=median1,
        learning_rate=lr,
        loss_trace=trace,
        rotation_delta_deg=rot_delta,
        translation_delta=trans_delta,
        dropped_pairs=dropped,
        degenerate_correspondences=skipped,
    )
    return refined, report
