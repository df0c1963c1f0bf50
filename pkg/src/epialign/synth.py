"""Synthetic scenes with exact correspondences, plus calibrated noise injection.

Scenes place cameras on an orbit (or in a spherical shell) looking at a
point cloud near the origin. Matches are exact projections of points
co-visible in both views; a point counts as visible only when it is in
bounds, in front of the camera, and owns the nearest depth along its pixel
ray, so the rendered sparse depth maps agree exactly with the match
geometry. Everything is driven by a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NoCovisibility
from .geometry import (
    CameraFrame,
    CameraIntrinsics,
    CameraPose,
    CameraRig,
)
from .metrics import pairwise_errors
from .pairing import MatchSet, PairMatches
from .pointcloud import DepthMap, ScenePointCloud


@dataclass(frozen=True)
class SynthConfig:
    layout: str = "orbit"            # orbit | shell
    n_cameras: int = 20
    n_points: int = 500
    width: int = 640
    height: int = 480
    focal_px: float = 400.0
    orbit_radius: float = 4.0
    point_radius: float = 1.5
    target_jitter_frac: float = 0.1  # look-at offset, fraction of point_radius
    rot_sigma_deg: float = 0.0       # per-camera rotation jitter
    trans_sigma_frac: float = 0.0    # translation jitter, fraction of scene radius
    pixel_sigma_px: float = 0.0      # correspondence pixel noise
    outlier_frac: float = 0.0        # fraction replaced by uniform pixels
    seed: int = 0

    def __post_init__(self):
        if self.n_cameras < 1 or self.n_points < 1:
            raise ValueError("camera and point counts must be >= 1")
        if min(self.rot_sigma_deg, self.trans_sigma_frac, self.pixel_sigma_px) < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not (0.0 <= self.outlier_frac < 1.0):
            raise ValueError("outlier fraction must be in [0, 1)")
        if self.layout not in ("orbit", "shell"):
            raise ValueError(f"unknown layout {self.layout!r}")


@dataclass(frozen=True)
class SynthScene:
    rig: CameraRig                       # exact cameras
    cloud: ScenePointCloud               # generating points
    depths: dict[int, DepthMap]          # per frame index, sparse
    matches: MatchSet                    # exact correspondences
    point_indices: tuple[np.ndarray, ...]  # generating point per correspondence


@dataclass(frozen=True)
class PerturbStats:
    """Realized errors of the noisy rig against the clean one."""

    mean_rre_deg: float
    mean_rte_deg: float
    outlier_counts: tuple[int, ...]


def _look_at(center: np.ndarray, target: np.ndarray) -> CameraPose:
    """World-to-camera pose at ``center`` with the optical axis on ``target``."""
    z = target - center
    z = z / np.linalg.norm(z)
    up = np.array([0.0, 0.0, 1.0])
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-8:
        x = np.cross(z, np.array([0.0, 1.0, 0.0]))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return CameraPose(R, -R @ center)


def _camera_centers(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.layout == "orbit":
        theta = 2.0 * np.pi * np.arange(cfg.n_cameras) / cfg.n_cameras
        return np.stack([
            cfg.orbit_radius * np.cos(theta),
            cfg.orbit_radius * np.sin(theta),
            np.zeros(cfg.n_cameras),
        ], axis=1)
    # shell: radii in [0.8, 1.2] x orbit_radius, directions biased off the poles
    dirs = rng.normal(size=(cfg.n_cameras, 3))
    dirs[:, 2] *= 0.3
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.8, 1.2, size=cfg.n_cameras) * cfg.orbit_radius
    return dirs * radii[:, None]


def generate(cfg: SynthConfig) -> SynthScene:
    """Build an exact scene: cameras, points, sparse depth maps, matches."""
    rng = np.random.default_rng(cfg.seed)
    centers = _camera_centers(cfg, rng)

    # points uniform in a ball around the origin
    pts = rng.normal(size=(cfg.n_points, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= cfg.point_radius * rng.uniform(0.0, 1.0, size=(cfg.n_points, 1)) ** (1 / 3)

    intr = CameraIntrinsics(cfg.focal_px, cfg.focal_px,
                            (cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0,
                            cfg.width, cfg.height)
    # Jittered look-at targets keep the per-camera translations generic; a
    # rig aimed exactly at one point has identical t vectors, degenerating
    # the pairwise relative-translation blocks.
    targets = (cfg.target_jitter_frac * cfg.point_radius
               * rng.normal(size=(cfg.n_cameras, 3)))
    frames = [
        CameraFrame(f"frame_{i:04d}", intr, _look_at(centers[i], targets[i]))
        for i in range(cfg.n_cameras)
    ]
    rig = CameraRig(tuple(frames))

    # project every point into every camera; resolve per-pixel occlusion
    n_cam = cfg.n_cameras
    uv = np.zeros((n_cam, cfg.n_points, 2))
    depth_of = np.zeros((n_cam, cfg.n_points))
    visible = np.zeros((n_cam, cfg.n_points), dtype=bool)
    depth_maps: dict[int, DepthMap] = {}
    for c, frame in enumerate(frames):
        x_cam = pts @ frame.pose.R.T + frame.pose.t
        z = x_cam[:, 2]
        front = z > 1e-9
        u = np.where(front, intr.fx * x_cam[:, 0] / np.where(front, z, 1.0) + intr.cx, -1.0)
        v = np.where(front, intr.fy * x_cam[:, 1] / np.where(front, z, 1.0) + intr.cy, -1.0)
        inb = front & (u >= 0) & (u <= cfg.width - 1) & (v >= 0) & (v <= cfg.height - 1)
        uv[c, :, 0] = u
        uv[c, :, 1] = v
        depth_of[c] = z
        # nearest point along each pixel ray wins; losers count as occluded
        dm = np.zeros((cfg.height, cfg.width))
        owner = np.full((cfg.height, cfg.width), -1, dtype=np.int64)
        for p in np.flatnonzero(inb):
            px = int(round(u[p]))
            py = int(round(v[p]))
            if owner[py, px] < 0 or z[p] < dm[py, px]:
                owner[py, px] = p
                dm[py, px] = z[p]
        for p in np.flatnonzero(inb):
            px = int(round(u[p]))
            py = int(round(v[p]))
            visible[c, p] = owner[py, px] == p
        depth_maps[c] = DepthMap(dm)

    pairs = []
    indices = []
    for i in range(n_cam):
        for j in range(i + 1, n_cam):
            shared = np.flatnonzero(visible[i] & visible[j])
            if shared.size == 0:
                continue
            pairs.append(PairMatches(i, j, uv[i, shared], uv[j, shared]))
            indices.append(shared)
    if not pairs:
        raise NoCovisibility("no point is visible in at least two cameras")

    cloud = ScenePointCloud(pts, source="external")
    return SynthScene(rig, cloud, depth_maps, MatchSet(tuple(pairs)),
                      tuple(indices))


def _random_rotation(rng: np.random.Generator, sigma_deg: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.abs(rng.normal(0.0, np.radians(sigma_deg)))
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def perturb(rig: CameraRig, matches: MatchSet, cfg: SynthConfig,
            freeze: tuple[int, ...] = (),
            ) -> tuple[CameraRig, MatchSet, PerturbStats]:
    """Jitter camera poses and correspondences; zero sigmas are the identity.

    Rotation noise composes a random axis-angle of magnitude |N(0, sigma)|
    onto each camera's orientation while holding t fixed, which reproduces
    the RTE/RRE ratio of feed-forward pose predictors on look-at captures;
    translation noise is Gaussian with sigma scaled by the camera-spread
    radius. A fraction of correspondences is replaced by uniform random
    pixels in both images. Realized mean RRE/RTE against the clean rig are
    reported for calibration.

    Frames listed in ``freeze`` keep their exact pose. Freezing the aligner's
    gauge frame keeps the noisy rig expressed in the true world gauge, which
    the pair-convention relative metrics are sensitive to.
    """
    rng = np.random.default_rng(cfg.seed)
    centers = rig.centers()
    radius = float(np.linalg.norm(centers - centers.mean(axis=0), axis=1).max())

    frames = []
    for idx, frame in enumerate(rig.frames):
        R = frame.pose.R
        t = frame.pose.t
        if cfg.rot_sigma_deg > 0:
            dR = _random_rotation(rng, cfg.rot_sigma_deg)
            if idx not in freeze:
                R = dR @ R
        if cfg.trans_sigma_frac > 0:
            dt = rng.normal(0.0, cfg.trans_sigma_frac * radius, size=3)
            if idx not in freeze:
                t = t + dt
        if idx not in freeze and (cfg.rot_sigma_deg > 0 or cfg.trans_sigma_frac > 0):
            frames.append(CameraFrame(frame.frame_id, frame.intrinsics,
                                      CameraPose(R, t)))
        else:
            frames.append(frame)
    noisy_rig = CameraRig(tuple(frames))

    w = None
    if len(rig) > 0:
        w = rig[0].intrinsics.width
        h = rig[0].intrinsics.height
    noisy_pairs = []
    outlier_counts = []
    for pm in matches.pairs:
        xi = pm.xy_i.copy()
        xj = pm.xy_j.copy()
        k = len(pm)
        if cfg.pixel_sigma_px > 0:
            xi += rng.normal(0.0, cfg.pixel_sigma_px, size=xi.shape)
            xj += rng.normal(0.0, cfg.pixel_sigma_px, size=xj.shape)
        n_out = 0
        if cfg.outlier_frac > 0 and k > 0:
            mask = rng.random(k) < cfg.outlier_frac
            n_out = int(mask.sum())
            xi[mask, 0] = rng.uniform(0, w - 1, size=n_out)
            xi[mask, 1] = rng.uniform(0, h - 1, size=n_out)
            xj[mask, 0] = rng.uniform(0, w - 1, size=n_out)
            xj[mask, 1] = rng.uniform(0, h - 1, size=n_out)
        xi[:, 0] = np.clip(xi[:, 0], 0, w - 1)
        xi[:, 1] = np.clip(xi[:, 1], 0, h - 1)
        xj[:, 0] = np.clip(xj[:, 0], 0, w - 1)
        xj[:, 1] = np.clip(xj[:, 1], 0, h - 1)
        outlier_counts.append(n_out)
        noisy_pairs.append(PairMatches(pm.frame_i, pm.frame_j, xi, xj,
                                       pm.confidence))
    noisy_matches = MatchSet(tuple(noisy_pairs))

    if len(rig) >= 2:
        m = pairwise_errors(noisy_rig, rig, order_invariant=True)
        stats = PerturbStats(m.rre_mean, m.rte_mean, tuple(outlier_counts))
    else:
        stats = PerturbStats(0.0, 0.0, tuple(outlier_counts))
    return noisy_rig, noisy_matches, stats


def calibrate_noise(scene: SynthScene, cfg: SynthConfig,
                    rre_band: tuple[float, float],
                    rte_band: tuple[float, float],
                    freeze: tuple[int, ...] = (),
                    max_rounds: int = 12) -> tuple[SynthConfig, PerturbStats]:
    """Scale the rig noise sigmas until realized mean RRE/RTE land in-band.

    Rotation noise is tuned first (it alone determines RRE), then the
    translation sigma is scaled to bring RTE into its band. Deterministic:
    every probe reuses the config seed.
    """
    cur = replace(cfg, rot_sigma_deg=max(cfg.rot_sigma_deg, 1e-3))
    stats = None
    target_rre = (rre_band[0] + rre_band[1]) / 2.0
    for _ in range(max_rounds):
        _, _, stats = perturb(scene.rig, scene.matches, cur, freeze)
        if rre_band[0] <= stats.mean_rre_deg <= rre_band[1]:
            break
        scale = target_rre / max(stats.mean_rre_deg, 1e-12)
        cur = replace(cur, rot_sigma_deg=cur.rot_sigma_deg * scale)
    target_rte = (rte_band[0] + rte_band[1]) / 2.0
    lo, hi = 0.0, max(cur.trans_sigma_frac, 0.05)
    # grow the bracket until RTE overshoots, then bisect
    for _ in range(max_rounds):
        _, _, s = perturb(scene.rig, scene.matches,
                          replace(cur, trans_sigma_frac=hi), freeze)
        if s.mean_rte_deg > target_rte:
            break
        hi *= 2.0
    for _ in range(3 * max_rounds):
        mid = (lo + hi) / 2.0
        cur = replace(cur, trans_sigma_frac=mid)
        _, _, stats = perturb(scene.rig, scene.matches, cur, freeze)
        if rte_band[0] <= stats.mean_rte_deg <= rte_band[1]:
            break
        if stats.mean_rte_deg > target_rte:
            hi = mid
        else:
            lo = mid
    return cur, stats
