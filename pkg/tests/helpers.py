"""Shared fixtures and oracles for the test suite."""

import numpy as np

from epialign.geometry import CameraFrame, CameraIntrinsics, CameraPose, CameraRig


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def random_pose(rng: np.random.Generator, t_scale: float = 2.0) -> CameraPose:
    return CameraPose(random_rotation(rng), rng.normal(0.0, t_scale, size=3))


def make_frame(frame_id: str, pose: CameraPose, fx: float = 400.0,
               width: int = 640, height: int = 480) -> CameraFrame:
    intr = CameraIntrinsics(fx, fx, (width - 1) / 2.0, (height - 1) / 2.0,
                            width, height)
    return CameraFrame(frame_id, intr, pose)


def random_rig(rng: np.random.Generator, n: int) -> CameraRig:
    return CameraRig(tuple(
        make_frame(f"f{i}", random_pose(rng)) for i in range(n)
    ))


def fd_gradient(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function over a flat array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = g.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        xp = xf.copy()
        xm = xf.copy()
        xp[i] += h
        xm[i] -= h
        flat[i] = (fn(xp.reshape(x.shape)) - fn(xm.reshape(x.shape))) / (2 * h)
    return g
