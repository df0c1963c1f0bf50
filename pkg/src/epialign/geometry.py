"""Rigid-body, camera, and epipolar primitives shared by the whole toolkit.

Conventions
-----------
Extrinsics are world-to-camera: ``X_cam = R @ X_world + t``. The camera
center is ``-R.T @ t`` and the forward (optical) axis expressed in world
coordinates is the third row of ``R``. Pixel coordinates put integer values
at pixel centers. All math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateBaseline,
    DegenerateEpipolarLine,
    DegenerateRotation6D,
    InvalidDepth,
    RotationInvalid,
)

ROTATION_TOL = 1e-9
PARALLEL_TOL = 1e-12


def _readonly(a: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    out = np.array(a, dtype=np.float64).reshape(shape)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels for an image of size width x height."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}"
            )

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse_matrix(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def scaled_focal(self, log_scale: float) -> "CameraIntrinsics":
        """Intrinsics with both focal lengths multiplied by exp(log_scale)."""
        s = float(np.exp(log_scale))
        return CameraIntrinsics(self.fx * s, self.fy * s, self.cx, self.cy,
                                self.width, self.height)


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid pose (R: 3x3 row-major rotation, t: 3-vector)."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", _readonly(self.R, (3, 3)))
        object.__setattr__(self, "t", _readonly(self.t, (3,)))
        err = np.linalg.norm(self.R.T @ self.R - np.eye(3))
        det = np.linalg.det(self.R)
        if err > ROTATION_TOL or abs(det - 1.0) > ROTATION_TOL:
            raise RotationInvalid(
                f"not a rotation: |R^T R - I|_F = {err:.3e}, det = {det:.12f}"
            )

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -R.T @ t."""
        return -self.R.T @ self.t

    @property
    def forward(self) -> np.ndarray:
        """Optical axis in world coordinates (third row of R)."""
        return self.R[2].copy()

    @staticmethod
    def identity() -> "CameraPose":
        return CameraPose(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class CameraFrame:
    """One camera: a string id plus intrinsics and world-to-camera pose."""

    frame_id: str
    intrinsics: CameraIntrinsics
    pose: CameraPose


@dataclass(frozen=True)
class CameraRig:
    """An ordered collection of camera frames with unique ids."""

    frames: tuple[CameraFrame, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        ids = [f.frame_id for f in self.frames]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate frame ids in rig")

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> CameraFrame:
        return self.frames[i]

    def centers(self) -> np.ndarray:
        """(N, 3) array of camera centers in world coordinates."""
        return np.stack([f.pose.center for f in self.frames])

    def forward_axes(self) -> np.ndarray:
        """(N, 3) array of optical axes in world coordinates."""
        return np.stack([f.pose.forward for f in self.frames])

    def index_by_id(self) -> dict[str, int]:
        return {f.frame_id: i for i, f in enumerate(self.frames)}


@dataclass(frozen=True)
class PoseResidual:
    """Per-camera correction: 6D rotation residual plus translation residual.

    ``dr`` holds two 3-vectors that orthonormalize into a rotation; the
    identity encoding is (1,0,0, 0,1,0). ``dt`` is added to the pose
    translation.
    """

    dr: np.ndarray
    dt: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dr", _readonly(self.dr, (6,)))
        object.__setattr__(self, "dt", _readonly(self.dt, (3,)))

    @staticmethod
    def identity() -> "PoseResidual":
        return PoseResidual(np.array([1.0, 0, 0, 0, 1.0, 0]), np.zeros(3))


@dataclass(frozen=True)
class RelativePose:
    """Relative rotation and translation blocks between two posed cameras."""

    dR: np.ndarray
    dt: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dR", _readonly(self.dR, (3, 3)))
        object.__setattr__(self, "dt", _readonly(self.dt, (3,)))


# ---------------------------------------------------------------------------
# 6D rotation encoding
# ---------------------------------------------------------------------------

def rot6d_decode(dr: np.ndarray) -> np.ndarray:
    """Orthonormalize a 6-vector (two 3-vectors) into a rotation matrix.

    Gram-Schmidt on the two vectors gives the first two columns; the third
    column is their cross product. Raises DegenerateRotation6D when the first
    vector (nearly) vanishes or the two vectors are (nearly) parallel.
    """
    dr = np.asarray(dr, dtype=np.float64).reshape(6)
    a, b = dr[:3], dr[3:]
    na = np.linalg.norm(a)
    if na <= PARALLEL_TOL:
        raise DegenerateRotation6D(f"first column norm {na:.3e} below {PARALLEL_TOL}")
    b1 = a / na
    u = b - (b1 @ b) * b1
    nu = np.linalg.norm(u)
    if nu <= PARALLEL_TOL:
        raise DegenerateRotation6D("columns are parallel; cannot orthonormalize")
    b2 = u / nu
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=1)


def rot6d_encode(R: np.ndarray) -> np.ndarray:
    """First two columns of a rotation matrix as a 6-vector (decode inverse)."""
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    return np.concatenate([R[:, 0], R[:, 1]])


def rot6d_backward(dr: np.ndarray, grad_R: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. the decoded matrix back to the 6-vector.

    Given dL/dR for R = rot6d_decode(dr), returns dL/d(dr). Mirrors the
    Gram-Schmidt forward pass exactly.
    """
    dr = np.asarray(dr, dtype=np.float64).reshape(6)
    a, b = dr[:3], dr[3:]
    na = np.linalg.norm(a)
    b1 = a / na
    u = b - (b1 @ b) * b1
    nu = np.linalg.norm(u)
    b2 = u / nu

    g1 = grad_R[:, 0]
    g2 = grad_R[:, 1]
    g3 = grad_R[:, 2]

    # b3 = b1 x b2: triple-product identities move g3 onto b1 and b2.
    h1 = g1 + np.cross(b2, g3)
    h2 = g2 + np.cross(g3, b1)
    # b2 = u / |u|
    q = (h2 - (h2 @ b2) * b2) / nu
    # u = b - (b1.b) b1
    g_b = q - (q @ b1) * b1
    h1 = h1 - (q @ b1) * b - (b1 @ b) * q
    # b1 = a / |a|
    g_a = (h1 - (h1 @ b1) * b1) / na
    return np.concatenate([g_a, g_b])


# ---------------------------------------------------------------------------
# pose algebra
# ---------------------------------------------------------------------------

def apply_residual(pose: CameraPose, res: PoseResidual) -> CameraPose:
    """Refine a pose with a decoded rotation residual and translation offset.

    R' = dR @ R and t' = t + dt. The identity residual reproduces the pose
    exactly.
    """
    dR = rot6d_decode(res.dr)
    return CameraPose(dR @ pose.R, pose.t + res.dt)


def relative_pose(pose_i: CameraPose, pose_j: CameraPose) -> RelativePose:
    """Relative blocks (Ri^T Rj, Ri^T (tj - ti)) of the pose pair.

    Note the translation block is direction-sensitive: swapping the arguments
    transposes the rotation but does not negate-and-rotate the translation.
    """
    dR = pose_i.R.T @ pose_j.R
    dt = pose_i.R.T @ (pose_j.t - pose_i.t)
    return RelativePose(dR, dt)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ x == cross(v, x)."""
    v = np.asarray(v, dtype=np.float64).reshape(3)
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def rotation_angle_deg(R: np.ndarray) -> float:
    """Rotation angle of a rotation matrix, degrees in [0, 180]."""
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def fundamental_matrix(cam_i: CameraFrame, cam_j: CameraFrame) -> np.ndarray:
    """Fundamental matrix mapping pixels of cam_i to epipolar lines in cam_j.

    Composes the camera-i-to-camera-j motion (R_ij = Rj Ri^T,
    t_ij = tj - R_ij ti), builds Kj^-T [t_ij]x R_ij Ki^-1 and scales the
    result to unit Frobenius norm. The output has rank 2 by construction.
    """
    baseline = np.linalg.norm(cam_j.pose.center - cam_i.pose.center)
    if baseline <= 1e-12:
        raise DegenerateBaseline(f"camera centers coincide (baseline {baseline:.3e})")
    R_ij = cam_j.pose.R @ cam_i.pose.R.T
    t_ij = cam_j.pose.t - R_ij @ cam_i.pose.t
    E = skew(t_ij) @ R_ij
    F = cam_j.intrinsics.inverse_matrix().T @ E @ cam_i.intrinsics.inverse_matrix()
    return F / np.linalg.norm(F)


def epipolar_distance(x: np.ndarray, x_prime: np.ndarray, F: np.ndarray,
                      mode: str = "geometric") -> float:
    """Epipolar residual of a correspondence (x in image i, x' in image j).

    ``algebraic`` returns |x'^T F x| with homogeneous pixels; ``geometric``
    divides by the epipolar-line normal, i.e. the point-to-line distance in
    pixels of image j.
    """
    x = np.asarray(x, dtype=np.float64).reshape(2)
    xp = np.asarray(x_prime, dtype=np.float64).reshape(2)
    xh = np.array([x[0], x[1], 1.0])
    xph = np.array([xp[0], xp[1], 1.0])
    line = F @ xh
    s = xph @ line
    if mode == "algebraic":
        return float(abs(s))
    if mode != "geometric":
        raise ValueError(f"unknown mode {mode!r}")
    n = float(np.hypot(line[0], line[1]))
    if n < 1e-12:
        raise DegenerateEpipolarLine(f"epipolar line normal {n:.3e} below 1e-12")
    return float(abs(s) / n)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def project(point_world: np.ndarray, cam: CameraFrame) -> tuple[np.ndarray, float]:
    """Project a world point; returns ((u, v), camera-space depth)."""
    p = np.asarray(point_world, dtype=np.float64).reshape(3)
    x_cam = cam.pose.R @ p + cam.pose.t
    z = float(x_cam[2])
    k = cam.intrinsics
    uv = np.array([k.fx * x_cam[0] / z + k.cx, k.fy * x_cam[1] / z + k.cy])
    return uv, z


def unproject(pixel: np.ndarray, depth: float, cam: CameraFrame) -> np.ndarray:
    """Lift a pixel at a known depth back to a world point."""
    if not np.isfinite(depth) or depth <= 0:
        raise InvalidDepth(f"depth must be positive and finite, got {depth}")
    pixel = np.asarray(pixel, dtype=np.float64).reshape(2)
    ray = cam.intrinsics.inverse_matrix() @ np.array([pixel[0], pixel[1], 1.0])
    x_cam = depth * ray
    return cam.pose.R.T @ (x_cam - cam.pose.t)


# ---------------------------------------------------------------------------
# quaternion helpers (COLMAP export uses w-first quaternions)
# ---------------------------------------------------------------------------

def rotmat_to_quat_wxyz(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    tr = np.trace(R)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([(R[2, 1] - R[1, 2]) / s,
                      0.25 * s,
                      (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array([(R[0, 2] - R[2, 0]) / s,
                      (R[0, 1] + R[1, 0]) / s,
                      0.25 * s,
                      (R[1, 2] + R[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array([(R[1, 0] - R[0, 1]) / s,
                      (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s,
                      0.25 * s])
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def quat_wxyz_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to rotation matrix."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
