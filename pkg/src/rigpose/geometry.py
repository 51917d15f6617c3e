"""Core rigid-body types: rotations, poses, camera rigs and Pluecker lines.

Rotations are parameterized by a 3-vector q with rotation angle
2*atan(|q|); the matrix is rational in q and becomes polynomial once the
common denominator 1 + |q|^2 is cleared, which is what the constraint
builder exploits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import NearPiRotation, ZeroTranslation

ROTATION_TOL = 1e-12


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x such that skew(v) @ w == cross(v, w)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def normalized_point(u: float, v: float) -> np.ndarray:
    """Homogeneous image point (u, v, 1) in intrinsics-removed coordinates."""
    return np.array([u, v, 1.0])


def check_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> np.ndarray:
    """Validate orthonormality and det +1; returns R unchanged."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    err = np.linalg.norm(R.T @ R - np.eye(3))
    if err > tol:
        raise ValueError(f"matrix not orthonormal: |R^T R - I| = {err:.3e}")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix has det != +1")
    return R


def cayley_numerator(q: np.ndarray) -> np.ndarray:
    """Numerator matrix of the rational rotation; rotation = this / (1 + |q|^2)."""
    qx, qy, qz = q
    return np.array(
        [
            [1 + qx * qx - qy * qy - qz * qz, 2 * qx * qy - 2 * qz, 2 * qy + 2 * qx * qz],
            [2 * qx * qy + 2 * qz, 1 - qx * qx + qy * qy - qz * qz, 2 * qy * qz - 2 * qx],
            [2 * qx * qz - 2 * qy, 2 * qx + 2 * qy * qz, 1 - qx * qx - qy * qy + qz * qz],
        ]
    )


def cayley_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of the 3-parameter vector q; angle is 2*atan(|q|)."""
    q = np.asarray(q, dtype=float)
    return cayley_numerator(q) / (1.0 + q @ q)


def rotation_to_cayley(R: np.ndarray) -> np.ndarray:
    """Inverse of cayley_to_rotation.

    Raises NearPiRotation when the rotation angle is too close to 180 deg,
    where the parameterization blows up.
    """
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr + 1.0 < 1e-9:
        raise NearPiRotation(f"trace(R) = {tr:.12f} too close to -1")
    # q = (vector part) / (scalar part) of the quaternion; scalar part
    # sqrt(1+tr)/2 is safe away from 180 deg.
    w = 0.5 * np.sqrt(1.0 + tr)
    return np.array(
        [
            R[2, 1] - R[1, 2],
            R[0, 2] - R[2, 0],
            R[1, 0] - R[0, 1],
        ]
    ) / (4.0 * w * w)


def rotation_angle(R: np.ndarray) -> float:
    """Rotation angle in radians, in [0, pi]."""
    c = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.arccos(c))


def quat_to_rotation(q_wxyz) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to rotation matrix."""
    w, x, y, z = np.asarray(q_wxyz, dtype=float) / np.linalg.norm(q_wxyz)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > -0.9:
        w = 0.5 * np.sqrt(max(1.0 + tr, 0.0))
        v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / (4 * w)
        q = np.array([w, *v])
    else:
        # near 180 deg: pick the dominant diagonal axis for stability
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0)) * 2.0
        v = np.zeros(3)
        v[i] = 0.25 * s
        v[j] = (R[j, i] + R[i, j]) / s
        v[k] = (R[k, i] + R[i, k]) / s
        w = (R[k, j] - R[j, k]) / s
        q = np.array([w, *v])
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


@dataclass(frozen=True)
class Pose:
    """Rigid transform X_out = rotation @ X_in + translation (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        check_rotation(self.rotation)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    def compose(self, other: "Pose") -> "Pose":
        """self after other: (self * other)(X) = self(other(X))."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self.rotation @ X + self.translation


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with rig extrinsics (no skew, no distortion)."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # camera-to-rig
    center: np.ndarray  # camera center in rig frame, meters

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        check_rotation(self.rotation)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def normalize(self, px: np.ndarray) -> np.ndarray:
        """Pixel (u, v) to normalized homogeneous (u, v, 1)."""
        return np.array([(px[0] - self.cx) / self.fx, (px[1] - self.cy) / self.fy, 1.0])

    def to_pixels(self, x: np.ndarray) -> np.ndarray:
        """Normalized homogeneous point to pixel (u, v)."""
        return np.array([self.fx * x[0] / x[2] + self.cx, self.fy * x[1] / x[2] + self.cy])

    @property
    def focal_diag(self) -> np.ndarray:
        return np.diag([self.fx, self.fy])


@dataclass(frozen=True)
class CameraRig:
    """Calibrated generalized camera: >=1 rigidly mounted pinhole cameras."""

    cameras: tuple

    def __post_init__(self):
        if len(self.cameras) < 1:
            raise ValueError("rig needs at least one camera")
        object.__setattr__(self, "cameras", tuple(self.cameras))

    def __len__(self):
        return len(self.cameras)

    def __getitem__(self, i) -> Camera:
        return self.cameras[i]

    def affine_to_normalized(self, A_px: np.ndarray, cam_a: int, cam_b: int) -> np.ndarray:
        """Pixel-space 2x2 affine to normalized coordinates.

        The 2x2 linear part only sees the focal scaling, not the
        principal-point shift.
        """
        Sa = self.cameras[cam_a].focal_diag
        Sb_inv = np.diag([1.0 / self.cameras[cam_b].fx, 1.0 / self.cameras[cam_b].fy])
        return Sb_inv @ np.asarray(A_px, dtype=float) @ Sa

    def affine_to_pixels(self, A: np.ndarray, cam_a: int, cam_b: int) -> np.ndarray:
        Sa_inv = np.diag([1.0 / self.cameras[cam_a].fx, 1.0 / self.cameras[cam_a].fy])
        Sb = self.cameras[cam_b].focal_diag
        return Sb @ np.asarray(A, dtype=float) @ Sa_inv


@dataclass(frozen=True)
class PluckerLine:
    """3D line as (unit direction p, moment m) with p . m = 0."""

    p: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise ValueError("direction must be unit length")
        if abs(p @ m) > 1e-12 * max(1.0, np.linalg.norm(m)):
            raise ValueError("moment must be orthogonal to direction")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "m", m)

    def point_at(self, lam: float) -> np.ndarray:
        """Point m x p + lam * p; sweeps the line as lam runs over R."""
        return np.cross(self.m, self.p) + lam * self.p


def plucker_line(rig: CameraRig, cam_index: int, x: np.ndarray) -> PluckerLine:
    """Ray of normalized image point x of camera cam_index, in the rig frame.

    Direction is unit-normalized so the line parameter stays in meters.
    """
    cam = rig[cam_index]
    d = cam.rotation @ np.asarray(x, dtype=float)
    p = d / np.linalg.norm(d)
    m = np.cross(p, cam.center)
    return PluckerLine(p, m)


def translation_from_depth(line: PluckerLine, lam: float) -> np.ndarray:
    """Point on the line at depth lam: m x p + lam * p."""
    return line.point_at(lam)


def relative_camera_pose(
    rig: CameraRig,
    cam_a: int,
    cam_b: int,
    R: np.ndarray,
    t1: np.ndarray,
    t2: np.ndarray,
):
    """Camera-a (view 1) to camera-b (view 2) pose and essential matrix.

    R, t1, t2 parameterize the rig motion through the world anchor: view k
    sees the anchor at translation t_k, view-2 orientation is R. Returns
    (pose, E) with X_b = R' X_a + t' and E = [t']x R'.
    """
    Qa, sa = rig[cam_a].rotation, rig[cam_a].center
    Qb, sb = rig[cam_b].rotation, rig[cam_b].center
    Rp = Qb.T @ R @ Qa
    tp = Qb.T @ (R @ sa - R @ np.asarray(t1, dtype=float) + np.asarray(t2, dtype=float) - sb)
    return Pose(Rp, tp), skew(tp) @ Rp


def rig_relative_pose(R: np.ndarray, t1: np.ndarray, t2: np.ndarray) -> Pose:
    """View-1 to view-2 rig motion from the anchor-frame translations."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    return Pose(R, t2 - np.asarray(R) @ t1)


def pose_essential(rig: CameraRig, pose: Pose, cam_a: int, cam_b: int) -> np.ndarray:
    """Essential matrix between camera cam_a (view 1) and cam_b (view 2)."""
    Qa, sa = rig[cam_a].rotation, rig[cam_a].center
    Qb, sb = rig[cam_b].rotation, rig[cam_b].center
    Rp = Qb.T @ pose.rotation @ Qa
    tp = Qb.T @ (pose.rotation @ sa + pose.translation - sb)
    return skew(tp) @ Rp


def translation_direction_error_deg(t_ref: np.ndarray, t: np.ndarray) -> float:
    """Angle in degrees between two translation vectors."""
    n_ref, n = np.linalg.norm(t_ref), np.linalg.norm(t)
    if n_ref < 1e-12 or n < 1e-12:
        raise ZeroTranslation("direction undefined for near-zero translation")
    c = np.clip((t_ref @ t) / (n_ref * n), -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def load_rig(path) -> CameraRig:
    """Load a rig configuration JSON file."""
    with open(path) as f:
        doc = json.load(f)
    cams = []
    for c in doc["cameras"]:
        cams.append(
            Camera(
                fx=float(c["fx"]),
                fy=float(c["fy"]),
                cx=float(c["cx"]),
                cy=float(c["cy"]),
                rotation=quat_to_rotation(c["q_wxyz"]),
                center=np.asarray(c["s_xyz"], dtype=float),
            )
        )
    return CameraRig(tuple(cams))


def save_rig(rig: CameraRig, path) -> None:
    doc = {
        "cameras": [
            {
                "fx": cam.fx,
                "fy": cam.fy,
                "cx": cam.cx,
                "cy": cam.cy,
                "q_wxyz": rotation_to_quat(cam.rotation).tolist(),
                "s_xyz": cam.center.tolist(),
            }
            for cam in rig.cameras
        ]
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
