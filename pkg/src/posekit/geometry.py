"""Axis-angle rotation algebra, the pinhole camera, and translation recovery.

Conventions used across the package:

* rotations are axis-angle 3-vectors (direction = axis, magnitude = angle in
  radians); the zero vector is the identity, canonical magnitude is in [0, pi]
* translations and model points are in millimeters, camera frame, z forward
* pixel coordinates put the center of pixel (row i, col j) at (x=j, y=i)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backend

__all__ = [
    "Pose",
    "CameraIntrinsics",
    "IntrinsicsVector",
    "ObjectModel",
    "rodrigues_rotate",
    "axis_angle_to_matrix",
    "matrix_to_axis_angle",
    "transform_points",
    "project",
    "recover_translation",
    "load_object_model",
    "save_object_model",
]


def _as_vec3(v, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Pose:
    """Rigid transform from object frame to camera frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_vec3(self.rotation, "rotation"))
        object.__setattr__(self, "translation", _as_vec3(self.translation, "translation"))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters, all in pixels."""

    fx: float
    fy: float
    px: float
    py: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class IntrinsicsVector:
    """Pinhole parameters extended with the translation and image scales.

    s_image is the factor from original resolution to network-input
    resolution; s_translation rescales the recovered translation (e.g. mm
    to m).
    """

    fx: float
    fy: float
    px: float
    py: float
    s_translation: float = 1.0
    s_image: float = 1.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.s_translation <= 0 or self.s_image <= 0:
            raise ValueError("scale factors must be positive")

    @staticmethod
    def from_camera(k: CameraIntrinsics, s_translation: float = 1.0,
                    s_image: float = 1.0) -> "IntrinsicsVector":
        return IntrinsicsVector(k.fx, k.fy, k.px, k.py, s_translation, s_image)

    def camera(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, self.px, self.py)

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.px, self.py,
                         self.s_translation, self.s_image])


@dataclass(frozen=True)
class ObjectModel:
    """3D point set with its diameter and symmetry flag.

    The diameter is the exact maximum pairwise point distance; it is computed
    on construction unless supplied.
    """

    id: str
    points: np.ndarray
    symmetric: bool = False
    diameter: float = field(default=0.0)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ValueError("points must be a non-empty (n, 3) array")
        object.__setattr__(self, "points", pts)
        if self.diameter <= 0.0:
            object.__setattr__(self, "diameter",
                               float(backend.max_pairwise_distance(pts)))


def rodrigues_rotate(r, x) -> np.ndarray:
    """Rotate x by the axis-angle vector r using the closed-form rotation.

    x may be a single 3-vector or an (n, 3) batch; the result matches the
    input shape.  The zero vector rotates nothing.
    """
    rv = _as_vec3(r, "r")
    arr = np.ascontiguousarray(x, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr.reshape(1, 3) if single else arr
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"x must be a 3-vector or (n, 3) array, got {arr.shape}")
    out = backend.rotate_points(rv, pts)
    return out[0] if single else out


def transform_points(pose: Pose, pts) -> np.ndarray:
    """Apply the rigid transform (rotate, then translate) to (n, 3) points."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    return backend.transform_points(pose.rotation, pose.translation, pts)


def axis_angle_to_matrix(r) -> np.ndarray:
    """3x3 rotation matrix of the axis-angle vector r."""
    rv = _as_vec3(r, "r")
    theta = float(np.linalg.norm(rv))
    if theta < 1e-8:
        # second-order Taylor of sin(t)/t and (1-cos(t))/t^2
        t2 = theta * theta
        a, b, c = 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 - t2 / 2.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
        c = math.cos(theta)
    skew = np.array([
        [0.0, -rv[2], rv[1]],
        [rv[2], 0.0, -rv[0]],
        [-rv[1], rv[0], 0.0],
    ])
    return c * np.eye(3) + a * skew + b * np.outer(rv, rv)


def matrix_to_axis_angle(mat, tol: float = 1e-6) -> np.ndarray:
    """Canonical axis-angle vector (magnitude in [0, pi]) of a rotation matrix.

    Raises ValueError if the input is not orthonormal with determinant +1
    within tol.  Near a half-turn the axis comes from the symmetric part of
    the matrix, oriented by the (small) skew part when it is nonzero and by
    making the first nonzero component positive when it vanishes exactly.
    """
    rot = np.asarray(mat, dtype=np.float64)
    if rot.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {rot.shape}")
    if np.abs(rot @ rot.T - np.eye(3)).max() > tol or np.linalg.det(rot) < 0.0:
        raise ValueError("matrix is not orthonormal with determinant +1")

    skew = np.array([rot[2, 1] - rot[1, 2],
                     rot[0, 2] - rot[2, 0],
                     rot[1, 0] - rot[0, 1]])
    sin_t = 0.5 * float(np.linalg.norm(skew))
    cos_t = 0.5 * (float(np.trace(rot)) - 1.0)
    theta = math.atan2(sin_t, cos_t)

    if theta < 1e-4:
        # theta/(2 sin theta) ~ 1/2 (1 + theta^2/6)
        return 0.5 * (1.0 + theta * theta / 6.0) * skew
    if theta < math.pi - 1e-3:
        return (theta / (2.0 * sin_t)) * skew

    # Near pi the skew part degenerates; (R + R^T)/2 - cos(theta) I equals
    # (1 - cos(theta)) * axis axis^T, which stays well conditioned.
    outer = ((rot + rot.T) * 0.5 - cos_t * np.eye(3)) / (1.0 - cos_t)
    i = int(np.argmax(np.diag(outer)))
    axis = outer[:, i] / math.sqrt(outer[i, i])
    orient = float(axis @ skew)
    if abs(orient) > 1e-12:
        if orient < 0.0:
            axis = -axis
    else:
        for comp in axis:
            if comp != 0.0:
                if comp < 0.0:
                    axis = -axis
                break
    return theta * axis


def project(k: CameraIntrinsics, x_cam) -> np.ndarray:
    """Pinhole projection of camera-frame points to pixel coordinates.

    Accepts a single 3-vector or an (n, 3) batch; rejects any point with
    z <= 0 (behind or on the camera plane).
    """
    arr = np.asarray(x_cam, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr.reshape(1, 3) if single else arr
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"x_cam must be a 3-vector or (n, 3) array, got {arr.shape}")
    z = pts[:, 2]
    if np.any(z <= 0.0):
        raise ValueError("cannot project a point with z <= 0")
    out = np.empty((len(pts), 2))
    out[:, 0] = k.fx * pts[:, 0] / z + k.px
    out[:, 1] = k.fy * pts[:, 1] / z + k.py
    return out[0] if single else out


def recover_translation(c, t_z: float, a: IntrinsicsVector) -> np.ndarray:
    """Full translation from a projected center point and its depth.

    c is the center in network-input resolution; it is mapped back to the
    original resolution with a.s_image before the pinhole inversion, and the
    result is scaled by a.s_translation.
    """
    if t_z <= 0.0:
        raise ValueError("t_z must be positive")
    cx, cy = (float(v) for v in np.asarray(c, dtype=np.float64).reshape(2))
    cx /= a.s_image
    cy /= a.s_image
    t = np.array([
        (cx - a.px) * t_z / a.fx,
        (cy - a.py) * t_z / a.fy,
        t_z,
    ])
    return t * a.s_translation


def load_object_model(path) -> ObjectModel:
    """Read the line-oriented model format; the diameter is recomputed."""
    lines = Path(path).read_text().splitlines()
    rows = [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty model file")
    head = rows[0].split()
    if len(head) != 3 or head[0] != "model" or not head[2].startswith("symmetric="):
        raise ValueError(f"{path}: bad header {rows[0]!r}")
    symmetric = head[2] == "symmetric=1"
    pts = np.array([[float(v) for v in ln.split()] for ln in rows[1:]])
    if pts.size == 0:
        raise ValueError(f"{path}: model has no points")
    return ObjectModel(id=head[1], points=pts, symmetric=symmetric)


def save_object_model(model: ObjectModel, path) -> None:
    out = [f"model {model.id} symmetric={1 if model.symmetric else 0}"]
    out.extend(f"{float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in model.points)
    Path(path).write_text("\n".join(out) + "\n")
