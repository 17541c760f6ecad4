"""Joint image/pose augmentation and reduced color-space augmentation.

The geometric augmentation rotates the image about the principal point by
theta degrees and scales it by f_scale, while transforming every annotated
pose so it still matches the warped image: the rotation delta is a
z-axis rotation by theta, applied to both the rotation and the
translation, and scaling divides the depth component by f_scale.  Scaling
keeps the projected silhouette size consistent only at the object center;
the residual off-center error is inherent to this scheme and bounded at
desk depth ranges.

Color operations never touch geometry; they are the detection-style menu
with the geometric transforms removed and channel-wise gaussian noise added,
each with strength linear in m (identity at m=0, documented maximum at
m=30, matching the conventional magnitude scale).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .geometry import CameraIntrinsics, Pose, axis_angle_to_matrix, matrix_to_axis_angle

__all__ = [
    "AugmentParams",
    "AnnotatedFrame",
    "rotation_delta",
    "augment_pose",
    "warp_image",
    "warp_point",
    "augment_frame",
    "color_augment",
    "COLOR_OPS",
]


@dataclass(frozen=True)
class AugmentParams:
    """Sampling ranges of the augmentation: theta in degrees over
    [lo, hi), scale unitless, color n/m integer ranges inclusive."""

    theta_range: tuple[float, float] = (0.0, 360.0)
    scale_range: tuple[float, float] = (0.7, 1.3)
    skip_probability: float = 0.02
    color_n_range: tuple[int, int] = (1, 3)
    color_m_range: tuple[int, int] = (1, 14)

    def __post_init__(self):
        if self.scale_range[0] <= 0:
            raise ValueError("scale range must be positive")
        for lo, hi in (self.theta_range, self.scale_range,
                       self.color_n_range, self.color_m_range):
            if hi < lo:
                raise ValueError("ranges must be non-empty")
        if not 0.0 <= self.skip_probability <= 1.0:
            raise ValueError("skip_probability must be in [0, 1]")


def _check_image(image) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("image must be an (h, w, 3) uint8 array")
    return img


@dataclass(frozen=True)
class AnnotatedFrame:
    """Image plus intrinsics plus ground-truth (model-id, pose) pairs."""

    image: np.ndarray
    intrinsics: CameraIntrinsics
    annotations: tuple[tuple[str, Pose], ...]

    def __post_init__(self):
        object.__setattr__(self, "image", _check_image(self.image))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        for model_id, pose in self.annotations:
            if pose.translation[2] <= 0:
                raise ValueError(
                    f"annotation {model_id!r} has non-positive depth")


def rotation_delta(theta_deg: float) -> np.ndarray:
    """Axis-angle z-rotation matching an in-plane image rotation by theta
    degrees (converted to radians)."""
    return np.array([0.0, 0.0, math.radians(theta_deg)])


def augment_pose(pose: Pose, theta_deg: float, f_scale: float) -> Pose:
    """Transform one pose consistently with the image warp.

    Rotation composes as delta * R; the translation is rotated by the same
    delta and its depth divided by f_scale.  theta 0 mod 360 leaves the
    rotation untouched bit-for-bit (identity shortcut).
    """
    if f_scale <= 0:
        raise ValueError("f_scale must be positive")
    delta_r = rotation_delta(theta_deg)
    if delta_r[2] == 0.0:
        rotation = pose.rotation
        t = pose.translation.copy()
    else:
        delta = axis_angle_to_matrix(delta_r)
        rotation = matrix_to_axis_angle(delta @ axis_angle_to_matrix(pose.rotation))
        t = delta @ pose.translation
    t[2] = t[2] / f_scale
    return Pose(rotation, t)


def _inverse_warp_coeffs(theta_deg: float, f_scale: float,
                         k: CameraIntrinsics) -> np.ndarray:
    """Affine coefficients mapping output pixels back to source pixels for
    the forward warp 'rotate by theta about (px, py), then scale by f'."""
    c = math.cos(math.radians(theta_deg))
    s = math.sin(math.radians(theta_deg))
    a, b = c / f_scale, s / f_scale
    d, e = -s / f_scale, c / f_scale
    return np.array([a, b, k.px - (a * k.px + b * k.py),
                     d, e, k.py - (d * k.px + e * k.py)])


def warp_image(image, theta_deg: float, f_scale: float,
               k: CameraIntrinsics) -> np.ndarray:
    """Rotate and scale the image about the principal point.

    One inverse-mapped affine resample with bilinear interpolation; samples
    falling outside the source are black.  Output size equals input size.
    """
    img = np.ascontiguousarray(_check_image(image))
    coeffs = _inverse_warp_coeffs(theta_deg, f_scale, k)
    return backend.warp_affine_rgb8(img, coeffs)


def warp_point(p, theta_deg: float, f_scale: float,
               k: CameraIntrinsics) -> np.ndarray:
    """Forward 2D map of warp_image applied to pixel coordinates; supports a
    single point or an (n, 2) batch."""
    pts = np.asarray(p, dtype=np.float64)
    c = math.cos(math.radians(theta_deg))
    s = math.sin(math.radians(theta_deg))
    rot = np.array([[c, -s], [s, c]])
    pp = np.array([k.px, k.py])
    return f_scale * (pts - pp) @ rot.T + pp


def augment_frame(frame: AnnotatedFrame, params: AugmentParams,
                  rng: np.random.Generator) -> AnnotatedFrame:
    """Sample one (theta, f_scale) pair and apply it to the image and to
    every annotation; with params.skip_probability the frame is returned
    unchanged.  The rng draw order is fixed: skip, theta, scale."""
    if rng.random() < params.skip_probability:
        return frame
    theta = rng.uniform(*params.theta_range)
    f_scale = rng.uniform(*params.scale_range)
    image = warp_image(frame.image, theta, f_scale, frame.intrinsics)
    annotations = tuple((model_id, augment_pose(pose, theta, f_scale))
                        for model_id, pose in frame.annotations)
    return AnnotatedFrame(image=image, intrinsics=frame.intrinsics,
                          annotations=annotations)


# ------------------------------------------------------------- color ops
#
# Strengths are linear in m: identity at m=0, maximum at m=30.  Gaussian
# noise departs from that scale on purpose: its std is (m/100)*255.

def _to_float(img):
    return img.astype(np.float64)


def _to_u8(arr):
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def _brightness(img, m, rng):
    factor = 1.0 + _signed(rng) * 0.9 * m / 30.0
    return _to_u8(_to_float(img) * factor)


def _contrast(img, m, rng):
    factor = 1.0 + _signed(rng) * 0.9 * m / 30.0
    luma = _to_float(img) @ np.array([0.299, 0.587, 0.114])
    mean = luma.mean()
    return _to_u8(mean + factor * (_to_float(img) - mean))


def _equalize(img, m, rng):
    out = np.empty_like(img)
    for ch in range(3):
        plane = img[:, :, ch]
        hist = np.bincount(plane.ravel(), minlength=256)
        nonzero = np.nonzero(hist)[0]
        if len(nonzero) <= 1:
            out[:, :, ch] = plane
            continue
        cdf = np.cumsum(hist)
        cdf_min = cdf[nonzero[0]]
        lut = np.floor((cdf - cdf_min) / (plane.size - cdf_min) * 255.0 + 0.5)
        out[:, :, ch] = np.clip(lut, 0, 255).astype(np.uint8)[plane]
    alpha = m / 30.0
    return _to_u8((1.0 - alpha) * _to_float(img) + alpha * _to_float(out))


def _posterize(img, m, rng):
    bits = 8 - int(round(4.0 * m / 30.0))
    mask = np.uint8(0xFF & ~((1 << (8 - bits)) - 1))
    return img & mask


def _solarize(img, m, rng):
    threshold = 256.0 - 256.0 * m / 30.0
    return np.where(img >= threshold, 255 - img, img).astype(np.uint8)


def _gaussian_noise(img, m, rng):
    std = (m / 100.0) * 255.0
    noise = rng.normal(0.0, std, size=img.shape)
    return _to_u8(_to_float(img) + noise)


def _signed(rng) -> float:
    return 1.0 if rng.random() < 0.5 else -1.0


COLOR_OPS = (
    ("brightness", _brightness),
    ("contrast", _contrast),
    ("equalize", _equalize),
    ("posterize", _posterize),
    ("solarize", _solarize),
    ("gaussian-noise", _gaussian_noise),
)


def color_augment(image, rng: np.random.Generator,
                  n_range: tuple[int, int] = (1, 3),
                  m_range: tuple[int, int] = (1, 14)) -> np.ndarray:
    """Apply n randomly chosen color transforms at shared strength m.

    n and m are sampled once per call from their inclusive integer ranges;
    ops are drawn with replacement.  Geometry (size, layout) is never
    altered.
    """
    img = _check_image(image).copy()
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    for _ in range(n):
        _, op = COLOR_OPS[int(rng.integers(0, len(COLOR_OPS)))]
        img = op(img, m, rng)
    return img
