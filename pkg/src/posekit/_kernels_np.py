"""Numpy implementations of the hot numeric kernels.

Same call surface as the compiled extension (posekit._kernels); the backend
module picks whichever is available at import time.  All functions expect
C-contiguous float64 input (uint8 for images) and are pure.
"""

import numpy as np

NAME = "python"

# Below this rotation angle the sin/cos ratios switch to their second-order
# Taylor expansions to avoid dividing by a vanishing angle.
SMALL_ANGLE = 1e-8


def _rot_coeffs(theta: float) -> tuple[float, float, float]:
    """Coefficients (A, B, C) with Rot(r, x) = C*x + A*(r × x) + B*(r·x)*r."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 - t2 / 2.0
    s, c = np.sin(theta), np.cos(theta)
    return s / theta, (1.0 - c) / (theta * theta), c


def _dot_rows(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    # elementwise instead of BLAS dot: keeps results bit-identical across
    # batch sizes (and with the compiled kernel's per-row arithmetic)
    return pts[:, 0] * v[0] + pts[:, 1] * v[1] + pts[:, 2] * v[2]


def rotate_points(r: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Rotate (n, 3) points by the axis-angle vector r (radians * unit axis)."""
    theta = float(np.linalg.norm(r))
    a, b, c = _rot_coeffs(theta)
    return c * pts + a * np.cross(r, pts) + b * _dot_rows(pts, r)[:, None] * r


def transform_points(r: np.ndarray, t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return rotate_points(r, pts) + t


def asym_loss(
    r_pred: np.ndarray,
    t_pred: np.ndarray,
    r_gt: np.ndarray,
    t_gt: np.ndarray,
    pts: np.ndarray,
) -> float:
    """Mean distance between matching points under the two rigid transforms."""
    diff = transform_points(r_pred, t_pred, pts) - transform_points(r_gt, t_gt, pts)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def sym_loss(
    r_pred: np.ndarray,
    t_pred: np.ndarray,
    r_gt: np.ndarray,
    t_gt: np.ndarray,
    pts: np.ndarray,
) -> float:
    """Mean nearest-neighbor distance from predicted-transformed points to
    ground-truth-transformed points (symmetric-object matching)."""
    pred = transform_points(r_pred, t_pred, pts)
    gt = transform_points(r_gt, t_gt, pts)
    d2 = ((pred[:, None, :] - gt[None, :, :]) ** 2).sum(axis=2)
    return float(np.mean(np.sqrt(d2.min(axis=1))))


def _rot_jacobian_tu(r: np.ndarray, pts: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-point J(r, x)^T u where J = d Rot(r, x) / d r, vectorized over rows.

    Derived from Rot = C x + A (r × x) + B (r·x) r by the chain rule through
    theta = |r|; the small-angle limit is J^T u = x × u.
    """
    theta = float(np.linalg.norm(r))
    a, b, c = _rot_coeffs(theta)
    s = _dot_rows(pts, r)
    ru = _dot_rows(u, r)
    xu = np.einsum("ij,ij->i", pts, u)
    base = a * np.cross(pts, u) + b * (ru[:, None] * pts + s[:, None] * u)
    if theta < SMALL_ANGLE:
        return base
    k = r / theta
    cu = np.einsum("ij,ij->i", np.cross(r, pts), u)
    sin_t = np.sin(theta)
    coef = -sin_t * xu + ((c - a) / theta) * cu + ((a - 2.0 * b) / theta) * s * ru
    return base + coef[:, None] * k


def _grad_from_residuals(
    r_pred: np.ndarray, pts: np.ndarray, diff: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    d = np.linalg.norm(diff, axis=1)
    u = np.zeros_like(diff)
    nz = d > 0.0
    u[nz] = diff[nz] / d[nz, None]
    d_r = _rot_jacobian_tu(r_pred, pts, u).mean(axis=0)
    d_t = u.mean(axis=0)
    return float(d.mean()), d_r, d_t


def asym_loss_grad(
    r_pred: np.ndarray,
    t_pred: np.ndarray,
    r_gt: np.ndarray,
    t_gt: np.ndarray,
    pts: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """asym_loss plus its gradient with respect to (r_pred, t_pred).

    Points with zero residual contribute a zero subgradient.
    """
    diff = transform_points(r_pred, t_pred, pts) - transform_points(r_gt, t_gt, pts)
    return _grad_from_residuals(r_pred, pts, diff)


def sym_loss_grad(
    r_pred: np.ndarray,
    t_pred: np.ndarray,
    r_gt: np.ndarray,
    t_gt: np.ndarray,
    pts: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """sym_loss plus its gradient, with the nearest-neighbor match frozen at
    the current pose (subgradient of the min-composition)."""
    pred = transform_points(r_pred, t_pred, pts)
    gt = transform_points(r_gt, t_gt, pts)
    d2 = ((pred[:, None, :] - gt[None, :, :]) ** 2).sum(axis=2)
    diff = pred - gt[d2.argmin(axis=1)]
    return _grad_from_residuals(r_pred, pts, diff)


def max_pairwise_distance(pts: np.ndarray) -> float:
    """Exact maximum pairwise distance, chunked to bound peak memory."""
    n = len(pts)
    if n < 2:
        return 0.0
    best = 0.0
    chunk = 512
    sq = (pts * pts).sum(axis=1)
    for i in range(0, n, chunk):
        block = pts[i : i + chunk]
        d2 = sq[i : i + chunk, None] + sq[None, :] - 2.0 * (block @ pts.T)
        best = max(best, float(d2.max()))
    return float(np.sqrt(max(best, 0.0)))


def warp_affine_rgb8(src: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Inverse-mapped affine warp of an RGB uint8 image, bilinear sampling.

    coeffs = (a, b, c, d, e, f): output pixel (x, y) samples the source at
    (a*x + b*y + c, d*x + e*y + f).  Samples outside the source are black.
    Channel values round as floor(v + 0.5) to match the compiled kernel.
    """
    h, w = src.shape[:2]
    a, b, c, d, e, f = (float(v) for v in coeffs)
    ys, xs = np.mgrid[0:h, 0:w]
    sx = a * xs + b * ys + c
    sy = d * xs + e * ys + f
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    acc = np.zeros((h, w, 3), dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xi_c = np.clip(xi, 0, w - 1)
            yi_c = np.clip(yi, 0, h - 1)
            sample = src[yi_c, xi_c].astype(np.float64)
            acc += (wgt * inside)[:, :, None] * sample
    out = np.floor(acc + 0.5)
    return np.clip(out, 0.0, 255.0).astype(np.uint8)
