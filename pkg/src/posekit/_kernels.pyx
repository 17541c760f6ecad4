# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Rodrigues rotation, transform-loss values and gradients,
brute-force nearest-neighbor matching, pairwise diameter, bilinear warping.

Mirrors posekit._kernels_np exactly; that module is the reference for the
semantics and the fallback when this extension is not built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, floor, sin, sqrt

cnp.import_array()

NAME = "compiled"

cdef double SMALL_ANGLE = 1e-8


cdef inline void _coeffs(double theta, double* a, double* b, double* c) noexcept nogil:
    cdef double t2
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        a[0] = 1.0 - t2 / 6.0
        b[0] = 0.5 - t2 / 24.0
        c[0] = 1.0 - t2 / 2.0
    else:
        a[0] = sin(theta) / theta
        b[0] = (1.0 - cos(theta)) / (theta * theta)
        c[0] = cos(theta)


cdef inline void _rotate_one(const double* r, double a, double b, double c,
                             const double* x, double* out) noexcept nogil:
    cdef double cx0 = r[1] * x[2] - r[2] * x[1]
    cdef double cx1 = r[2] * x[0] - r[0] * x[2]
    cdef double cx2 = r[0] * x[1] - r[1] * x[0]
    cdef double s = r[0] * x[0] + r[1] * x[1] + r[2] * x[2]
    out[0] = c * x[0] + a * cx0 + b * s * r[0]
    out[1] = c * x[1] + a * cx1 + b * s * r[1]
    out[2] = c * x[2] + a * cx2 + b * s * r[2]


def rotate_points(const double[::1] r, const double[:, ::1] pts):
    cdef Py_ssize_t n = pts.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double theta = sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    cdef double a, b, c
    cdef Py_ssize_t i
    _coeffs(theta, &a, &b, &c)
    with nogil:
        for i in range(n):
            _rotate_one(&r[0], a, b, c, &pts[i, 0], &ov[i, 0])
    return out


def transform_points(const double[::1] r, const double[::1] t, const double[:, ::1] pts):
    cdef cnp.ndarray[double, ndim=2] out = rotate_points(r, pts)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(ov.shape[0]):
            ov[i, 0] += t[0]
            ov[i, 1] += t[1]
            ov[i, 2] += t[2]
    return out


def asym_loss(const double[::1] r_pred, const double[::1] t_pred,
              const double[::1] r_gt, const double[::1] t_gt,
              const double[:, ::1] pts):
    cdef Py_ssize_t n = pts.shape[0]
    cdef double ap, bp, cp, ag, bg, cg
    cdef double pp[3]
    cdef double pg[3]
    cdef double d0, d1, d2, total = 0.0
    cdef Py_ssize_t i
    _coeffs(sqrt(r_pred[0] ** 2 + r_pred[1] ** 2 + r_pred[2] ** 2), &ap, &bp, &cp)
    _coeffs(sqrt(r_gt[0] ** 2 + r_gt[1] ** 2 + r_gt[2] ** 2), &ag, &bg, &cg)
    with nogil:
        for i in range(n):
            _rotate_one(&r_pred[0], ap, bp, cp, &pts[i, 0], pp)
            _rotate_one(&r_gt[0], ag, bg, cg, &pts[i, 0], pg)
            d0 = (pp[0] + t_pred[0]) - (pg[0] + t_gt[0])
            d1 = (pp[1] + t_pred[1]) - (pg[1] + t_gt[1])
            d2 = (pp[2] + t_pred[2]) - (pg[2] + t_gt[2])
            total += sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    return total / n


cdef inline void _jac_tu_accum(const double* r, double theta,
                               double a, double b, double c,
                               const double* x, const double* u,
                               double* acc) noexcept nogil:
    # Accumulates J(r, x)^T u; J = d Rot(r, x) / d r (see numpy reference).
    cdef double ru, s, xu, cu, coef
    cdef double cxu0, cxu1, cxu2, crx0, crx1, crx2
    cxu0 = x[1] * u[2] - x[2] * u[1]
    cxu1 = x[2] * u[0] - x[0] * u[2]
    cxu2 = x[0] * u[1] - x[1] * u[0]
    s = r[0] * x[0] + r[1] * x[1] + r[2] * x[2]
    ru = r[0] * u[0] + r[1] * u[1] + r[2] * u[2]
    acc[0] += a * cxu0 + b * (ru * x[0] + s * u[0])
    acc[1] += a * cxu1 + b * (ru * x[1] + s * u[1])
    acc[2] += a * cxu2 + b * (ru * x[2] + s * u[2])
    if theta >= SMALL_ANGLE:
        xu = x[0] * u[0] + x[1] * u[1] + x[2] * u[2]
        crx0 = r[1] * x[2] - r[2] * x[1]
        crx1 = r[2] * x[0] - r[0] * x[2]
        crx2 = r[0] * x[1] - r[1] * x[0]
        cu = crx0 * u[0] + crx1 * u[1] + crx2 * u[2]
        coef = (-sin(theta) * xu + ((c - a) / theta) * cu
                + ((a - 2.0 * b) / theta) * s * ru) / theta
        acc[0] += coef * r[0]
        acc[1] += coef * r[1]
        acc[2] += coef * r[2]


def asym_loss_grad(const double[::1] r_pred, const double[::1] t_pred,
                   const double[::1] r_gt, const double[::1] t_gt,
                   const double[:, ::1] pts):
    cdef Py_ssize_t n = pts.shape[0]
    cdef double theta = sqrt(r_pred[0] ** 2 + r_pred[1] ** 2 + r_pred[2] ** 2)
    cdef double ap, bp, cp, ag, bg, cg
    cdef double pp[3]
    cdef double pg[3]
    cdef double e[3]
    cdef double u[3]
    cdef double gr[3]
    cdef double gt_[3]
    cdef double d, total = 0.0
    cdef Py_ssize_t i
    _coeffs(theta, &ap, &bp, &cp)
    _coeffs(sqrt(r_gt[0] ** 2 + r_gt[1] ** 2 + r_gt[2] ** 2), &ag, &bg, &cg)
    gr[0] = gr[1] = gr[2] = 0.0
    gt_[0] = gt_[1] = gt_[2] = 0.0
    with nogil:
        for i in range(n):
            _rotate_one(&r_pred[0], ap, bp, cp, &pts[i, 0], pp)
            _rotate_one(&r_gt[0], ag, bg, cg, &pts[i, 0], pg)
            e[0] = (pp[0] + t_pred[0]) - (pg[0] + t_gt[0])
            e[1] = (pp[1] + t_pred[1]) - (pg[1] + t_gt[1])
            e[2] = (pp[2] + t_pred[2]) - (pg[2] + t_gt[2])
            d = sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
            total += d
            if d > 0.0:
                u[0] = e[0] / d
                u[1] = e[1] / d
                u[2] = e[2] / d
                gt_[0] += u[0]
                gt_[1] += u[1]
                gt_[2] += u[2]
                _jac_tu_accum(&r_pred[0], theta, ap, bp, cp, &pts[i, 0], u, gr)
    d_r = np.array([gr[0] / n, gr[1] / n, gr[2] / n])
    d_t = np.array([gt_[0] / n, gt_[1] / n, gt_[2] / n])
    return total / n, d_r, d_t


def sym_loss(const double[::1] r_pred, const double[::1] t_pred,
             const double[::1] r_gt, const double[::1] t_gt,
             const double[:, ::1] pts):
    cdef cnp.ndarray[double, ndim=2] pred = transform_points(r_pred, t_pred, pts)
    cdef cnp.ndarray[double, ndim=2] gt = transform_points(r_gt, t_gt, pts)
    cdef double[:, ::1] pv = pred
    cdef double[:, ::1] gv = gt
    cdef Py_ssize_t n = pv.shape[0], i, j
    cdef double d0, d1, d2, d2sum, best, total = 0.0
    with nogil:
        for i in range(n):
            best = -1.0
            for j in range(n):
                d0 = pv[i, 0] - gv[j, 0]
                d1 = pv[i, 1] - gv[j, 1]
                d2 = pv[i, 2] - gv[j, 2]
                d2sum = d0 * d0 + d1 * d1 + d2 * d2
                if best < 0.0 or d2sum < best:
                    best = d2sum
            total += sqrt(best)
    return total / n


def sym_loss_grad(const double[::1] r_pred, const double[::1] t_pred,
                  const double[::1] r_gt, const double[::1] t_gt,
                  const double[:, ::1] pts):
    cdef cnp.ndarray[double, ndim=2] pred = transform_points(r_pred, t_pred, pts)
    cdef cnp.ndarray[double, ndim=2] gt = transform_points(r_gt, t_gt, pts)
    cdef double[:, ::1] pv = pred
    cdef double[:, ::1] gv = gt
    cdef Py_ssize_t n = pv.shape[0], i, j, jbest
    cdef double theta = sqrt(r_pred[0] ** 2 + r_pred[1] ** 2 + r_pred[2] ** 2)
    cdef double ap, bp, cp
    cdef double e[3]
    cdef double u[3]
    cdef double gr[3]
    cdef double gt_[3]
    cdef double d0, d1, d2, d2sum, best, d, total = 0.0
    _coeffs(theta, &ap, &bp, &cp)
    gr[0] = gr[1] = gr[2] = 0.0
    gt_[0] = gt_[1] = gt_[2] = 0.0
    with nogil:
        for i in range(n):
            best = -1.0
            jbest = 0
            for j in range(n):
                d0 = pv[i, 0] - gv[j, 0]
                d1 = pv[i, 1] - gv[j, 1]
                d2 = pv[i, 2] - gv[j, 2]
                d2sum = d0 * d0 + d1 * d1 + d2 * d2
                if best < 0.0 or d2sum < best:
                    best = d2sum
                    jbest = j
            e[0] = pv[i, 0] - gv[jbest, 0]
            e[1] = pv[i, 1] - gv[jbest, 1]
            e[2] = pv[i, 2] - gv[jbest, 2]
            d = sqrt(best)
            total += d
            if d > 0.0:
                u[0] = e[0] / d
                u[1] = e[1] / d
                u[2] = e[2] / d
                gt_[0] += u[0]
                gt_[1] += u[1]
                gt_[2] += u[2]
                _jac_tu_accum(&r_pred[0], theta, ap, bp, cp, &pts[i, 0], u, gr)
    d_r = np.array([gr[0] / n, gr[1] / n, gr[2] / n])
    d_t = np.array([gt_[0] / n, gt_[1] / n, gt_[2] / n])
    return total / n, d_r, d_t


def max_pairwise_distance(const double[:, ::1] pts):
    cdef Py_ssize_t n = pts.shape[0], i, j
    cdef double d0, d1, d2, d2sum, best = 0.0
    if n < 2:
        return 0.0
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                d0 = pts[i, 0] - pts[j, 0]
                d1 = pts[i, 1] - pts[j, 1]
                d2 = pts[i, 2] - pts[j, 2]
                d2sum = d0 * d0 + d1 * d1 + d2 * d2
                if d2sum > best:
                    best = d2sum
    return sqrt(best)


def warp_affine_rgb8(const unsigned char[:, :, ::1] src, const double[::1] coeffs):
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=3] out = np.zeros((h, w, 3), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] ov = out
    cdef double a = coeffs[0], b = coeffs[1], c = coeffs[2]
    cdef double d = coeffs[3], e = coeffs[4], f = coeffs[5]
    cdef double sx, sy, fx, fy, w00, w01, w10, w11, acc
    cdef Py_ssize_t x, y, x0, y0, x1, y1, ch
    with nogil:
        for y in range(h):
            for x in range(w):
                sx = a * x + b * y + c
                sy = d * x + e * y + f
                x0 = <Py_ssize_t>floor(sx)
                y0 = <Py_ssize_t>floor(sy)
                fx = sx - x0
                fy = sy - y0
                x1 = x0 + 1
                y1 = y0 + 1
                w00 = (1.0 - fx) * (1.0 - fy)
                w01 = fx * (1.0 - fy)
                w10 = (1.0 - fx) * fy
                w11 = fx * fy
                for ch in range(3):
                    acc = 0.0
                    if 0 <= x0 < w and 0 <= y0 < h:
                        acc += w00 * src[y0, x0, ch]
                    if 0 <= x1 < w and 0 <= y0 < h:
                        acc += w01 * src[y0, x1, ch]
                    if 0 <= x0 < w and 0 <= y1 < h:
                        acc += w10 * src[y1, x0, ch]
                    if 0 <= x1 < w and 0 <= y1 < h:
                        acc += w11 * src[y1, x1, ch]
                    acc = floor(acc + 0.5)
                    if acc < 0.0:
                        acc = 0.0
                    elif acc > 255.0:
                        acc = 255.0
                    ov[y, x, ch] = <unsigned char>acc
    return out
