"""Transformation loss on matched or nearest-neighbor point sets, with
analytic gradients and the weighted total training loss.

The asymmetric loss is the mean distance between the model point set
transformed by the estimated pose and by the ground-truth pose; the
symmetric variant matches each estimated point to its nearest ground-truth
point instead, so indistinguishable orientations are not penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .geometry import ObjectModel, Pose

__all__ = [
    "LossWeights",
    "LossGrad",
    "sample_model_points",
    "loss_asym",
    "loss_sym",
    "loss_trans",
    "loss_trans_grad",
    "combined_loss",
]


@dataclass(frozen=True)
class LossWeights:
    """Weights of the classification, box, and transformation terms."""

    lambda_class: float = 1.0
    lambda_bbox: float = 1.0
    lambda_trans: float = 0.02

    def __post_init__(self):
        if min(self.lambda_class, self.lambda_bbox, self.lambda_trans) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class LossGrad:
    """Gradient of the transformation loss wrt the estimated pose."""

    d_r: np.ndarray
    d_t: np.ndarray


def _check_points(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("points must be a non-empty (n, 3) array")
    return pts


def sample_model_points(model: ObjectModel, m: int, seed: int = 0) -> np.ndarray:
    """Deterministic subsample of up to m model points, without replacement.

    Models with at most m points are returned whole, in their original
    order; the same seed always yields the same subset.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    pts = model.points
    if len(pts) <= m:
        return pts.copy()
    idx = np.random.default_rng(seed).choice(len(pts), size=m, replace=False)
    return np.ascontiguousarray(pts[idx])


def loss_asym(pred: Pose, gt: Pose, points) -> float:
    """Mean matched-point distance (mm) between the two transforms."""
    pts = _check_points(points)
    return backend.asym_loss(pred.rotation, pred.translation,
                             gt.rotation, gt.translation, pts)


def loss_sym(pred: Pose, gt: Pose, points) -> float:
    """Mean nearest-neighbor distance (mm) from predicted-transformed points
    to ground-truth-transformed points."""
    pts = _check_points(points)
    return backend.sym_loss(pred.rotation, pred.translation,
                            gt.rotation, gt.translation, pts)


def loss_trans(pred: Pose, gt: Pose, model: ObjectModel, points=None) -> float:
    """Symmetry-aware dispatch: loss_sym for symmetric models, else loss_asym."""
    pts = model.points if points is None else points
    if model.symmetric:
        return loss_sym(pred, gt, pts)
    return loss_asym(pred, gt, pts)


def loss_trans_grad(pred: Pose, gt: Pose, model: ObjectModel,
                    points=None) -> tuple[float, LossGrad]:
    """loss_trans value plus its analytic gradient wrt the estimated pose.

    For symmetric models the nearest-neighbor assignment is held fixed at
    the current pose, giving a subgradient of the min-composition; points
    with zero residual contribute zero.
    """
    pts = _check_points(model.points if points is None else points)
    fn = backend.sym_loss_grad if model.symmetric else backend.asym_loss_grad
    value, d_r, d_t = fn(pred.rotation, pred.translation,
                         gt.rotation, gt.translation, pts)
    return value, LossGrad(d_r=d_r, d_t=d_t)


def combined_loss(l_class: float, l_bbox: float, l_trans: float,
                  w: LossWeights = LossWeights()) -> float:
    """Weighted sum of the three loss terms; the classification and box
    terms are opaque scalars supplied by the detection side."""
    return (w.lambda_class * l_class + w.lambda_bbox * l_bbox
            + w.lambda_trans * l_trans)
