"""ADD / ADD-S / ADD(-S) metrics, the diameter-fraction correctness test,
and dataset-level accuracy reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ObjectModel, Pose
from .loss import loss_asym, loss_sym

__all__ = [
    "PoseEstimate",
    "ObjectAccuracy",
    "EvalReport",
    "add_metric",
    "add_s_metric",
    "add_auto",
    "is_correct",
    "evaluate",
]


@dataclass(frozen=True)
class PoseEstimate:
    """One detection: model id, estimated pose, detection confidence."""

    model_id: str
    pose: Pose
    score: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")


def add_metric(gt: Pose, pred: Pose, points) -> float:
    """Average distance of matched model points (mm); shares its
    implementation with the asymmetric transformation loss."""
    return loss_asym(pred, gt, points)


def add_s_metric(gt: Pose, pred: Pose, points) -> float:
    """Average nearest-neighbor distance for symmetric objects (mm)."""
    return loss_sym(pred, gt, points)


def add_auto(gt: Pose, pred: Pose, model: ObjectModel, points=None) -> float:
    """ADD for asymmetric models, ADD-S for symmetric ones."""
    pts = model.points if points is None else points
    if model.symmetric:
        return add_s_metric(gt, pred, pts)
    return add_metric(gt, pred, pts)


def is_correct(distance: float, diameter: float, k: float = 0.1) -> bool:
    """True when the distance is strictly smaller than k times the diameter."""
    if diameter <= 0.0:
        raise ValueError("diameter must be positive")
    return distance < k * diameter


@dataclass
class ObjectAccuracy:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.total if self.total else 0.0


@dataclass
class EvalReport:
    """Per-object correct/total counts plus the mean of per-object accuracies
    (the 'Average' row convention: objects weigh equally, not instances)."""

    per_object: dict[str, ObjectAccuracy] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def average(self) -> float:
        accs = [s.accuracy for s in self.per_object.values()]
        return float(np.mean(accs)) if accs else 0.0

    def format_table(self) -> str:
        width = max([len(k) for k in self.per_object] + [len("Average")])
        lines = [f"{'object':>{width}}  correct  total  accuracy"]
        for name in sorted(self.per_object):
            s = self.per_object[name]
            lines.append(f"{name:>{width}}  {s.correct:7d}  {s.total:5d}  "
                         f"{s.accuracy:7.2f}%")
        lines.append(f"{'Average':>{width}}  {'':7}  {'':5}  {self.average:7.2f}%")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines)

    def format_key_values(self) -> str:
        lines = []
        for name in sorted(self.per_object):
            s = self.per_object[name]
            lines.append(f"object.{name}.correct {s.correct}")
            lines.append(f"object.{name}.total {s.total}")
            lines.append(f"object.{name}.accuracy {s.accuracy:.6f}")
        lines.append(f"average {self.average:.6f}")
        return "\n".join(lines)


def _greedy_match(gt_poses, pred_poses, model):
    """Greedy lowest-distance assignment; returns the matched distances and
    the number of predictions left unmatched."""
    pairs = []
    for i, gt in enumerate(gt_poses):
        for j, pred in enumerate(pred_poses):
            pairs.append((add_auto(gt, pred, model), i, j))
    pairs.sort(key=lambda p: p[0])
    used_gt: set[int] = set()
    used_pred: set[int] = set()
    dists = []
    for d, i, j in pairs:
        if i in used_gt or j in used_pred:
            continue
        used_gt.add(i)
        used_pred.add(j)
        dists.append(d)
    return dists, len(pred_poses) - len(used_pred)


def evaluate(gt_frames, predictions, models: dict[str, ObjectModel]) -> EvalReport:
    """Score predictions against ground-truth frames.

    gt_frames supply .annotations as (model-id, Pose) pairs; predictions is
    one list of PoseEstimate per frame, aligned by index.  Ground truths
    left unmatched count as incorrect; surplus predictions are reported in
    the warnings, never silently dropped.
    """
    if len(gt_frames) != len(predictions):
        raise ValueError("predictions must align one list per ground-truth frame")
    report = EvalReport()
    for frame_idx, (frame, preds) in enumerate(zip(gt_frames, predictions)):
        by_id_gt: dict[str, list[Pose]] = {}
        for model_id, pose in frame.annotations:
            by_id_gt.setdefault(model_id, []).append(pose)
        by_id_pred: dict[str, list[Pose]] = {}
        for est in preds:
            by_id_pred.setdefault(est.model_id, []).append(est.pose)

        for model_id, gt_poses in by_id_gt.items():
            if model_id not in models:
                raise ValueError(f"no model registered for id {model_id!r}")
            model = models[model_id]
            stats = report.per_object.setdefault(model_id, ObjectAccuracy())
            stats.total += len(gt_poses)
            pred_poses = by_id_pred.pop(model_id, [])
            dists, n_extra = _greedy_match(gt_poses, pred_poses, model)
            stats.correct += sum(
                1 for d in dists if is_correct(d, model.diameter))
            if n_extra:
                report.warnings.append(
                    f"frame {frame_idx}: {n_extra} unmatched prediction(s) "
                    f"for {model_id!r}")
        for model_id, leftover in by_id_pred.items():
            report.warnings.append(
                f"frame {frame_idx}: {len(leftover)} prediction(s) for "
                f"{model_id!r} with no ground truth")
    return report
