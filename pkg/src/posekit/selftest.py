"""Self-contained oracle suites for the CLI selftest command.

Each suite re-derives its expected values independently of the code under
test (explicit matrix construction, central finite differences, projection
consistency, quadratic suppression) so a passing run certifies the build
without the test tree installed.
"""

from __future__ import annotations

import math

import numpy as np

from .augment import augment_pose, warp_point
from .geometry import (
    CameraIntrinsics,
    ObjectModel,
    Pose,
    axis_angle_to_matrix,
    matrix_to_axis_angle,
    project,
    rodrigues_rotate,
)
from .head import Detection, nms
from .loss import loss_trans, loss_trans_grad

__all__ = ["SUITES", "run_suites"]


def _unit_axis_matrix(axis, angle):
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return (math.cos(angle) * np.eye(3) + math.sin(angle) * kx
            + (1 - math.cos(angle)) * np.outer(k, k))


def _random_rotation_vec(rng, max_angle=math.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return axis * rng.uniform(0.0, max_angle)


def suite_rodrigues_roundtrip(rng) -> tuple[bool, str]:
    worst_vec = 0.0
    worst_mat = 0.0
    for _ in range(300):
        r = _random_rotation_vec(rng)
        x = rng.uniform(-100, 100, size=3)
        axis = r / np.linalg.norm(r)
        expected = _unit_axis_matrix(axis, np.linalg.norm(r)) @ x
        worst_vec = max(worst_vec,
                        float(np.abs(rodrigues_rotate(r, x) - expected).max()))
        m = axis_angle_to_matrix(r)
        m2 = axis_angle_to_matrix(matrix_to_axis_angle(m))
        worst_mat = max(worst_mat, float(np.linalg.norm(m2 - m)))
    ok = worst_vec < 1e-10 and worst_mat < 1e-9
    return ok, f"max vector err {worst_vec:.2e}, max round-trip err {worst_mat:.2e}"


def suite_gradient_check(rng) -> tuple[bool, str]:
    def finite_diff(pred, gt, model, pts):
        approx = np.zeros(6)
        for i in range(6):
            h = 1e-5 if i < 3 else 1e-3
            dr, dt = np.zeros(3), np.zeros(3)
            (dr if i < 3 else dt)[i % 3] = h
            hi = loss_trans(Pose(pred.rotation + dr, pred.translation + dt),
                            gt, model, pts)
            lo = loss_trans(Pose(pred.rotation - dr, pred.translation - dt),
                            gt, model, pts)
            approx[i] = (hi - lo) / (2 * h)
        return approx

    good = 0
    total = 60
    for case in range(total):
        pts = rng.uniform(-60, 60, size=(50, 3))
        model = ObjectModel(id="t", points=pts, symmetric=bool(case % 2))
        pred = Pose(_random_rotation_vec(rng), rng.uniform(-80, 80, size=3)
                    + [0, 0, 800.0])
        gt = Pose(_random_rotation_vec(rng), rng.uniform(-80, 80, size=3)
                  + [0, 0, 800.0])
        _, grad = loss_trans_grad(pred, gt, model, pts)
        exact = np.concatenate([grad.d_r, grad.d_t])
        approx = finite_diff(pred, gt, model, pts)
        rel = np.linalg.norm(exact - approx) / max(np.linalg.norm(approx), 1e-12)
        good += rel < 1e-4
    ok = good >= math.ceil(0.99 * total)
    return ok, f"{good}/{total} cases within 1e-4 of finite differences"


def suite_augmentation_consistency(rng) -> tuple[bool, str]:
    k = CameraIntrinsics(600.0, 600.0, 320.0, 240.0)
    worst_rot = 0.0
    worst_center = 0.0
    for _ in range(40):
        pose = Pose(_random_rotation_vec(rng),
                    np.array([rng.uniform(-120, 120), rng.uniform(-120, 120),
                              rng.uniform(700, 1400)]))
        pts = rng.uniform(-60, 60, size=(40, 3))
        theta = rng.uniform(0, 360)
        aug = augment_pose(pose, theta, 1.0)
        before = project(k, rodrigues_rotate(pose.rotation, pts) + pose.translation)
        after = project(k, rodrigues_rotate(aug.rotation, pts) + aug.translation)
        worst_rot = max(worst_rot, float(np.abs(
            after - warp_point(before, theta, 1.0, k)).max()))
        f = rng.uniform(0.7, 1.3)
        aug2 = augment_pose(pose, theta, f)
        center = project(k, aug2.translation)
        mapped = warp_point(project(k, pose.translation), theta, f, k)
        worst_center = max(worst_center, float(np.abs(center - mapped).max()))
    ok = worst_rot < 1e-6 and worst_center < 1e-6
    return ok, (f"rotation consistency {worst_rot:.2e} px, "
                f"center consistency {worst_center:.2e} px")


def suite_nms_brute_force(rng) -> tuple[bool, str]:
    def iou(a, b):
        iw = min(a[2], b[2]) - max(a[0], b[0])
        ih = min(a[3], b[3]) - max(a[1], b[1])
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        return inter / ((a[2] - a[0]) * (a[3] - a[1])
                        + (b[2] - b[0]) * (b[3] - b[1]) - inter)

    mismatches = 0
    rounds = 200
    for _ in range(rounds):
        n = int(rng.integers(1, 21))
        dets = []
        for _ in range(n):
            x1, y1 = rng.uniform(0, 80, size=2)
            w, h = rng.uniform(5, 40, size=2)
            dets.append(Detection(class_id=int(rng.integers(0, 3)),
                                  score=float(rng.uniform(0, 1)),
                                  bbox=[x1, y1, x1 + w, y1 + h],
                                  rotation=np.zeros(3),
                                  translation=np.array([0.0, 0.0, 1.0])))
        threshold = float(rng.uniform(0.1, 0.9))
        kept = []
        for i in sorted(range(n), key=lambda i: (-dets[i].score, i)):
            if all(k.class_id != dets[i].class_id
                   or iou(dets[i].bbox, k.bbox) <= threshold for k in kept):
                kept.append(dets[i])
        got = nms(dets, threshold)
        if [id(d) for d in got] != [id(d) for d in kept]:
            mismatches += 1
    return mismatches == 0, f"{rounds - mismatches}/{rounds} sets match"


SUITES = (
    ("rodrigues-roundtrip", suite_rodrigues_roundtrip),
    ("gradient-check", suite_gradient_check),
    ("augmentation-consistency", suite_augmentation_consistency),
    ("nms-brute-force", suite_nms_brute_force),
)


def run_suites(seed: int = 0, out=print) -> bool:
    all_ok = True
    for idx, (name, suite) in enumerate(SUITES):
        ok, detail = suite(np.random.default_rng([seed, idx]))
        out(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        all_ok &= ok
    return all_ok
