"""Acceptance criteria, one test per criterion at its stated tolerance and
time budget.  Each prints a single pass/fail line; run with `pytest -v
tests/test_acceptance.py` (add -s to see the lines on success)."""

import math
import time

import numpy as np

import posekit.head as head_module
from posekit.augment import augment_pose, warp_point
from posekit.fit import run_trials, success_rate
from posekit.formats import (
    read_annotations,
    read_ppm,
    write_annotations,
    write_ppm,
)
from posekit.geometry import (
    CameraIntrinsics,
    ObjectModel,
    Pose,
    axis_angle_to_matrix,
    matrix_to_axis_angle,
    project,
    rodrigues_rotate,
)
from posekit.head import (
    AnchorGrid,
    decode_center,
    encode_center_offset,
    group_norm,
    init_refine_weights,
    nms,
    refine_rotation,
    scaling_config,
    zero_refine_weights,
)
from posekit.loss import loss_asym, loss_sym, loss_trans_grad, loss_trans
from posekit.metrics import add_metric, add_s_metric, add_auto, is_correct
from posekit.synth import SceneSpec, ShapeSpec, make_model, sample_scene

from conftest import random_axis_angle, random_pose
from test_fit import BOX
from test_head import brute_force_nms, random_detection
from test_synth import STANDARD_CYLINDER, compose_twin


def _criterion(number, name, budget_s, body):
    start = time.perf_counter()
    try:
        body()
    except BaseException:
        print(f"criterion {number:2d} ({name}): FAIL")
        raise
    elapsed = time.perf_counter() - start
    print(f"criterion {number:2d} ({name}): PASS in {elapsed:.2f}s "
          f"(budget {budget_s}s)")
    assert elapsed < budget_s, f"criterion {number} exceeded {budget_s}s budget"


def test_criterion_01_scaling_formula_table():
    def body():
        expected = {phi: (2 + phi // 3, 1 + phi // 3) for phi in range(8)}
        assert expected[0] == (2, 1)
        assert expected[3] == (3, 2)
        assert expected[7] == (4, 3)
        for phi, (d, n) in expected.items():
            cfg = scaling_config(phi, w_bifpn=64)
            assert (cfg.d_iter, cfg.n_iter) == (d, n)

    _criterion(1, "scaling-formula table", 1.0, body)


def test_criterion_02_loss_metric_identity():
    def body():
        rng = np.random.default_rng(2)
        for _ in range(1000):
            pred, gt = random_pose(rng), random_pose(rng)
            pts = rng.uniform(-60, 60, size=(int(rng.integers(10, 60)), 3))
            assert abs(loss_asym(pred, gt, pts) - add_metric(gt, pred, pts)) \
                <= 1e-12
            assert abs(loss_sym(pred, gt, pts) - add_s_metric(gt, pred, pts)) \
                <= 1e-12

    _criterion(2, "loss == metric identity", 5.0, body)


def test_criterion_03_gradient_check():
    def body():
        rng = np.random.default_rng(3)
        for symmetric in (False, True):
            good = 0
            for _ in range(100):
                pts = rng.uniform(-60, 60, size=(50, 3))
                model = ObjectModel(id="g", points=pts, symmetric=symmetric)
                pred, gt = random_pose(rng), random_pose(rng)
                _, grad = loss_trans_grad(pred, gt, model, pts)
                exact = np.concatenate([grad.d_r, grad.d_t])
                approx = np.zeros(6)
                for i in range(6):
                    h = 1e-5 if i < 3 else 1e-3
                    dr, dt = np.zeros(3), np.zeros(3)
                    (dr if i < 3 else dt)[i % 3] = h
                    hi = loss_trans(Pose(pred.rotation + dr,
                                         pred.translation + dt), gt, model, pts)
                    lo = loss_trans(Pose(pred.rotation - dr,
                                         pred.translation - dt), gt, model, pts)
                    approx[i] = (hi - lo) / (2 * h)
                rel = np.linalg.norm(exact - approx) \
                    / max(np.linalg.norm(approx), 1e-12)
                good += rel < 1e-4
            assert good >= 99, f"symmetric={symmetric}: {good}/100"

    _criterion(3, "analytic vs finite-difference gradients", 30.0, body)


def test_criterion_04_augmentation_consistency():
    def body():
        spec = SceneSpec(
            intrinsics=CameraIntrinsics(600.0, 600.0, 160.0, 120.0),
            width=320, height=240,
            objects=(ShapeSpec(id="a", kind="box", size=(90.0, 70.0, 50.0),
                               points=200, seed=1),
                     ShapeSpec(id="b", kind="blob", size=(35.0,),
                               points=200, seed=2)),
        )
        models = {s.id: make_model(s) for s in spec.objects}
        rng = np.random.default_rng(4)
        k = spec.intrinsics
        for _ in range(200):
            frame = sample_scene(spec, rng)
            theta = rng.uniform(0.0, 360.0)
            f = rng.uniform(0.7, 1.3)
            for model_id, pose in frame.annotations:
                pts = models[model_id].points
                # rotation-only: every point's reprojection matches the warp
                aug = augment_pose(pose, theta, 1.0)
                before = project(k, rodrigues_rotate(pose.rotation, pts)
                                 + pose.translation)
                after = project(k, rodrigues_rotate(aug.rotation, pts)
                                + aug.translation)
                err = np.abs(after - warp_point(before, theta, 1.0, k)).max()
                assert err < 1e-6, err
                # combined rotation+scale: the projected center matches
                aug2 = augment_pose(pose, theta, f)
                center = project(k, aug2.translation)
                mapped = warp_point(project(k, pose.translation), theta, f, k)
                assert np.abs(center - mapped).max() < 1e-6

    _criterion(4, "6D-augmentation consistency", 30.0, body)


def test_criterion_05_augmentation_inverse():
    def body():
        rng = np.random.default_rng(5)
        for _ in range(1000):
            pose = random_pose(rng, max_angle=math.pi - 1e-3)
            theta = rng.uniform(0.0, 360.0)
            f = rng.uniform(0.7, 1.3)
            back = augment_pose(augment_pose(pose, theta, f),
                                (360.0 - theta) % 360.0, 1.0 / f)
            assert np.linalg.norm(back.rotation - pose.rotation) < 1e-9
            assert np.linalg.norm(back.translation - pose.translation) < 1e-9

    _criterion(5, "augmentation inverse", 5.0, body)


def test_criterion_06_pose_recovery():
    def body():
        model = make_model(BOX)
        rows = run_trials(model, 100, seed=0, angle_deg=5.0, offset_mm=20.0)
        rate = success_rate(rows, model.diameter, fraction=0.01)
        assert rate >= 0.95, f"only {100 * rate:.0f}% of trials recovered"

    _criterion(6, "pose recovery (100 perturbed trials)", 300.0, body)


def test_criterion_07_symmetry_semantics():
    def body():
        model = make_model(STANDARD_CYLINDER)
        gt = Pose([0.1, -0.2, 0.4], [20.0, -10.0, 900.0])
        twin = Pose(compose_twin(gt), gt.translation)
        add_s = add_s_metric(gt, twin, model.points)
        add = add_metric(gt, twin, model.points)
        assert add_s < 1e-6 * model.diameter
        assert add >= 0.1 * model.diameter
        # dispatch follows the symmetry flag exactly
        asym_model = ObjectModel(id="rigid", points=model.points,
                                 symmetric=False)
        assert add_auto(gt, twin, model) == add_s
        assert add_auto(gt, twin, asym_model) == add

    _criterion(7, "symmetry semantics on the standard cylinder", 1.0, body)


def test_criterion_08_threshold_semantics():
    def body():
        for diameter in (1.0, 73.5, 250.0):
            assert is_correct(0.1 * diameter, diameter) is False
            assert is_correct(0.0999 * diameter, diameter) is True
            assert is_correct(0.0, diameter) is True

    _criterion(8, "strict 10%-of-diameter threshold", 1.0, body)


def test_criterion_09_round_trips(tmp_path):
    def body():
        rng = np.random.default_rng(9)
        # rodrigues / matrix conversions
        for _ in range(500):
            r = random_axis_angle(rng, max_angle=math.pi - 1e-7)
            assert np.linalg.norm(
                matrix_to_axis_angle(axis_angle_to_matrix(r)) - r) < 1e-9
            m = axis_angle_to_matrix(random_axis_angle(rng))
            m2 = axis_angle_to_matrix(matrix_to_axis_angle(m))
            assert np.linalg.norm(m2 - m) < 1e-9
        # center-offset encode/decode, exact
        grid = AnchorGrid.build(64, 64)
        for level, lvl in enumerate(grid.levels):
            targets = rng.uniform(0, 64, size=(lvl.height, lvl.width, 2))
            offsets = np.zeros_like(targets)
            for i in range(lvl.height):
                for j in range(lvl.width):
                    offsets[i, j] = encode_center_offset(
                        targets[i, j], (level, i, j), grid)
            maps = [np.zeros((g.height, g.width, 2)) for g in grid.levels]
            maps[level] = offsets
            assert np.array_equal(decode_center(maps, grid)[level], targets)
        # PPM and annotation formats, bit-exact
        img = rng.integers(0, 256, size=(24, 31, 3), dtype=np.uint8)
        write_ppm(img, tmp_path / "rt.ppm")
        assert np.array_equal(read_ppm(tmp_path / "rt.ppm"), img)
        anns = [(f"m{i}", random_pose(rng)) for i in range(8)]
        write_annotations(anns, tmp_path / "rt.txt")
        loaded = read_annotations(tmp_path / "rt.txt")
        for (ida, pa), (idb, pb) in zip(anns, loaded):
            assert ida == idb
            assert np.array_equal(pa.rotation, pb.rotation)
            assert np.array_equal(pa.translation, pb.translation)

    _criterion(9, "representation and format round-trips", 10.0, body)


def test_criterion_10_head_structure(monkeypatch):
    def body():
        cfg = scaling_config(3, w_bifpn=32)
        assert (cfg.d_iter, cfg.n_iter) == (3, 2)
        rng = np.random.default_rng(10)
        features = rng.normal(size=(32, 8, 8))
        r_init = rng.normal(scale=0.2, size=(3, 8, 8))

        calls = {"n": 0}
        real = head_module.conv_block

        def counting(*args, **kwargs):
            calls["n"] += 1
            return real(*args, **kwargs)

        monkeypatch.setattr(head_module, "conv_block", counting)
        weights = init_refine_weights(cfg, feature_channels=32, seed=10)
        refine_rotation(features, r_init, weights, cfg)
        assert calls["n"] == 6  # 2 iterations x 3 conv blocks

        # zero-weight identity at every phi
        for phi in range(8):
            c = scaling_config(phi, w_bifpn=32)
            out = refine_rotation(features, r_init,
                                  zero_refine_weights(c, feature_channels=32),
                                  c)
            assert np.array_equal(out, r_init)

        # group-norm statistics hold per group
        x = rng.normal(2.0, 3.0, size=(32, 16, 16))
        normed = group_norm(x, 4, np.ones(32), np.zeros(32))
        per_group = normed.reshape(4, -1)
        assert np.abs(per_group.mean(axis=1)).max() < 1e-6
        assert np.abs(per_group.var(axis=1) - 1.0).max() < 1e-4

    _criterion(10, "head structure at phi=3", 10.0, body)


def test_criterion_11_nms_brute_force():
    def body():
        rng = np.random.default_rng(11)
        for _ in range(500):
            n = int(rng.integers(1, 21))
            dets = [random_detection(rng) for _ in range(n)]
            threshold = float(rng.uniform(0.1, 0.9))
            got = nms(dets, threshold)
            expected = brute_force_nms(dets, threshold)
            assert [id(d) for d in got] == [id(d) for d in expected]

    _criterion(11, "NMS equals quadratic brute force", 5.0, body)
