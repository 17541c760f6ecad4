"""Augmentation oracles: matrix-composition checks for the pose transform,
index-reversal and fixed-point checks for the warp, and the projection
consistency law tying the two together."""

import math

import numpy as np
import pytest

from posekit.augment import (
    COLOR_OPS,
    AnnotatedFrame,
    AugmentParams,
    augment_frame,
    augment_pose,
    color_augment,
    rotation_delta,
    warp_image,
    warp_point,
)
from posekit.geometry import (
    CameraIntrinsics,
    Pose,
    axis_angle_to_matrix,
    project,
    rodrigues_rotate,
)

from conftest import random_pose, reference_rotation_matrix


def camera(px=320.0, py=240.0, f=600.0):
    return CameraIntrinsics(f, f, px, py)


def random_image(rng, h=48, w=64):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


class TestRotationDelta:
    def test_zero(self):
        np.testing.assert_array_equal(rotation_delta(0.0), np.zeros(3))

    def test_half_turn(self):
        np.testing.assert_allclose(rotation_delta(180.0), [0, 0, math.pi])

    def test_quarter_turn_rotates_projection(self):
        k = camera()
        rng = np.random.default_rng(0)
        pose = random_pose(rng, t_z=(800.0, 1200.0), t_xy=100.0)
        aug = augment_pose(pose, 90.0, 1.0)
        center_before = project(k, pose.translation)
        center_after = project(k, aug.translation)
        expected = warp_point(center_before, 90.0, 1.0, k)
        np.testing.assert_allclose(center_after, expected, atol=1e-9)


class TestAugmentPose:
    def test_identity_augmentation_is_bitwise_noop(self):
        rng = np.random.default_rng(1)
        pose = random_pose(rng)
        out = augment_pose(pose, 0.0, 1.0)
        np.testing.assert_array_equal(out.rotation, pose.rotation)
        np.testing.assert_array_equal(out.translation, pose.translation)

    def test_pure_scale_divides_depth(self):
        pose = Pose([0.2, -0.1, 0.4], [10.0, 20.0, 1000.0])
        out = augment_pose(pose, 0.0, 2.0)
        np.testing.assert_array_equal(out.translation, [10.0, 20.0, 500.0])
        np.testing.assert_array_equal(out.rotation, pose.rotation)

    def test_quarter_turn_matrix_composition(self):
        rng = np.random.default_rng(2)
        pose = Pose(rng.normal(size=3) * 0.4, [100.0, 0.0, 1000.0])
        out = augment_pose(pose, 90.0, 1.0)
        np.testing.assert_allclose(out.translation, [0.0, 100.0, 1000.0],
                                   atol=1e-12)
        rz = reference_rotation_matrix([0, 0, math.pi / 2])
        expected = rz @ reference_rotation_matrix(pose.rotation)
        np.testing.assert_allclose(axis_angle_to_matrix(out.rotation), expected,
                                   atol=1e-12)

    def test_composition_oracle_random(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            pose = random_pose(rng)
            theta = rng.uniform(0, 360)
            f = rng.uniform(0.7, 1.3)
            out = augment_pose(pose, theta, f)
            delta = reference_rotation_matrix(rotation_delta(theta))
            np.testing.assert_allclose(
                axis_angle_to_matrix(out.rotation),
                delta @ reference_rotation_matrix(pose.rotation), atol=1e-10)
            t_expected = delta @ pose.translation
            t_expected[2] /= f
            np.testing.assert_allclose(out.translation, t_expected, atol=1e-9)

    def test_inverse_recovers_pose(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            pose = random_pose(rng, max_angle=math.pi - 1e-3)
            theta = rng.uniform(0, 360)
            f = rng.uniform(0.7, 1.3)
            back = augment_pose(augment_pose(pose, theta, f),
                                (360.0 - theta) % 360.0, 1.0 / f)
            assert np.linalg.norm(back.rotation - pose.rotation) < 1e-9
            assert np.linalg.norm(back.translation - pose.translation) < 1e-9

    def test_rejects_non_positive_scale(self):
        with pytest.raises(ValueError):
            augment_pose(Pose.identity(), 10.0, 0.0)
        with pytest.raises(ValueError):
            augment_pose(Pose.identity(), 10.0, -1.0)


class TestWarpImage:
    def test_identity_is_bit_identical(self):
        rng = np.random.default_rng(5)
        img = random_image(rng)
        out = warp_image(img, 0.0, 1.0, camera())
        np.testing.assert_array_equal(out, img)

    def test_half_turn_about_exact_center_flips(self):
        rng = np.random.default_rng(6)
        img = random_image(rng, h=48, w=64)
        k = camera(px=(64 - 1) / 2.0, py=(48 - 1) / 2.0)
        out = warp_image(img, 180.0, 1.0, k)
        expected = img[::-1, ::-1]
        assert np.abs(out.astype(int) - expected.astype(int)).max() <= 1

    def test_principal_point_is_scaling_fixed_point(self):
        rng = np.random.default_rng(7)
        img = random_image(rng)
        k = camera(px=32.0, py=24.0)
        out = warp_image(img, 0.0, 2.0, k)
        np.testing.assert_array_equal(out[24, 32], img[24, 32])

    def test_output_size_matches_input(self):
        rng = np.random.default_rng(8)
        img = random_image(rng, h=31, w=57)
        out = warp_image(img, 73.0, 0.8, camera(px=20.0, py=15.0))
        assert out.shape == img.shape and out.dtype == np.uint8

    def test_out_of_frame_fill_is_black(self):
        img = np.full((20, 20, 3), 200, dtype=np.uint8)
        out = warp_image(img, 0.0, 0.25, camera(px=9.5, py=9.5))
        assert tuple(out[0, 0]) == (0, 0, 0)
        assert tuple(out[10, 10]) == (200, 200, 200)


class TestAugmentFrame:
    def _frame(self, rng, n_objects=2):
        anns = tuple(
            (f"obj{i}", random_pose(rng, t_z=(700.0, 1200.0), t_xy=120.0))
            for i in range(n_objects))
        return AnnotatedFrame(image=random_image(rng), intrinsics=camera(),
                              annotations=anns)

    def test_skip_probability_one_returns_frame_unchanged(self):
        rng = np.random.default_rng(9)
        frame = self._frame(rng)
        out = augment_frame(frame, AugmentParams(skip_probability=1.0),
                            np.random.default_rng(0))
        assert out is frame

    def test_annotations_share_one_sample(self):
        rng = np.random.default_rng(10)
        frame = self._frame(rng, n_objects=3)
        out = augment_frame(frame, AugmentParams(skip_probability=0.0),
                            np.random.default_rng(42))
        # every annotation's depth ratio reveals the sampled f_scale
        ratios = [frame.annotations[i][1].translation[2]
                  / out.annotations[i][1].translation[2]
                  for i in range(3)]
        assert max(ratios) - min(ratios) < 1e-12
        # and the planar rotation angle of the center reveals theta
        k = frame.intrinsics
        pp = np.array([k.px, k.py])
        angles = []
        for i in range(3):
            before = project(k, frame.annotations[i][1].translation) - pp
            after = project(k, out.annotations[i][1].translation) - pp
            cross = before[0] * after[1] - before[1] * after[0]
            angles.append(math.atan2(cross, before @ after))
        assert max(angles) - min(angles) < 1e-9

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(11)
        frame = self._frame(rng)
        params = AugmentParams(skip_probability=0.0)
        a = augment_frame(frame, params, np.random.default_rng(7))
        b = augment_frame(frame, params, np.random.default_rng(7))
        np.testing.assert_array_equal(a.image, b.image)
        for (_, pa), (_, pb) in zip(a.annotations, b.annotations):
            np.testing.assert_array_equal(pa.rotation, pb.rotation)
            np.testing.assert_array_equal(pa.translation, pb.translation)

    def test_keeps_all_annotations(self):
        rng = np.random.default_rng(12)
        frame = self._frame(rng, n_objects=4)
        out = augment_frame(frame, AugmentParams(skip_probability=0.0),
                            np.random.default_rng(1))
        assert len(out.annotations) == 4
        assert out.intrinsics == frame.intrinsics


class TestConsistencyLaws:
    """The heart of the scheme: the pose transform and the image warp agree
    on where projections move."""

    def test_rotation_only_pointwise_exact(self):
        rng = np.random.default_rng(13)
        k = camera()
        for _ in range(30):
            pose = random_pose(rng, t_z=(700.0, 1500.0), t_xy=150.0)
            theta = rng.uniform(0, 360)
            aug = augment_pose(pose, theta, 1.0)
            pts = rng.uniform(-60, 60, size=(50, 3))
            before = project(k, rodrigues_rotate(pose.rotation, pts)
                             + pose.translation)
            after = project(k, rodrigues_rotate(aug.rotation, pts)
                            + aug.translation)
            np.testing.assert_allclose(after, warp_point(before, theta, 1.0, k),
                                       atol=1e-6)

    def test_scale_center_exact_but_cloud_only_bounded(self):
        rng = np.random.default_rng(14)
        k = camera()
        worst = 0.0
        for _ in range(30):
            pose = random_pose(rng, t_z=(700.0, 1500.0), t_xy=150.0)
            theta = rng.uniform(0, 360)
            f = rng.uniform(0.7, 1.3)
            aug = augment_pose(pose, theta, f)
            center_after = project(k, aug.translation)
            expected = warp_point(project(k, pose.translation), theta, f, k)
            np.testing.assert_allclose(center_after, expected, atol=1e-6)

            pts = rng.uniform(-60, 60, size=(40, 3))
            after = project(k, rodrigues_rotate(aug.rotation, pts)
                            + aug.translation)
            mapped = warp_point(
                project(k, rodrigues_rotate(pose.rotation, pts)
                        + pose.translation), theta, f, k)
            worst = max(worst, np.abs(after - mapped).max())
        # the documented off-center scaling error: real but bounded
        assert 1e-6 < worst < 40.0


class TestColorAugment:
    def test_preserves_geometry_and_determinism(self):
        rng = np.random.default_rng(15)
        img = random_image(rng, h=40, w=30)
        out1 = color_augment(img, np.random.default_rng(3))
        out2 = color_augment(img, np.random.default_rng(3))
        assert out1.shape == img.shape and out1.dtype == np.uint8
        np.testing.assert_array_equal(out1, out2)

    def test_gaussian_noise_std_matches_rule(self):
        ops = dict(COLOR_OPS)
        img = np.full((200, 200, 3), 128, dtype=np.uint8)
        out = ops["gaussian-noise"](img, 14, np.random.default_rng(0))
        # clipping at [0, 255] barely matters around mid-gray
        for ch in range(3):
            std = out[:, :, ch].astype(float).std()
            assert abs(std - 0.14 * 255) / (0.14 * 255) < 0.10

    def test_minimum_strength_brightness_bound(self):
        ops = dict(COLOR_OPS)
        rng = np.random.default_rng(16)
        img = random_image(rng)
        out = ops["brightness"](img, 1, np.random.default_rng(1))
        max_dev = np.abs(out.astype(int) - img.astype(int)).max()
        assert max_dev <= math.ceil(255 * 0.9 / 30.0) + 1

    def test_identity_at_zero_strength(self):
        rng = np.random.default_rng(17)
        img = random_image(rng)
        for name, op in COLOR_OPS:
            if name == "gaussian-noise":
                continue  # noise at m=0 has std 0, tested via the rule above
            out = op(img, 0, np.random.default_rng(2))
            assert np.abs(out.astype(int) - img.astype(int)).max() <= 1, name

    def test_all_ops_preserve_shape(self):
        rng = np.random.default_rng(18)
        img = random_image(rng)
        for name, op in COLOR_OPS:
            out = op(img, 14, np.random.default_rng(4))
            assert out.shape == img.shape and out.dtype == np.uint8, name


class TestAugmentParams:
    def test_rejects_bad_ranges(self):
        with pytest.raises(ValueError):
            AugmentParams(scale_range=(0.0, 1.0))
        with pytest.raises(ValueError):
            AugmentParams(theta_range=(10.0, 5.0))
        with pytest.raises(ValueError):
            AugmentParams(skip_probability=1.5)

    def test_frame_rejects_non_positive_depth(self):
        rng = np.random.default_rng(19)
        with pytest.raises(ValueError):
            AnnotatedFrame(image=random_image(rng), intrinsics=camera(),
                           annotations=(("x", Pose([0, 0, 0], [0, 0, -5.0])),))
