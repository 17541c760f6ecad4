import math

import numpy as np
import pytest

from posekit import backend


def reference_rotation_matrix(r):
    """Oracle-side rotation matrix built from the unit-axis formula only."""
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r)
    if angle == 0.0:
        return np.eye(3)
    k = r / angle
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return math.cos(angle) * np.eye(3) + math.sin(angle) * kx + (
        1 - math.cos(angle)
    ) * np.outer(k, k)


def random_axis_angle(rng, max_angle=np.pi):
    """Canonical random rotation vector: uniform axis, angle in (0, max_angle)."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return axis * rng.uniform(0.0, max_angle)


def random_pose(rng, t_z=(400.0, 1500.0), t_xy=200.0, max_angle=np.pi):
    from posekit.geometry import Pose

    t = np.array([
        rng.uniform(-t_xy, t_xy),
        rng.uniform(-t_xy, t_xy),
        rng.uniform(*t_z),
    ])
    return Pose(random_axis_angle(rng, max_angle), t)


@pytest.fixture(params=sorted(backend.available_backends()))
def kernels(request):
    """Runs a test once per available kernel backend."""
    return backend.available_backends()[request.param]
