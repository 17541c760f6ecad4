"""Synthetic models, scenes, and overlays: exact ground truth at desk scale.

Shapes are deterministic point clouds.  Cylinders are built half-and-mirror
so the point set is exactly invariant under a half-turn about z, which makes
the symmetric flag semantically true (the nearest-neighbor metric of a twin
pose vanishes to float precision), not merely declared.

Rendering is a flat point splat: consistency checks operate on projected
coordinates, so photo-realism would add nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import AnnotatedFrame
from .formats import (
    Manifest,
    camera_to_key_values,
    write_annotations,
    write_key_values,
    write_manifest,
    write_ppm,
)
from .geometry import (
    CameraIntrinsics,
    ObjectModel,
    Pose,
    project,
    rodrigues_rotate,
    save_object_model,
)

__all__ = [
    "ShapeSpec",
    "SceneSpec",
    "make_model",
    "random_rotation",
    "sample_scene",
    "render_cuboid_overlay",
    "write_dataset",
    "parse_scene_spec",
    "PALETTE",
]

PALETTE = (
    (230, 80, 80),
    (80, 200, 90),
    (90, 120, 240),
    (230, 200, 60),
    (200, 90, 220),
    (70, 220, 220),
)


@dataclass(frozen=True)
class ShapeSpec:
    """Deterministic shape recipe.

    kind 'box' takes size (sx, sy, sz); 'cylinder' (radius, height) and is
    symmetric about z; 'blob' (extent,) is an asymmetric cloud.  All mm.
    """

    id: str
    kind: str
    size: tuple[float, ...]
    points: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("box", "cylinder", "blob"):
            raise ValueError(f"unknown shape kind {self.kind!r}")


@dataclass(frozen=True)
class SceneSpec:
    intrinsics: CameraIntrinsics
    width: int
    height: int
    objects: tuple[ShapeSpec, ...]
    t_z_range: tuple[float, float] = (600.0, 1200.0)
    margin: float = 0.15
    noise: int = 0

    def __post_init__(self):
        if self.t_z_range[0] <= 0 or self.t_z_range[1] < self.t_z_range[0]:
            raise ValueError("t_z range must be positive and non-empty")
        if not 0.0 <= self.margin < 0.5:
            raise ValueError("margin must be in [0, 0.5)")


def _box_points(size, n, rng):
    sx, sy, sz = (s / 2.0 for s in size)
    corners = np.array([[x, y, z] for x in (-sx, sx) for y in (-sy, sy)
                        for z in (-sz, sz)])
    if n <= 8:
        return corners[:n] if n < 8 else corners
    # remaining points uniformly on the six faces
    extra = n - 8
    axes = rng.integers(0, 3, size=extra)
    signs = rng.choice([-1.0, 1.0], size=extra)
    uv = rng.uniform(-1.0, 1.0, size=(extra, 2))
    half = np.array([sx, sy, sz])
    pts = np.empty((extra, 3))
    for row, (ax, sg) in enumerate(zip(axes, signs)):
        others = [a for a in range(3) if a != ax]
        pts[row, ax] = sg * half[ax]
        pts[row, others[0]] = uv[row, 0] * half[others[0]]
        pts[row, others[1]] = uv[row, 1] * half[others[1]]
    return np.vstack([corners, pts])


def _cylinder_points(size, n, rng):
    radius, height = size
    half_n = max(n // 2, 2)
    # lateral surface and caps, sampled on one half then mirrored through
    # (x, y) -> (-x, -y) for an exactly half-turn-symmetric set
    n_side = max(int(round(half_n * 0.7)), 1)
    n_caps = half_n - n_side
    ang = rng.uniform(-math.pi / 2, math.pi / 2, size=n_side)
    z = rng.uniform(-height / 2, height / 2, size=n_side)
    side = np.stack([radius * np.cos(ang), radius * np.sin(ang), z], axis=1)
    parts = [side]
    if n_caps > 0:
        ang_c = rng.uniform(-math.pi / 2, math.pi / 2, size=n_caps)
        rad = radius * np.sqrt(rng.uniform(0, 1, size=n_caps))
        z_c = np.where(rng.random(n_caps) < 0.5, -height / 2, height / 2)
        parts.append(np.stack([rad * np.cos(ang_c), rad * np.sin(ang_c), z_c],
                              axis=1))
    half = np.vstack(parts)
    mirrored = half * np.array([-1.0, -1.0, 1.0])
    return np.vstack([half, mirrored])


def _blob_points(size, n, rng):
    extent = size[0]
    # anisotropic scales plus a fixed shear keep the cloud asymmetric
    scales = np.array([1.0, 0.6, 0.35]) * extent
    pts = rng.normal(size=(n, 3)) * scales
    pts[:, 0] += 0.3 * pts[:, 1]
    return pts


def make_model(spec: ShapeSpec) -> ObjectModel:
    """Deterministic point-cloud model; the diameter is computed exactly."""
    if spec.points < 4:
        raise ValueError("point count must be at least 4")
    if len(spec.size) == 0 or min(spec.size) <= 0:
        raise ValueError(f"degenerate size parameters {spec.size}")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "box":
        if len(spec.size) != 3:
            raise ValueError("box size must be (sx, sy, sz)")
        pts = _box_points(spec.size, spec.points, rng)
    elif spec.kind == "cylinder":
        if len(spec.size) != 2:
            raise ValueError("cylinder size must be (radius, height)")
        pts = _cylinder_points(spec.size, spec.points, rng)
    else:
        pts = _blob_points(spec.size, spec.points, rng)
    return ObjectModel(id=spec.id, points=pts,
                       symmetric=(spec.kind == "cylinder"))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation: uniform axis plus rejection-sampled angle with the
    (1 - cos) density that makes axis-angle sampling uniform over rotations."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    while True:
        angle = rng.uniform(0.0, math.pi)
        if rng.random() < 0.5 * (1.0 - math.cos(angle)):
            return axis * angle


def _splat(image, pts_px, color):
    h, w = image.shape[:2]
    cols = np.floor(pts_px[:, 0] + 0.5).astype(int)
    rows = np.floor(pts_px[:, 1] + 0.5).astype(int)
    keep = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    image[rows[keep], cols[keep]] = color


def sample_scene(spec: SceneSpec, rng: np.random.Generator) -> AnnotatedFrame:
    """One frame: every object gets a uniform random rotation, a depth in
    range, and a translation whose projection lands inside the margin box;
    model points are splatted flat onto the image."""
    k = spec.intrinsics
    if spec.noise > 0:
        image = rng.integers(0, spec.noise + 1, size=(spec.height, spec.width, 3),
                             ).astype(np.uint8)
    else:
        image = np.zeros((spec.height, spec.width, 3), dtype=np.uint8)
    annotations = []
    for idx, shape in enumerate(spec.objects):
        model = make_model(shape)
        r = random_rotation(rng)
        t_z = rng.uniform(*spec.t_z_range)
        u = rng.uniform(spec.margin * spec.width, (1 - spec.margin) * spec.width)
        v = rng.uniform(spec.margin * spec.height, (1 - spec.margin) * spec.height)
        t = np.array([(u - k.px) * t_z / k.fx, (v - k.py) * t_z / k.fy, t_z])
        pose = Pose(r, t)
        cam_pts = rodrigues_rotate(r, model.points) + t
        _splat(image, project(k, cam_pts), PALETTE[idx % len(PALETTE)])
        annotations.append((model.id, pose))
    return AnnotatedFrame(image=image, intrinsics=k,
                          annotations=tuple(annotations))


def _draw_segment(image, p0, p1, color):
    length = float(np.hypot(*(p1 - p0)))
    steps = max(int(math.ceil(length * 2)), 1)
    ts = np.linspace(0.0, 1.0, steps + 1)
    pts = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
    _splat(image, pts, color)


def render_cuboid_overlay(image, pose: Pose, model: ObjectModel,
                          k: CameraIntrinsics, color=(0, 255, 0)) -> np.ndarray:
    """Draw the model's bounding-cuboid wireframe under the pose.

    Returns a new image; edges with an endpoint at or behind the camera
    plane are skipped rather than crashing the projection.
    """
    out = np.array(image, dtype=np.uint8, copy=True)
    lo = model.points.min(axis=0)
    hi = model.points.max(axis=0)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                        for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    cam = rodrigues_rotate(pose.rotation, corners) + pose.translation
    for a in range(8):
        for b in range(a + 1, 8):
            if bin(a ^ b).count("1") != 1:
                continue  # cuboid edges connect corners differing in one axis
            if cam[a, 2] <= 0 or cam[b, 2] <= 0:
                continue
            _draw_segment(out, project(k, cam[a]), project(k, cam[b]), color)
    return out


def parse_scene_spec(path) -> tuple[SceneSpec, int]:
    """Read a scene description file; returns (spec, default frame count).

    Lines are `key value`: width/height/fx/fy/px/py, tz_min/tz_max, margin,
    noise, frames, plus one `object` line per shape of the form
    `object id=<name> kind=<box|cylinder|blob> size=<a,b,c> points=<n> seed=<s>`.
    """
    keys: dict[str, str] = {}
    objects: list[ShapeSpec] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        if key != "object":
            keys[key] = value.strip()
            continue
        fields = dict(tok.split("=", 1) for tok in value.split())
        try:
            objects.append(ShapeSpec(
                id=fields["id"],
                kind=fields["kind"],
                size=tuple(float(v) for v in fields["size"].split(",")),
                points=int(fields.get("points", "400")),
                seed=int(fields.get("seed", "0")),
            ))
        except KeyError as missing:
            raise ValueError(f"{path}: object line missing {missing}") from None
    try:
        spec = SceneSpec(
            intrinsics=CameraIntrinsics(
                fx=float(keys["fx"]), fy=float(keys["fy"]),
                px=float(keys["px"]), py=float(keys["py"])),
            width=int(keys["width"]),
            height=int(keys["height"]),
            objects=tuple(objects),
            t_z_range=(float(keys.get("tz_min", "600")),
                       float(keys.get("tz_max", "1200"))),
            margin=float(keys.get("margin", "0.15")),
            noise=int(keys.get("noise", "0")),
        )
    except KeyError as missing:
        raise ValueError(f"{path}: scene spec missing key {missing}") from None
    if not objects:
        raise ValueError(f"{path}: scene spec declares no objects")
    return spec, int(keys.get("frames", "10"))


def write_dataset(spec: SceneSpec, n_frames: int, seed: int,
                  out_dir) -> Manifest:
    """Emit PPM frames, annotation files, model files, the camera file, and
    the manifest tying them together."""
    out = Path(out_dir)
    for sub in ("images", "annotations", "models"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    camera_path = out / "camera.txt"
    kv = camera_to_key_values(spec.intrinsics)
    kv["width"] = str(spec.width)
    kv["height"] = str(spec.height)
    write_key_values(kv, camera_path)

    model_paths = []
    for shape in spec.objects:
        path = out / "models" / f"{shape.id}.txt"
        save_object_model(make_model(shape), path)
        model_paths.append(path)

    rng = np.random.default_rng(seed)
    frames = []
    for i in range(n_frames):
        frame = sample_scene(spec, rng)
        img_path = out / "images" / f"frame_{i:04d}.ppm"
        ann_path = out / "annotations" / f"frame_{i:04d}.txt"
        write_ppm(frame.image, img_path)
        write_annotations(frame.annotations, ann_path)
        frames.append((img_path, ann_path))

    manifest = Manifest(camera=camera_path, models=model_paths, frames=frames)
    write_manifest(manifest, out / "dataset.manifest")
    return manifest
