"""Plain-text and PPM file formats.

Everything here round-trips bit-exactly: floats are written with repr (17
significant digits) and images as binary P6 PPM with maxval 255.  Formats:

* annotations: one object per line, `<model-id> rx ry rz tx ty tz`
  (axis-angle radians, translation mm)
* predictions: `<frame-index> <model-id> <score> rx ry rz tx ty tz`
* key-value config: `key value...` per line, `#` comments
* dataset manifest: `camera <path>`, `model <path>`, `frame <image> <ann>`
  lines with paths relative to the manifest file
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, Pose
from .metrics import PoseEstimate

__all__ = [
    "read_ppm",
    "write_ppm",
    "read_annotations",
    "write_annotations",
    "read_key_values",
    "write_key_values",
    "camera_from_key_values",
    "camera_to_key_values",
    "read_predictions",
    "write_predictions",
    "Manifest",
    "read_manifest",
    "write_manifest",
]


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- images

def read_ppm(path) -> np.ndarray:
    """Read a binary P6 PPM (maxval 255) into an (h, w, 3) uint8 array."""
    data = Path(path).read_bytes()
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
            elif data[pos : pos + 1].isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        return data[start:pos]

    magic = token()
    if magic != b"P6":
        raise ValueError(f"{path}: not a binary PPM (magic {magic!r})")
    width, height, maxval = int(token()), int(token()), int(token())
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise ValueError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()


def write_ppm(image: np.ndarray, path) -> None:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("image must be an (h, w, 3) uint8 array")
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + np.ascontiguousarray(img).tobytes())


# ----------------------------------------------------------- annotations

def read_annotations(path) -> list[tuple[str, Pose]]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ValueError(f"{path}: bad annotation line {line!r}")
        vals = [float(v) for v in parts[1:]]
        out.append((parts[0], Pose(vals[0:3], vals[3:6])))
    return out


def write_annotations(annotations, path) -> None:
    lines = []
    for model_id, pose in annotations:
        r, t = pose.rotation, pose.translation
        lines.append(" ".join([model_id] + [_fmt(v) for v in (*r, *t)]))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# ------------------------------------------------------ key-value config

def read_key_values(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        out[key] = value.strip()
    return out


def write_key_values(pairs: dict[str, str], path) -> None:
    Path(path).write_text(
        "".join(f"{k} {v}\n" for k, v in pairs.items()))


def camera_from_key_values(kv: dict[str, str]) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(fx=float(kv["fx"]), fy=float(kv["fy"]),
                                px=float(kv["px"]), py=float(kv["py"]))
    except KeyError as missing:
        raise ValueError(f"camera file is missing key {missing}") from None


def camera_to_key_values(k: CameraIntrinsics) -> dict[str, str]:
    return {"fx": _fmt(k.fx), "fy": _fmt(k.fy),
            "px": _fmt(k.px), "py": _fmt(k.py)}


# ------------------------------------------------------------ predictions

def read_predictions(path, n_frames: int) -> list[list[PoseEstimate]]:
    """Parse a prediction file into one list of estimates per frame index."""
    frames: list[list[PoseEstimate]] = [[] for _ in range(n_frames)]
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 9:
            raise ValueError(f"{path}: bad prediction line {line!r}")
        idx = int(parts[0])
        if not 0 <= idx < n_frames:
            raise ValueError(f"{path}: frame index {idx} out of range")
        vals = [float(v) for v in parts[2:]]
        frames[idx].append(PoseEstimate(
            model_id=parts[1], score=float(parts[2]),
            pose=Pose(vals[1:4], vals[4:7])))
    return frames


def write_predictions(frames: list[list[PoseEstimate]], path) -> None:
    lines = []
    for idx, estimates in enumerate(frames):
        for est in estimates:
            r, t = est.pose.rotation, est.pose.translation
            lines.append(" ".join([str(idx), est.model_id, _fmt(est.score)]
                                  + [_fmt(v) for v in (*r, *t)]))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# --------------------------------------------------------------- manifest

@dataclass
class Manifest:
    """Dataset layout: camera file, model files, (image, annotation) pairs.

    All paths are stored relative to the manifest and resolved on read.
    """

    camera: Path
    models: list[Path] = field(default_factory=list)
    frames: list[tuple[Path, Path]] = field(default_factory=list)


def read_manifest(path) -> Manifest:
    base = Path(path).parent
    camera = None
    models: list[Path] = []
    frames: list[tuple[Path, Path]] = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        kind, *rest = line.split()
        if kind == "camera" and len(rest) == 1:
            camera = base / rest[0]
        elif kind == "model" and len(rest) == 1:
            models.append(base / rest[0])
        elif kind == "frame" and len(rest) == 2:
            frames.append((base / rest[0], base / rest[1]))
        else:
            raise ValueError(f"{path}: bad manifest line {line!r}")
    if camera is None:
        raise ValueError(f"{path}: manifest has no camera line")
    return Manifest(camera=camera, models=models, frames=frames)


def write_manifest(manifest: Manifest, path) -> None:
    base = Path(path).parent
    lines = [f"camera {manifest.camera.relative_to(base)}"]
    lines.extend(f"model {m.relative_to(base)}" for m in manifest.models)
    lines.extend(f"frame {img.relative_to(base)} {ann.relative_to(base)}"
                 for img, ann in manifest.frames)
    Path(path).write_text("\n".join(lines) + "\n")
