"""Scaled prediction-head structure at toy scale.

Covers the compound-scaling formulas for the rotation/translation subnets,
stride-normalized center-offset encoding over anchor grids, the iterative
rotation-refinement forward pass (depthwise-separable conv blocks with group
normalization and SiLU), greedy NMS, and a flat binary weights format for
cross-language loading.

Forward pass only: these heads exist to pin down structure and shapes, not
to be trained.  Feature tensors are (channels, height, width) float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ScalingConfig",
    "scaling_config",
    "GridLevel",
    "AnchorGrid",
    "FeatureMap",
    "encode_center_offset",
    "decode_center",
    "silu",
    "group_norm",
    "separable_conv2d",
    "ConvBlockWeights",
    "conv_block",
    "RefineWeights",
    "init_refine_weights",
    "zero_refine_weights",
    "refine_rotation",
    "Detection",
    "box_iou",
    "nms",
    "save_weights",
    "load_weights",
    "refine_weights_to_dict",
    "refine_weights_from_dict",
]


# ------------------------------------------------------------ scaling

@dataclass(frozen=True)
class ScalingConfig:
    """Head hyperparameters derived from the compound coefficient phi."""

    phi: int
    w_bifpn: int
    d_iter: int
    n_iter: int
    n_groups: int


def scaling_config(phi: int, w_bifpn: int = 64) -> ScalingConfig:
    """Refinement depth 2 + floor(phi/3), iteration count 1 + floor(phi/3),
    and one normalization group per 16 channels."""
    if not 0 <= phi <= 7:
        raise ValueError("phi must be in 0..7")
    if w_bifpn < 16:
        raise ValueError("w_bifpn must be at least 16")
    return ScalingConfig(
        phi=phi,
        w_bifpn=w_bifpn,
        d_iter=2 + phi // 3,
        n_iter=1 + phi // 3,
        n_groups=w_bifpn // 16,
    )


# ------------------------------------------------------- anchor grids

@dataclass(frozen=True)
class GridLevel:
    """One pyramid level: cell (i, j) is centered at ((j+0.5)*stride,
    (i+0.5)*stride) in network-input pixels."""

    stride: int
    height: int
    width: int

    def x_map(self) -> np.ndarray:
        return np.broadcast_to(
            (np.arange(self.width) + 0.5) * self.stride,
            (self.height, self.width)).copy()

    def y_map(self) -> np.ndarray:
        return np.broadcast_to(
            ((np.arange(self.height) + 0.5) * self.stride)[:, None],
            (self.height, self.width)).copy()

    def center(self, i: int, j: int) -> np.ndarray:
        if not (0 <= i < self.height and 0 <= j < self.width):
            raise ValueError(f"cell ({i}, {j}) outside {self.height}x{self.width} grid")
        return np.array([(j + 0.5) * self.stride, (i + 0.5) * self.stride])


@dataclass(frozen=True)
class AnchorGrid:
    levels: tuple[GridLevel, ...]

    @staticmethod
    def build(image_height: int, image_width: int,
              strides=(8, 16, 32)) -> "AnchorGrid":
        return AnchorGrid(tuple(
            GridLevel(stride=s,
                      height=math.ceil(image_height / s),
                      width=math.ceil(image_width / s))
            for s in strides))


@dataclass(frozen=True)
class FeatureMap:
    """Dense (channels, height, width) tensor plus its pixel stride."""

    values: np.ndarray
    stride: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError("values must be (channels, height, width)")
        if self.stride <= 0:
            raise ValueError("stride must be positive")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def encode_center_offset(c, cell: tuple[int, int, int],
                         grid: AnchorGrid) -> np.ndarray:
    """Stride-normalized offset from the cell center to the point c;
    cell = (level, row, col)."""
    level, i, j = cell
    if not 0 <= level < len(grid.levels):
        raise ValueError(f"level {level} outside grid")
    lvl = grid.levels[level]
    return (np.asarray(c, dtype=np.float64) - lvl.center(i, j)) / lvl.stride


def decode_center(offsets, grid: AnchorGrid) -> list[np.ndarray]:
    """Absolute center coordinates from per-cell offsets.

    offsets is one (height, width, 2) array per level; returns arrays of the
    same shape holding cell_center + offset * stride via the coordinate maps.
    """
    if len(offsets) != len(grid.levels):
        raise ValueError("need one offset map per grid level")
    out = []
    for off, lvl in zip(offsets, grid.levels):
        off = np.asarray(off, dtype=np.float64)
        if off.shape != (lvl.height, lvl.width, 2):
            raise ValueError(
                f"offset map shape {off.shape} does not match level "
                f"{lvl.height}x{lvl.width}")
        absolute = np.empty_like(off)
        absolute[:, :, 0] = lvl.x_map() + off[:, :, 0] * lvl.stride
        absolute[:, :, 1] = lvl.y_map() + off[:, :, 1] * lvl.stride
        out.append(absolute)
    return out


# ------------------------------------------------------------ conv ops

def silu(x: np.ndarray) -> np.ndarray:
    """x * sigmoid(x)."""
    return x / (1.0 + np.exp(-x))


def group_norm(x: np.ndarray, n_groups: int, gamma: np.ndarray,
               beta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Per-group normalization to mean 0 / variance 1 over (channels-in-group,
    h, w), followed by the per-channel learned affine."""
    c, h, w = x.shape
    if c % n_groups != 0:
        raise ValueError(f"{c} channels not divisible into {n_groups} groups")
    grouped = x.reshape(n_groups, c // n_groups, h, w)
    mean = grouped.mean(axis=(1, 2, 3), keepdims=True)
    var = grouped.var(axis=(1, 2, 3), keepdims=True)
    normed = ((grouped - mean) / np.sqrt(var + eps)).reshape(c, h, w)
    return gamma[:, None, None] * normed + beta[:, None, None]


def separable_conv2d(x: np.ndarray, depthwise: np.ndarray,
                     pointwise: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Depthwise 3x3 (same padding, zero border) then pointwise 1x1.

    depthwise: (c_in, 3, 3); pointwise: (c_out, c_in); bias: (c_out,).
    """
    c_in = x.shape[0]
    if depthwise.shape != (c_in, 3, 3):
        raise ValueError(f"depthwise kernel {depthwise.shape} does not match "
                         f"{c_in} input channels")
    if pointwise.shape[1] != c_in:
        raise ValueError(f"pointwise kernel {pointwise.shape} does not match "
                         f"{c_in} input channels")
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3),
                                                       axis=(1, 2))
    dw = np.einsum("chwij,cij->chw", windows, depthwise)
    return np.einsum("chw,oc->ohw", dw, pointwise) + bias[:, None, None]


@dataclass(frozen=True)
class ConvBlockWeights:
    depthwise: np.ndarray
    pointwise: np.ndarray
    bias: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray


def conv_block(x: np.ndarray, weights: ConvBlockWeights,
               n_groups: int) -> np.ndarray:
    """Depthwise-separable convolution, group normalization, SiLU."""
    out = separable_conv2d(x, weights.depthwise, weights.pointwise, weights.bias)
    return silu(group_norm(out, n_groups, weights.gamma, weights.beta))


# --------------------------------------------------------- refinement

@dataclass(frozen=True)
class RefineWeights:
    """d_iter conv blocks plus the linear depthwise-separable output layer."""

    blocks: tuple[ConvBlockWeights, ...]
    out_depthwise: np.ndarray
    out_pointwise: np.ndarray
    out_bias: np.ndarray


def _refine_shapes(cfg: ScalingConfig, feature_channels: int,
                   n_anchors: int) -> list[tuple[int, int]]:
    """(c_in, c_out) per conv block; the first block consumes the features
    concatenated with the n_anchors rotation vectors."""
    c_rot = 3 * n_anchors
    shapes = [(feature_channels + c_rot, cfg.w_bifpn)]
    shapes.extend((cfg.w_bifpn, cfg.w_bifpn) for _ in range(cfg.d_iter - 1))
    return shapes


def init_refine_weights(cfg: ScalingConfig, feature_channels: int,
                        n_anchors: int = 1, seed: int = 0,
                        scale: float = 0.05) -> RefineWeights:
    """Deterministic seeded uniform [-scale, scale] initialization."""
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    blocks = tuple(
        ConvBlockWeights(depthwise=u(c_in, 3, 3), pointwise=u(c_out, c_in),
                         bias=u(c_out), gamma=u(c_out), beta=u(c_out))
        for c_in, c_out in _refine_shapes(cfg, feature_channels, n_anchors))
    c_rot = 3 * n_anchors
    return RefineWeights(blocks=blocks,
                         out_depthwise=u(cfg.w_bifpn, 3, 3),
                         out_pointwise=u(c_rot, cfg.w_bifpn),
                         out_bias=u(c_rot))


def zero_refine_weights(cfg: ScalingConfig, feature_channels: int,
                        n_anchors: int = 1) -> RefineWeights:
    blocks = tuple(
        ConvBlockWeights(depthwise=np.zeros((c_in, 3, 3)),
                         pointwise=np.zeros((c_out, c_in)),
                         bias=np.zeros(c_out), gamma=np.zeros(c_out),
                         beta=np.zeros(c_out))
        for c_in, c_out in _refine_shapes(cfg, feature_channels, n_anchors))
    c_rot = 3 * n_anchors
    return RefineWeights(blocks=blocks,
                         out_depthwise=np.zeros((cfg.w_bifpn, 3, 3)),
                         out_pointwise=np.zeros((c_rot, cfg.w_bifpn)),
                         out_bias=np.zeros(c_rot))


def refine_rotation(features: np.ndarray, r_init: np.ndarray,
                    weights: RefineWeights, cfg: ScalingConfig) -> np.ndarray:
    """Iteratively add regressed corrections to the per-anchor rotations.

    Each of the n_iter passes concatenates the current rotation map onto the
    feature tensor, runs the d_iter conv blocks, regresses a correction with
    the linear output layer, and adds it to the rotation.
    """
    features = np.asarray(features, dtype=np.float64)
    r = np.asarray(r_init, dtype=np.float64)
    if features.ndim != 3 or r.ndim != 3:
        raise ValueError("features and r_init must be (channels, h, w)")
    if features.shape[1:] != r.shape[1:]:
        raise ValueError("features and r_init spatial sizes differ")
    if r.shape[0] % 3 != 0:
        raise ValueError("r_init needs 3 channels per anchor")
    if len(weights.blocks) != cfg.d_iter:
        raise ValueError(f"expected {cfg.d_iter} conv blocks, "
                         f"got {len(weights.blocks)}")
    c_concat = features.shape[0] + r.shape[0]
    if weights.blocks[0].depthwise.shape[0] != c_concat:
        raise ValueError(
            f"first block expects {weights.blocks[0].depthwise.shape[0]} "
            f"channels, concatenation has {c_concat}")
    for _ in range(cfg.n_iter):
        x = np.concatenate([features, r], axis=0)
        for block in weights.blocks:
            x = conv_block(x, block, cfg.n_groups)
        delta = separable_conv2d(x, weights.out_depthwise,
                                 weights.out_pointwise, weights.out_bias)
        r = r + delta
    return r


# ---------------------------------------------------------------- NMS

@dataclass(frozen=True)
class Detection:
    class_id: int
    score: float
    bbox: np.ndarray  # (x1, y1, x2, y2) pixels
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        box = np.asarray(self.bbox, dtype=np.float64)
        if box.shape != (4,) or box[0] >= box[2] or box[1] >= box[3]:
            raise ValueError(f"bad bbox {box}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")
        object.__setattr__(self, "bbox", box)
        object.__setattr__(self, "rotation",
                           np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=np.float64))


def box_iou(a: np.ndarray, b: np.ndarray) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = ((a[2] - a[0]) * (a[3] - a[1])
             + (b[2] - b[0]) * (b[3] - b[1]) - inter)
    return inter / union if union > 0 else 0.0


def nms(detections, iou_threshold: float) -> list[Detection]:
    """Greedy score-descending suppression, applied per class.

    A detection is dropped when its IoU with an already kept detection of
    the same class exceeds the threshold.  Ties in score break by input
    order, so the result is deterministic.
    """
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i].score, i))
    kept: list[Detection] = []
    for i in order:
        cand = detections[i]
        if any(k.class_id == cand.class_id
               and box_iou(cand.bbox, k.bbox) > iou_threshold for k in kept):
            continue
        kept.append(cand)
    return kept


# -------------------------------------------------------- weights file

def save_weights(tensors: dict[str, np.ndarray], path) -> None:
    """Text header (one `name dim...` line per tensor, then `end`) followed
    by the concatenated little-endian float32 payloads in header order."""
    header = [f"tensors {len(tensors)}"]
    blobs = []
    for name, arr in tensors.items():
        if any(ch.isspace() for ch in name):
            raise ValueError(f"tensor name {name!r} contains whitespace")
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        header.append(" ".join([name] + [str(d) for d in arr32.shape]))
        blobs.append(arr32.tobytes())
    header.append("end")
    Path(path).write_bytes("\n".join(header).encode() + b"\n" + b"".join(blobs))


def load_weights(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    pos = 0

    def line() -> str:
        nonlocal pos
        end = data.index(b"\n", pos)
        out = data[pos:end].decode()
        pos = end + 1
        return out

    first = line().split()
    if len(first) != 2 or first[0] != "tensors":
        raise ValueError(f"{path}: bad weights header")
    entries = []
    for _ in range(int(first[1])):
        parts = line().split()
        entries.append((parts[0], tuple(int(d) for d in parts[1:])))
    if line() != "end":
        raise ValueError(f"{path}: missing end marker")
    out: dict[str, np.ndarray] = {}
    for name, shape in entries:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        pos += 4 * count
        out[name] = arr.reshape(shape).copy()
    return out


def refine_weights_to_dict(weights: RefineWeights) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for idx, block in enumerate(weights.blocks):
        for field in ("depthwise", "pointwise", "bias", "gamma", "beta"):
            out[f"block{idx}.{field}"] = getattr(block, field)
    out["out.depthwise"] = weights.out_depthwise
    out["out.pointwise"] = weights.out_pointwise
    out["out.bias"] = weights.out_bias
    return out


def refine_weights_from_dict(tensors: dict[str, np.ndarray]) -> RefineWeights:
    n_blocks = sum(1 for name in tensors if name.endswith(".depthwise")
                   and name.startswith("block"))
    blocks = tuple(
        ConvBlockWeights(*(np.asarray(tensors[f"block{i}.{f}"], dtype=np.float64)
                           for f in ("depthwise", "pointwise", "bias",
                                     "gamma", "beta")))
        for i in range(n_blocks))
    return RefineWeights(
        blocks=blocks,
        out_depthwise=np.asarray(tensors["out.depthwise"], dtype=np.float64),
        out_pointwise=np.asarray(tensors["out.pointwise"], dtype=np.float64),
        out_bias=np.asarray(tensors["out.bias"], dtype=np.float64))
