"""Kernel backend selection.

Prefers the compiled extension (posekit._kernels, built from Cython) and
falls back to the numpy implementation when the extension is missing.  Both
expose the same functions; benchmarks/bench_kernels.py compares them.
"""

from . import _kernels_np

try:
    from . import _kernels as _impl  # type: ignore[attr-defined]
except ImportError:
    _impl = _kernels_np

BACKEND = _impl.NAME

rotate_points = _impl.rotate_points
transform_points = _impl.transform_points
asym_loss = _impl.asym_loss
asym_loss_grad = _impl.asym_loss_grad
sym_loss = _impl.sym_loss
sym_loss_grad = _impl.sym_loss_grad
max_pairwise_distance = _impl.max_pairwise_distance
warp_affine_rgb8 = _impl.warp_affine_rgb8


def available_backends() -> dict[str, object]:
    """Importable kernel modules keyed by backend name."""
    mods: dict[str, object] = {_kernels_np.NAME: _kernels_np}
    if _impl is not _kernels_np:
        mods[_impl.NAME] = _impl
    return mods
