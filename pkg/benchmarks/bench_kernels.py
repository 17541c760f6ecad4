#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Each kernel runs on identical inputs under both backends; outputs are
cross-checked before timing so the speedups are for matching results.
"""

import argparse
import time

import numpy as np

from posekit import backend


def timer(fn, args, repeats):
    fn(*args)  # warmup
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def make_cases(rng):
    r_p = rng.normal(size=3)
    r_p /= np.linalg.norm(r_p)
    r_p *= 0.8
    r_g = rng.normal(size=3) * 0.3
    t_p = rng.uniform(-50, 50, size=3)
    t_g = rng.uniform(-50, 50, size=3)
    pts_large = np.ascontiguousarray(rng.uniform(-60, 60, size=(10_000, 3)))
    pts_loss = np.ascontiguousarray(rng.uniform(-60, 60, size=(500, 3)))
    pts_diam = np.ascontiguousarray(rng.uniform(-60, 60, size=(2_000, 3)))
    image = rng.integers(0, 256, size=(480, 640, 3), dtype=np.uint8)
    coeffs = np.array([0.9, 0.1, 3.0, -0.1, 0.9, 2.0])
    return {
        "rotate_points (10k pts)": ("rotate_points", (r_p, pts_large)),
        "asym_loss_grad (500 pts)": ("asym_loss_grad",
                                     (r_p, t_p, r_g, t_g, pts_loss)),
        "sym_loss_grad (500 pts)": ("sym_loss_grad",
                                    (r_p, t_p, r_g, t_g, pts_loss)),
        "max_pairwise_distance (2k pts)": ("max_pairwise_distance",
                                           (pts_diam,)),
        "warp_affine_rgb8 (640x480)": ("warp_affine_rgb8", (image, coeffs)),
    }


def check_agreement(mods, cases):
    names = sorted(mods)
    for label, (fn_name, args) in cases.items():
        outs = [getattr(mods[n], fn_name)(*args) for n in names]
        a, b = outs[0], outs[-1]
        if isinstance(a, tuple):
            for x, y in zip(a, b):
                np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-10)
        elif isinstance(a, np.ndarray) and a.dtype == np.uint8:
            np.testing.assert_array_equal(a, b)
        else:
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    mods = backend.available_backends()
    print(f"active backend: {backend.BACKEND}; "
          f"available: {', '.join(sorted(mods))}")
    if len(mods) < 2:
        print("compiled extension not built; timing the python backend only")

    cases = make_cases(np.random.default_rng(0))
    if len(mods) == 2:
        check_agreement(mods, cases)
        print("cross-backend agreement verified\n")

    col = max(len(label) for label in cases) + 2
    header = f"{'kernel':<{col}}" + "".join(f"{n:>14}" for n in sorted(mods))
    if len(mods) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, (fn_name, fn_args) in cases.items():
        times = {name: timer(getattr(mod, fn_name), fn_args, args.repeats)
                 for name, mod in mods.items()}
        row = f"{label:<{col}}"
        for name in sorted(mods):
            row += f"{times[name] * 1e6:>12.1f}us"
        if len(mods) == 2:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
