"""Command-line interface: synth | augment | eval | fit | render | selftest.

Exit status: 0 on success, 1 on operational failure (bad file, divergence,
failed selftest), 2 on usage errors (argparse's convention).  Every command
is deterministic for a given --seed; config files are line-oriented
`key value` pairs and paths are taken relative to the working directory.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import AnnotatedFrame, AugmentParams, augment_pose, color_augment, warp_image
from .fit import FitConfig, ablation_table, run_trials, success_rate, write_trials_csv
from .formats import (
    camera_from_key_values,
    read_annotations,
    read_key_values,
    read_manifest,
    read_ppm,
    read_predictions,
    write_annotations,
    write_ppm,
)
from .geometry import load_object_model
from .metrics import evaluate
from .selftest import run_suites
from .synth import PALETTE, ShapeSpec, make_model, parse_scene_spec, render_cuboid_overlay, write_dataset

STANDARD_SHAPES = {
    "box": ShapeSpec(id="box", kind="box", size=(90.0, 70.0, 50.0),
                     points=800, seed=1),
    "cylinder": ShapeSpec(id="cylinder", kind="cylinder", size=(40.0, 120.0),
                          points=400, seed=7),
    "blob": ShapeSpec(id="blob", kind="blob", size=(35.0,), points=500, seed=2),
}

GT_COLOR = (0, 255, 0)
PRED_COLORS = ((60, 60, 255),) + PALETTE


@dataclass
class _GtFrame:
    annotations: tuple


def cmd_synth(args) -> int:
    spec, default_frames = parse_scene_spec(args.spec)
    n_frames = args.frames if args.frames is not None else default_frames
    manifest = write_dataset(spec, n_frames, args.seed, args.out)
    print(f"wrote {len(manifest.frames)} frames, {len(manifest.models)} "
          f"models to {args.out}")
    return 0


def cmd_augment(args) -> int:
    image = read_ppm(args.image)
    camera = camera_from_key_values(read_key_values(args.camera))
    annotations = read_annotations(args.ann)
    frame = AnnotatedFrame(image=image, intrinsics=camera,
                           annotations=tuple(annotations))
    rng = np.random.default_rng(args.seed)
    params = AugmentParams()
    theta = args.theta if args.theta is not None \
        else float(rng.uniform(*params.theta_range))
    scale = args.scale if args.scale is not None \
        else float(rng.uniform(*params.scale_range))
    out_image = warp_image(frame.image, theta, scale, camera)
    out_annotations = [(model_id, augment_pose(pose, theta, scale))
                       for model_id, pose in frame.annotations]
    if args.color == "on":
        out_image = color_augment(out_image, rng)
    write_ppm(out_image, args.out_image)
    write_annotations(out_annotations, args.out_ann)
    print(f"theta={theta} scale={scale} color={args.color}")
    return 0


def _find_manifest(dataset: str) -> Path:
    path = Path(dataset)
    if path.is_dir():
        path = path / "dataset.manifest"
    if not path.exists():
        raise ValueError(f"no manifest at {path}")
    return path


def cmd_eval(args) -> int:
    manifest = read_manifest(_find_manifest(args.dataset))
    models = {}
    for model_path in manifest.models:
        model = load_object_model(model_path)
        models[model.id] = model
    gt_frames = [_GtFrame(annotations=tuple(read_annotations(ann)))
                 for _, ann in manifest.frames]
    predictions = read_predictions(args.pred, n_frames=len(gt_frames))
    report = evaluate(gt_frames, predictions, models)
    print(report.format_table())
    print()
    print(report.format_key_values())
    return 0


def cmd_fit(args) -> int:
    if args.model:
        model = load_object_model(args.model)
    else:
        model = make_model(STANDARD_SHAPES[args.shape])
    cfg = FitConfig(max_iterations=args.max_iterations)
    if args.ablation:
        table, _ = ablation_table(model, n_trials=args.trials, cfg=cfg,
                                  seed=args.seed)
        print(table)
        return 0
    rows = run_trials(model, args.trials, cfg, seed=args.seed,
                      init_mode=args.init_mode)
    write_trials_csv(rows, args.out, cfg, model_id=model.id,
                     notes=f"init_mode={args.init_mode} seed={args.seed}")
    rate = success_rate(rows, model.diameter)
    n_diverged = sum(1 for r in rows if r.status == "diverged")
    print(f"{len(rows)} trials, success rate {100.0 * rate:.1f}% "
          f"(final ADD < 1% of diameter {model.diameter:.1f} mm)")
    if n_diverged:
        print(f"error: {n_diverged} trial(s) diverged", file=sys.stderr)
        return 1
    return 0


def cmd_render(args) -> int:
    image = read_ppm(args.image)
    camera = camera_from_key_values(read_key_values(args.camera))
    models = {}
    for path in args.model:
        model = load_object_model(path)
        models[model.id] = model

    def overlay(img, ann_path, colors):
        for idx, (model_id, pose) in enumerate(read_annotations(ann_path)):
            if model_id not in models:
                raise ValueError(f"no --model file for id {model_id!r}")
            img = render_cuboid_overlay(img, pose, models[model_id], camera,
                                        colors[idx % len(colors)])
        return img

    out = overlay(image, args.gt, (GT_COLOR,))
    if args.pred:
        out = overlay(out, args.pred, PRED_COLORS)
    write_ppm(out, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_selftest(args) -> int:
    return 0 if run_suites(seed=args.seed) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posekit",
        description="6D object-pose toolkit: synthetic data, augmentation, "
                    "evaluation, pose fitting, rendering, selftest")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="scene spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=None,
                   help="frame count (overrides the spec file)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="augment one frame and its poses")
    p.add_argument("--image", required=True, help="input PPM")
    p.add_argument("--ann", required=True, help="input annotation file")
    p.add_argument("--camera", required=True, help="camera key-value file")
    p.add_argument("--out-image", required=True)
    p.add_argument("--out-ann", required=True)
    p.add_argument("--theta", type=float, default=None,
                   help="rotation in degrees (sampled when omitted)")
    p.add_argument("--scale", type=float, default=None,
                   help="scale factor (sampled when omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--color", choices=("on", "off"), default="off")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", help="score predictions against a dataset")
    p.add_argument("--dataset", required=True,
                   help="dataset directory or manifest path")
    p.add_argument("--pred", required=True, help="prediction file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit", help="run seeded pose-recovery trials")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="trials.csv", help="output CSV")
    p.add_argument("--shape", choices=sorted(STANDARD_SHAPES), default="box")
    p.add_argument("--model", default=None,
                   help="model file (overrides --shape)")
    p.add_argument("--init-mode", choices=("perturb", "augment"),
                   default="perturb")
    p.add_argument("--max-iterations", type=int, default=2000)
    p.add_argument("--ablation", action="store_true",
                   help="print perturb-vs-augment success table")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("render", help="overlay pose cuboids on an image")
    p.add_argument("--image", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--model", action="append", required=True,
                   help="model file (repeatable)")
    p.add_argument("--gt", required=True,
                   help="ground-truth annotation file (drawn green)")
    p.add_argument("--pred", default=None,
                   help="predicted annotation file (other colors)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("selftest", help="run the independent oracle suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
