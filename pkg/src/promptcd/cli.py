"""Command-line entry point.

Subcommands: detect (run the prompt-based detector on one scene), synth
(generate a synthetic corpus), eval (run detect over a corpus and emit
metrics), baseline-rcva (change-vector baseline on an image pair), and
derive (build mask/reference files from per-date semantic maps).

Exit codes: 0 success, 2 input error, 3 backend error. All randomness
is controlled by --seed (default 0, never wall clock); no environment
variables are consulted.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import raster
from .detector import DetectorConfig, detect_changes, render_change_map
from .errors import BackendError, GenerationError, InputError
from .harness import (
    ScenePair,
    SceneSpec,
    generate_scene,
    load_scene,
    derive_masks,
    object_sets_match,
    read_corpus,
    score,
    write_corpus,
)
from .onnx_backend import open_model_dir
from .rcva import otsu_threshold, rcva_magnitude
from .segmenter import MockSegmenter
from .serialize import dumps_stable


def _num_changed(value: str) -> int | None:
    if value == "auto":
        return None
    try:
        count = int(value)
    except ValueError:
        raise InputError(f"--num-changed must be an integer or 'auto', got {value!r}")
    if count < 0:
        raise InputError("--num-changed must be >= 0")
    return count


def _object_range(value: str) -> tuple[int, int]:
    try:
        if "-" in value:
            lo_s, hi_s = value.split("-", 1)
            lo, hi = int(lo_s), int(hi_s)
        else:
            lo = hi = int(value)
    except ValueError:
        raise InputError(f"--objects must be N or LO-HI, got {value!r}")
    if lo < 0 or hi < lo:
        raise InputError(f"--objects range invalid: {value!r}")
    return lo, hi


def _make_backend(args: argparse.Namespace, scene: ScenePair | None = None):
    if args.backend == "mock":
        if scene is not None and scene.post_semantic is not None:
            semantic = scene.post_semantic
            target = scene.target_class
        elif args.semantic:
            semantic = raster.load_semantic(args.semantic)
            target = args.target_class
        else:
            raise InputError(
                "mock backend requires --semantic (or a scene with post_semantic.png)"
            )
        return MockSegmenter(
            semantic, target, noise_sigma=args.sigma, noise_seed=args.seed
        )
    if not args.model_dir:
        raise InputError("onnx backend requires --model-dir")
    return open_model_dir(args.model_dir)


def _detector_config(args: argparse.Namespace) -> DetectorConfig:
    return DetectorConfig(
        points_per_object=args.points,
        min_area=args.min_area,
        connectivity=args.connectivity,
        delta=args.delta,
        seed=args.seed,
    )


def _add_detect_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("mock", "onnx"), default="mock",
                        help="segmentation backend")
    parser.add_argument("--semantic", help="ground-truth semantic map PNG (mock backend)")
    parser.add_argument("--target-class", type=int, default=1,
                        help="semantic class id of intact objects (mock backend)")
    parser.add_argument("--sigma", type=float, default=0.0,
                        help="mock confidence noise std dev")
    parser.add_argument("--model-dir",
                        help="directory with encoder.onnx / decoder.onnx (onnx backend)")
    parser.add_argument("--num-changed", default="1",
                        help="expected number of disappeared objects, or 'auto'")
    parser.add_argument("--delta", type=float, default=0.1,
                        help="confidence margin for the auto stopping rule")
    parser.add_argument("--points", type=int, default=3,
                        help="point prompts sampled per object")
    parser.add_argument("--min-area", type=int, default=20,
                        help="ignore objects smaller than this many pixels (1 disables)")
    parser.add_argument("--connectivity", type=int, choices=(4, 8), default=8,
                        help="pixel connectivity for object labeling")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")


def _run_scene(
    scene: ScenePair, backend, num_changed: int | None, config: DetectorConfig
):
    report, labeled = detect_changes(
        scene.pre_mask, scene.post_image, backend, num_changed, config
    )
    change_map = render_change_map(report, labeled)
    return report, change_map


def cmd_detect(args: argparse.Namespace) -> int:
    num_changed = _num_changed(args.num_changed)
    config = _detector_config(args)
    mask = raster.load_mask(args.mask)
    image = raster.load_rgb(args.image)
    backend = _make_backend(args)
    report, labeled = detect_changes(mask, image, backend, num_changed, config)
    if args.backend == "mock":
        report.config_echo["sigma"] = args.sigma
        report.config_echo["target_class"] = args.target_class
    else:
        report.config_echo["model_dir"] = args.model_dir
    change_map = render_change_map(report, labeled)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if args.map:
        raster.save_mask(args.map, change_map)
    margins = ", ".join(f"{m:.6f}" for m in report.margins) or "-"
    labels = ", ".join(str(l) for l in report.changed_labels) or "none"
    print(f"changed: {labels} (margins: {margins}; ignored: {len(report.ignored_labels)})")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    lo, hi = _object_range(args.objects)
    if args.disappeared > lo:
        raise InputError(
            f"--disappeared {args.disappeared} exceeds minimum object count {lo}"
        )
    rng = np.random.Generator(np.random.PCG64(args.seed))
    scenes = []
    for index in range(args.scenes):
        n_objects = int(rng.integers(lo, hi + 1))
        scene_seed = int(rng.integers(0, 2**31))
        spec = SceneSpec(
            width=args.width,
            height=args.height,
            n_objects=n_objects,
            n_disappeared=args.disappeared,
            distractors=args.distractors,
            seed=scene_seed,
            min_size=args.min_size,
            max_size=args.max_size,
        )
        scenes.append(generate_scene(spec, scene_id=f"scene_{index:04d}"))
    echo = {
        "scenes": args.scenes,
        "width": args.width,
        "height": args.height,
        "objects": args.objects,
        "disappeared": args.disappeared,
        "distractors": args.distractors,
        "min_size": args.min_size,
        "max_size": args.max_size,
        "seed": args.seed,
    }
    write_corpus(args.out, scenes, echo)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    num_changed_arg = args.num_changed
    if num_changed_arg not in ("meta", "auto"):
        _num_changed(num_changed_arg)  # validate early
    config = _detector_config(args)
    scene_ids = read_corpus(args.corpus)

    def evaluate(scene_id: str) -> dict:
        scene = load_scene(os.path.join(args.corpus, "scenes", scene_id))
        if num_changed_arg == "meta":
            expected = scene.meta.get("disappeared_labels")
            if expected is None:
                raise InputError(
                    f"scene {scene_id} has no disappeared_labels in meta.json; "
                    "use --num-changed auto or an integer"
                )
            num_changed = len(expected)
        else:
            num_changed = _num_changed(num_changed_arg)
        backend = _make_backend(args, scene)
        report, change_map = _run_scene(scene, backend, num_changed, config)
        metrics = score(change_map, scene.reference_change)
        expected_labels = sorted(scene.meta.get("disappeared_labels", []))
        return {
            "scene_id": scene_id,
            "changed": list(report.changed_labels),
            "expected": expected_labels,
            "object_match": object_sets_match(report.changed_labels, expected_labels),
            "pixel_iou": metrics.pixel_iou,
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
        }

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(evaluate, scene_ids))
    else:
        rows = [evaluate(scene_id) for scene_id in scene_ids]
    rows.sort(key=lambda row: row["scene_id"])

    aggregate = {
        "scenes": len(rows),
        "object_accuracy": sum(row["object_match"] for row in rows) / len(rows),
        "mean_pixel_iou": float(np.mean([row["pixel_iou"] for row in rows])),
        "mean_precision": float(np.mean([row["precision"] for row in rows])),
        "mean_recall": float(np.mean([row["recall"] for row in rows])),
        "mean_f1": float(np.mean([row["f1"] for row in rows])),
    }
    payload = {
        "scenes": rows,
        "aggregate": aggregate,
        "config": {
            "backend": args.backend,
            "num_changed": num_changed_arg,
            "points_per_object": args.points,
            "min_area": args.min_area,
            "connectivity": args.connectivity,
            "delta": args.delta,
            "sigma": args.sigma,
            "seed": args.seed,
        },
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dumps_stable(payload) + "\n")
    print(
        f"evaluated {len(rows)} scenes: object_accuracy="
        f"{aggregate['object_accuracy']:.4f} mean_iou={aggregate['mean_pixel_iou']:.4f}"
    )
    return 0


def cmd_baseline_rcva(args: argparse.Namespace) -> int:
    pre = raster.load_rgb(args.pre)
    post = raster.load_rgb(args.post)
    magnitude = rcva_magnitude(pre, post, window=args.window)
    threshold, change_mask = otsu_threshold(magnitude)
    if args.out_map:
        raster.save_magnitude_u16(args.out_map, magnitude)
    raster.save_mask(args.out_mask, change_mask)
    print(
        f"threshold: {threshold:.6f}; changed pixels: {int(change_mask.sum())}"
    )
    return 0


def cmd_derive(args: argparse.Namespace) -> int:
    derive_masks(args.scene, args.class_id)
    print(f"derived pre_mask.png and ref_change.png in {args.scene}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptcd",
        description="Detect disappeared objects from a pre-change mask and a "
        "post-change image via leave-one-out point prompting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect disappeared objects in one scene")
    p.add_argument("--mask", required=True, help="pre-change binary mask PNG")
    p.add_argument("--image", required=True, help="post-change RGB image PNG")
    _add_detect_options(p)
    p.add_argument("--out", help="write the change report JSON here")
    p.add_argument("--map", help="write the change map PNG here")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="generate a synthetic scene corpus")
    p.add_argument("--scenes", type=int, required=True, help="number of scenes")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--objects", default="5", help="objects per scene: N or LO-HI")
    p.add_argument("--disappeared", type=int, default=1)
    p.add_argument("--distractors", type=int, default=0)
    p.add_argument("--min-size", type=int, default=12, help="minimum building side")
    p.add_argument("--max-size", type=int, default=28, help="maximum building side")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="corpus output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="run detection over a corpus and score it")
    p.add_argument("--corpus", required=True, help="corpus root directory")
    _add_detect_options(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel scene workers")
    p.add_argument("--out", required=True, help="metrics JSON output path")
    p.set_defaults(func=cmd_eval, num_changed="meta")

    p = sub.add_parser("baseline-rcva", help="change-vector-analysis baseline")
    p.add_argument("--pre", required=True, help="pre-change RGB image PNG")
    p.add_argument("--post", required=True, help="post-change RGB image PNG")
    p.add_argument("--window", type=int, default=3, help="odd neighborhood size")
    p.add_argument("--out-map", help="optional 16-bit magnitude map PNG")
    p.add_argument("--out-mask", required=True, help="thresholded change mask PNG")
    p.set_defaults(func=cmd_baseline_rcva)

    p = sub.add_parser("derive", help="derive masks from per-date semantic maps")
    p.add_argument("--scene", required=True, help="scene directory")
    p.add_argument("--class-id", type=int, required=True,
                   help="semantic class id of the objects of interest")
    p.set_defaults(func=cmd_derive)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
