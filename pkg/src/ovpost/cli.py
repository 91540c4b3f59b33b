"""Command-line interface.

Subcommands: rescore, suppress, nms, sample, eval, synth, sweep, pipeline.
Exit codes: 0 success, 1 validation failure (including rejected records
without --strict), 2 parse failure, 3 infeasible or degenerate computation.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

from . import formats
from .config import Config
from .errors import (
    DegenerateBox,
    DegenerateInput,
    EmptySplit,
    FormatWarning,
    InfeasibleSample,
    InfeasibleSpec,
    InsufficientScenes,
    MissingCategory,
    MissingSceneEmbedding,
    OvpostError,
    ParseError,
    ValidationError,
)
from .pipeline import PipelineInputs, run_pipeline, save_sweep, sweep, sweep_table
from .sampling import probe_bins
from .suppression import apply_pos, group_by_image_category, nms, PosDiagnostics
from .synth import DetectorNoise, SyntheticWorldSpec, generate_synthetic_world, render_images

_INFEASIBLE = (
    DegenerateBox,
    DegenerateInput,
    EmptySplit,
    InfeasibleSample,
    InfeasibleSpec,
    InsufficientScenes,
    MissingCategory,
    MissingSceneEmbedding,
)


def _load_config(args) -> Config:
    config = Config.load(args.config) if args.config else Config()
    if args.seed is not None:
        config = config.replaced(seed=args.seed)
    return config


def _world_path(args, name: str, explicit) -> Path | None:
    if explicit:
        return Path(explicit)
    if getattr(args, "world", None):
        candidate = Path(args.world) / name
        if candidate.exists():
            return candidate
    return None


def _load_inputs(args, config: Config, need_embeddings: bool) -> PipelineInputs:
    det_path = _world_path(args, "detections.json", args.detections)
    ann_path = _world_path(args, "annotations.json", getattr(args, "annotations", None))
    split_path = _world_path(args, "split.json", args.split)
    if split_path is None:
        raise ValidationError("--split (or --world with split.json) is required")
    split = formats.load_split(split_path)
    annotations = formats.load_annotations(ann_path, strict=args.strict) if ann_path else None
    detections = formats.load_detections(det_path, strict=args.strict) if det_path else None

    class_path = _world_path(args, "class_table.embtab", getattr(args, "class_table", None))
    scene_path = _world_path(args, "scene_table.embtab", getattr(args, "scene_table", None))
    ctx_path = _world_path(args, "scene_contexts.txt", getattr(args, "scene_contexts", None))
    if need_embeddings and (class_path is None or scene_path is None or ctx_path is None):
        raise ValidationError(
            "re-scoring needs --class-table, --scene-table, and --scene-contexts"
        )
    regions_path = getattr(args, "regions", None)
    manifest_path = getattr(args, "manifest", None)
    fixed_bg_path = getattr(args, "fixed_bg", None)
    return PipelineInputs(
        split=split,
        detections=detections,
        annotations=annotations,
        class_table=formats.load_embedding_table(class_path) if class_path else None,
        scene_table=formats.load_embedding_table(scene_path) if scene_path else None,
        scene_contexts=formats.load_scene_contexts(ctx_path) if ctx_path else (),
        regions=formats.load_embedding_table(regions_path) if regions_path else None,
        manifest=formats.load_manifest(manifest_path) if manifest_path else None,
        fixed_bg=formats.load_embedding_table(fixed_bg_path) if fixed_bg_path else None,
    )


def _cmd_nms(args) -> int:
    config = _load_config(args)
    iou_thr = args.iou if args.iou is not None else config.nms_iou
    dets = formats.load_detections(args.detections, strict=args.strict)
    groups = group_by_image_category(dets)
    out = []
    for key in sorted(groups, key=repr):
        out.extend(nms(groups[key], iou_thr))
    formats.save_detections(out, args.output)
    print(f"nms: {len(dets)} -> {len(out)} detections")
    return 0


def _cmd_suppress(args) -> int:
    config = _load_config(args)
    theta = args.theta if args.theta is not None else config.theta
    scope = args.scope if args.scope else config.pos_scope
    dets = formats.load_detections(args.detections, strict=args.strict)
    split = formats.load_split(args.split)
    diagnostics = PosDiagnostics()
    by_image: dict = {}
    for d in dets:
        by_image.setdefault(d.image_id, []).append(d)
    out = []
    for image_id in sorted(by_image, key=repr):
        out.extend(apply_pos(by_image[image_id], split, theta, scope, diagnostics))
    formats.save_detections(out, args.output)
    print(f"pos: {len(dets)} -> {len(out)} detections")
    if diagnostics.unknown_category_detections:
        print(
            f"pos: {diagnostics.unknown_category_detections} detections in "
            f"unknown categories passed through",
            file=sys.stderr,
        )
    return 0


def _cmd_rescore(args) -> int:
    config = _load_config(args)
    inputs = _load_inputs(args, config, need_embeddings=True)
    if inputs.detections is None:
        raise ValidationError("--detections is required")
    run_config = config.replaced(pos_enabled=False)
    result = run_pipeline(run_config, inputs, emit_dir=args.emit_stages)
    rescored = result.stages.get("rescored", result.stages["input"])
    formats.save_detections(rescored, args.output)
    print(f"rescore: wrote {len(rescored)} detections (alpha={run_config.alpha})")
    return 0


def _parse_bins(text: str) -> list[tuple[float, float]]:
    bins = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ValidationError(f"bad bin {part!r}; expected lo:hi")
        bins.append((float(lo), float(hi)))
    return bins


def _cmd_sample(args) -> int:
    config = _load_config(args)
    ann = formats.load_annotations(args.annotations, strict=args.strict)
    bins = _parse_bins(args.bins)
    gts = []
    for g in ann.gts:
        if g.crowd_flag:
            continue
        if g.image_id not in ann.images:
            raise ValidationError(f"gt references unknown image {g.image_id!r}")
        w, h = ann.images[g.image_id]
        gts.append((g.image_id, g.bbox, w, h))
    result = probe_bins(gts, bins, args.per_bin, args.kind, seed=config.seed)
    formats.save_manifest(result, args.output)
    print(
        f"sample: {len(result.samples)} {args.kind} regions over {len(bins)} bins "
        f"({len(result.failures)} infeasible)"
    )
    return 0


def _cmd_eval(args) -> int:
    from .evaluation import evaluate

    config = _load_config(args)
    dets = formats.load_detections(args.detections, strict=args.strict)
    ann = formats.load_annotations(args.annotations, strict=args.strict)
    split = formats.load_split(args.split)
    report = evaluate(
        dets,
        ann.gts,
        split,
        iou_thr=args.iou_thr if args.iou_thr is not None else config.eval_iou_thr,
        max_dets=config.eval_max_dets,
    )
    if args.output:
        formats.save_report(report, args.output)
    print(formats.report_table(report))
    return 0


def _cmd_synth(args) -> int:
    config = _load_config(args)
    if args.spec:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        noise = DetectorNoise(**raw.pop("detector_noise", {}))
        raw.setdefault("seed", config.seed)
        if "objects_per_image" in raw:
            raw["objects_per_image"] = tuple(raw["objects_per_image"])
        spec = SyntheticWorldSpec(detector_noise=noise, **raw)
    else:
        spec = SyntheticWorldSpec(seed=config.seed)
    world = generate_synthetic_world(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    formats.save_annotations(world.annotations, out / "annotations.json")
    formats.save_detections(world.detections, out / "detections.json")
    formats.save_embedding_table(world.class_table, out / "class_table.embtab")
    formats.save_embedding_table(world.scene_table, out / "scene_table.embtab")
    formats.save_scene_contexts(world.scene_contexts, out / "scene_contexts.txt")
    formats.save_split(world.split, out / "split.json")
    payload = asdict(spec)
    payload["objects_per_image"] = list(payload["objects_per_image"])
    (out / "spec.json").write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    if args.render_images:
        render_images(world, out / "images")
    print(
        f"synth: {len(world.annotations.gts)} gts, {len(world.detections)} detections "
        f"over {spec.n_images} images -> {out}"
    )
    return 0


def _cmd_pipeline(args) -> int:
    config = _load_config(args)
    if args.no_pos:
        config = config.replaced(pos_enabled=False)
    if args.alpha is not None:
        config = config.replaced(alpha=args.alpha)
    if args.theta is not None:
        config = config.replaced(theta=args.theta)
    need_embeddings = config.alpha > 0.0 and args.regions is None
    inputs = _load_inputs(args, config, need_embeddings=need_embeddings)
    result = run_pipeline(config, inputs, emit_dir=args.emit_stages)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    formats.save_detections(result.detections, out / "refined.json")
    if result.report is not None:
        formats.save_report(result.report, out / "report.json")
        print(formats.report_table(result.report))
    if result.region_scores is not None:
        (out / "region_scores.json").write_text(
            json.dumps(result.region_scores, sort_keys=True, indent=1) + "\n",
            encoding="utf-8",
        )
    print(f"pipeline: wrote {len(result.detections)} refined detections -> {out}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    grid = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    inputs = _load_inputs(args, config, need_embeddings=True)
    rows = sweep(config, inputs, grid)
    save_sweep(rows, args.output)
    print(sweep_table(rows))
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config JSON path")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--strict", action="store_true", help="reject files with any bad record")
    p.add_argument("--emit-stages", default=None, help="directory for stage dumps")


def _add_world_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--world", help="directory produced by `synth` (fills default paths)")
    p.add_argument("--detections", help="COCO results JSON")
    p.add_argument("--annotations", help="COCO annotations JSON")
    p.add_argument("--split", help="category split JSON")
    p.add_argument("--class-table", dest="class_table", help="category embtab")
    p.add_argument("--scene-table", dest="scene_table", help="prompted scene embtab")
    p.add_argument("--scene-contexts", dest="scene_contexts", help="scene-context file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovpost",
        description="Open-vocabulary detection post-processing toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nms", help="classic per-category NMS")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--iou", type=float, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_nms)

    p = sub.add_parser("suppress", help="partial-object suppression")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--scope", choices=["novel_only", "all_categories"], default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_suppress)

    p = sub.add_parser("rescore", help="background-similarity score re-scoring")
    _add_common(p)
    _add_world_inputs(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_rescore)

    p = sub.add_parser("sample", help="draw oversized/partial probe regions")
    _add_common(p)
    p.add_argument("--annotations", required=True)
    p.add_argument("--kind", choices=["oversized", "partial"], required=True)
    p.add_argument("--bins", required=True, help="comma list of lo:hi IoU ranges")
    p.add_argument("--per-bin", dest="per_bin", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval", help="AP50 with base/novel/all split means")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--iou-thr", dest="iou_thr", type=float, default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic world")
    _add_common(p)
    p.add_argument("--spec", help="SyntheticWorldSpec JSON")
    p.add_argument("--render-images", action="store_true", help="write PPM images + palette")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pipeline", help="rescore -> NMS -> POS -> evaluate")
    _add_common(p)
    _add_world_inputs(p)
    p.add_argument("--regions", help="region-embedding embtab (enables region scoring)")
    p.add_argument("--manifest", help="sample manifest for --regions")
    p.add_argument("--fixed-bg", dest="fixed_bg", help="single-row embtab used as fixed background")
    p.add_argument("--no-pos", dest="no_pos", action="store_true")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("sweep", help="grid of pipeline runs (ablation tables)")
    _add_common(p)
    _add_world_inputs(p)
    p.add_argument("--grid", required=True, help="JSON of parameter lists")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    rejected = 0
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = args.func(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
            if issubclass(w.category, FormatWarning):
                rejected += 1
        if rejected and code == 0:
            print(f"warning: {rejected} records rejected", file=sys.stderr)
            return 1
        return code
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except _INFEASIBLE as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, OvpostError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
