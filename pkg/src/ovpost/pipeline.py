"""End-to-end refinement: (regions ->) re-score -> NMS -> partial-object
suppression -> evaluation, plus the parameter sweep used for ablations."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Mapping, Sequence

import numpy as np

from .background import (
    BackgroundEmbedding,
    EmbeddingTable,
    RescoreTable,
    SceneContext,
    build_background_embedding,
    normalize_table,
    rescore_coefficients,
    rescore_detections,
    score_regions,
)
from .config import Config
from .errors import ValidationError
from .evaluation import EvalReport, GroundTruth, evaluate
from .formats import AnnotationSet, save_detections
from .sampling import ProbeResult
from .suppression import (
    CategorySplit,
    Detection,
    PosDiagnostics,
    apply_pos,
    group_by_image_category,
    nms,
)

__all__ = ["PipelineInputs", "PipelineResult", "run_pipeline", "sweep", "save_sweep"]


@dataclass
class PipelineInputs:
    split: CategorySplit
    detections: list[Detection] | None = None
    annotations: AnnotationSet | None = None
    class_table: EmbeddingTable | None = None
    scene_table: EmbeddingTable | None = None
    scene_contexts: Sequence[SceneContext] = ()
    regions: EmbeddingTable | None = None
    manifest: ProbeResult | None = None
    fixed_bg: EmbeddingTable | None = None


@dataclass
class PipelineResult:
    detections: list[Detection]
    report: EvalReport | None
    stages: dict[str, list[Detection]] = field(default_factory=dict)
    region_scores: dict | None = None
    rescore_tables: dict[Hashable, RescoreTable] = field(default_factory=dict)
    backgrounds: dict[Hashable, BackgroundEmbedding] = field(default_factory=dict)
    pos_diagnostics: PosDiagnostics = field(default_factory=PosDiagnostics)


def _unit(table: EmbeddingTable | None) -> EmbeddingTable | None:
    if table is None or table.normalized:
        return table
    return normalize_table(table)


def _id_maps(inputs: PipelineInputs) -> tuple[dict, dict]:
    if inputs.annotations is not None and inputs.annotations.categories:
        id_to_name = inputs.annotations.id_to_name
        return id_to_name, {v: k for k, v in id_to_name.items()}
    return {}, {}


def _fixed_background(table: EmbeddingTable) -> BackgroundEmbedding:
    if len(table) != 1:
        raise ValidationError(
            f"fixed background table must hold exactly 1 entry, got {len(table)}"
        )
    return BackgroundEmbedding(
        vector=table.vectors[0], source_scenes=(table.names[0],), k=1
    )


def _regions_to_detections(
    config: Config, inputs: PipelineInputs, result: PipelineResult
) -> list[Detection]:
    """Classify region embeddings and keep non-background argmax regions."""
    regions = _unit(inputs.regions)
    class_table = _unit(inputs.class_table)
    if class_table is None:
        raise ValidationError("region scoring requires a class table")
    if inputs.manifest is None:
        raise ValidationError("region scoring requires the sample manifest")
    boxes = {s.region_id: (s.image_id, s.box) for s in inputs.manifest.samples}
    missing = [n for n in regions.names if n not in boxes]
    if missing:
        raise ValidationError(f"regions missing from manifest: {missing[:5]}")

    _, name_to_id = _id_maps(inputs)
    columns = [name_to_id.get(n, n) for n in class_table.names]
    ctx_by_image = {c.image_id: c for c in inputs.scene_contexts}
    by_image: dict[Hashable, list[int]] = {}
    for i, name in enumerate(regions.names):
        by_image.setdefault(boxes[name][0], []).append(i)

    dets: list[Detection] = []
    rows: list[dict] = []
    scene_table = _unit(inputs.scene_table)
    for image_id in sorted(by_image, key=repr):
        idx = by_image[image_id]
        if inputs.fixed_bg is not None:
            bg = _fixed_background(_unit(inputs.fixed_bg))
        else:
            if image_id not in ctx_by_image or scene_table is None:
                raise ValidationError(
                    f"no scene context for image {image_id!r} and no fixed background"
                )
            bg = build_background_embedding(
                ctx_by_image[image_id],
                scene_table,
                config.k,
                template=config.prompt_template,
                renormalize=config.renormalize_bg,
            )
        probs = score_regions(
            regions.vectors[idx], class_table, bg, temperature=config.temperature
        )
        for row, i in enumerate(idx):
            name = regions.names[i]
            rows.append({"probs": [float(p) for p in probs[row]], "region_id": name})
            top = int(np.argmax(probs[row]))
            if top < len(columns):
                dets.append(
                    Detection(image_id, columns[top], boxes[name][1], float(probs[row, top]))
                )
    rows.sort(key=lambda r: r["region_id"])
    result.region_scores = {
        "columns": list(class_table.names) + ["__background__"],
        "rows": rows,
    }
    return dets


def _rescore_stage(
    config: Config,
    inputs: PipelineInputs,
    dets: list[Detection],
    result: PipelineResult,
) -> list[Detection]:
    class_table = _unit(inputs.class_table)
    scene_table = _unit(inputs.scene_table)
    ctx_by_image = {c.image_id: c for c in inputs.scene_contexts}
    if class_table is None or scene_table is None or not ctx_by_image:
        raise ValidationError(
            "re-scoring requires class table, scene table, and scene contexts"
        )
    id_to_name, _ = _id_maps(inputs)
    out: list[Detection] = []
    by_image: dict[Hashable, list[int]] = {}
    for i, d in enumerate(dets):
        by_image.setdefault(d.image_id, []).append(i)
    rescored: dict[int, Detection] = {}
    for image_id, indices in by_image.items():
        if image_id not in ctx_by_image:
            raise ValidationError(f"no scene context for image {image_id!r}")
        bg = build_background_embedding(
            ctx_by_image[image_id],
            scene_table,
            config.k,
            template=config.prompt_template,
            renormalize=config.renormalize_bg,
        )
        table = rescore_coefficients(class_table, bg, normalization=config.normalization)
        result.backgrounds[image_id] = bg
        result.rescore_tables[image_id] = table
        group = [dets[i] for i in indices]
        mapping = id_to_name if id_to_name else None
        for i, det in zip(indices, rescore_detections(group, table, config.alpha, mapping)):
            rescored[i] = det
    for i in range(len(dets)):
        out.append(rescored.get(i, dets[i]))
    return out


def _nms_stage(config: Config, dets: list[Detection]) -> list[Detection]:
    groups = group_by_image_category(dets)
    out: list[Detection] = []
    for key in sorted(groups, key=repr):
        out.extend(nms(groups[key], config.nms_iou))
    return out


def _pos_stage(
    config: Config, split: CategorySplit, dets: list[Detection], result: PipelineResult
) -> list[Detection]:
    by_image: dict[Hashable, list[Detection]] = {}
    for d in dets:
        by_image.setdefault(d.image_id, []).append(d)
    out: list[Detection] = []
    for image_id in sorted(by_image, key=repr):
        out.extend(
            apply_pos(
                by_image[image_id],
                split,
                config.theta,
                scope=config.pos_scope,
                diagnostics=result.pos_diagnostics,
            )
        )
    return out


def run_pipeline(
    config: Config,
    inputs: PipelineInputs,
    emit_dir: str | Path | None = None,
) -> PipelineResult:
    """Run the refinement chain and (when annotations exist) evaluate.

    Default stage order is re-score -> NMS -> POS; config.nms_before_rescore
    swaps the first two. Re-scoring is skipped when alpha is 0 and no scene
    inputs are supplied. All stage outputs land in result.stages, and on
    emit_dir each stage is also written as a detections file.
    """
    result = PipelineResult(detections=[], report=None)
    if inputs.regions is not None:
        dets = _regions_to_detections(config, inputs, result)
    elif inputs.detections is not None:
        dets = list(inputs.detections)
    else:
        raise ValidationError("pipeline needs detections or region embeddings")
    result.stages["input"] = dets

    can_rescore = (
        inputs.class_table is not None
        and inputs.scene_table is not None
        and len(inputs.scene_contexts) > 0
    )
    do_rescore = can_rescore or config.alpha > 0.0

    def rescore_step(d: list[Detection]) -> list[Detection]:
        if not do_rescore:
            return d
        out = _rescore_stage(config, inputs, d, result)
        result.stages["rescored"] = out
        return out

    def nms_step(d: list[Detection]) -> list[Detection]:
        out = _nms_stage(config, d)
        result.stages["nms"] = out
        return out

    if config.nms_before_rescore:
        dets = rescore_step(nms_step(dets))
    else:
        dets = nms_step(rescore_step(dets))

    if config.pos_enabled:
        dets = _pos_stage(config, inputs.split, dets, result)
        result.stages["pos"] = dets

    result.detections = dets
    if inputs.annotations is not None and inputs.annotations.gts:
        result.report = evaluate(
            dets,
            inputs.annotations.gts,
            inputs.split,
            iou_thr=config.eval_iou_thr,
            max_dets=config.eval_max_dets,
        )

    if emit_dir is not None:
        emit_dir = Path(emit_dir)
        emit_dir.mkdir(parents=True, exist_ok=True)
        for i, (stage, staged) in enumerate(result.stages.items()):
            save_detections(staged, emit_dir / f"{i:02d}_{stage}.json")
        if result.region_scores is not None:
            (emit_dir / "region_scores.json").write_text(
                json.dumps(result.region_scores, sort_keys=True, indent=1) + "\n",
                encoding="utf-8",
            )
        if result.rescore_tables:
            coeffs = {
                repr(img): {n: e.coefficient for n, e in t.entries.items()}
                for img, t in result.rescore_tables.items()
            }
            (emit_dir / "rescore_coefficients.json").write_text(
                json.dumps(coeffs, sort_keys=True, indent=1) + "\n", encoding="utf-8"
            )
    return result


_SWEEP_KEYS = ("alpha", "theta", "k", "normalization")


def sweep(
    config: Config,
    inputs: PipelineInputs,
    grid: Mapping[str, Sequence],
) -> list[dict]:
    """One pipeline run per grid point over {alpha, theta, k, normalization}.

    Rows carry the varied parameters plus split mAPs; per-cell failures are
    recorded in an `error` field and the sweep continues.
    """
    unknown = set(grid) - set(_SWEEP_KEYS)
    if unknown:
        raise ValidationError(f"sweep supports {_SWEEP_KEYS}, got extra {sorted(unknown)}")
    if not grid:
        raise ValidationError("empty sweep grid")
    keys = [k for k in _SWEEP_KEYS if k in grid]
    rows: list[dict] = []
    for values in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, values))
        row: dict = dict(point)
        try:
            res = run_pipeline(config.replaced(**point), inputs)
            if res.report is None:
                raise ValidationError("sweep requires annotations to evaluate")
            row["map_base"] = res.report.map_base
            row["map_novel"] = res.report.map_novel
            row["map_all"] = res.report.map_all
        except Exception as exc:  # noqa: BLE001 - per-cell failures must not kill the sweep
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def save_sweep(rows: list[dict], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(rows, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def sweep_table(rows: list[dict]) -> str:
    """Aligned text table: parameter columns then mAP columns."""
    if not rows:
        return "(empty sweep)"
    params = [k for k in _SWEEP_KEYS if k in rows[0]]
    headers = params + ["map_base", "map_novel", "map_all"]
    widths = {h: max(len(h), 9) for h in headers}
    lines = ["  ".join(f"{h:>{widths[h]}}" for h in headers)]
    for row in rows:
        cells = []
        for h in headers:
            v = row.get(h)
            if isinstance(v, float):
                cells.append(f"{v:>{widths[h]}.4f}")
            elif v is None:
                cells.append(f"{'--':>{widths[h]}}")
            else:
                cells.append(f"{str(v):>{widths[h]}}")
        if "error" in row:
            cells.append(f"ERROR {row['error']}")
        lines.append("  ".join(cells))
    return "\n".join(lines)
