"""COCO-style AP at a single IoU threshold with base/novel/all aggregation.

Matching is the standard greedy protocol: detections in descending score
order each claim the highest-IoU unmatched non-crowd ground truth at or
above the threshold; crowd boxes absorb detections without TP credit.
AP uses the 101-point interpolated precision envelope. Split means skip
categories without ground truths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .geometry import BBox, boxes_to_array
from .suppression import CategorySplit, Detection

__all__ = [
    "GroundTruth",
    "EvalReport",
    "TP",
    "FP",
    "IGNORED",
    "match_detections",
    "average_precision",
    "evaluate",
]

TP = 1
FP = 0
IGNORED = -1

# exact i/100 floats so independent reimplementations sample identically
_RECALL_POINTS = np.arange(101, dtype=np.float64) / 100.0


@dataclass(frozen=True)
class GroundTruth:
    """Annotated box; crowd boxes absorb matches and leave denominators."""

    image_id: Hashable
    category_id: Hashable
    bbox: BBox
    crowd_flag: bool = False

    def __post_init__(self) -> None:
        if self.bbox.area <= 0.0:
            raise ValidationError("ground-truth box must have positive area")


@dataclass
class EvalReport:
    """Per-category AP plus split means; None where a split has no gts."""

    per_category_ap: dict
    per_category_n_gt: dict
    map_base: float | None
    map_novel: float | None
    map_all: float | None
    n_images: int
    n_gts: int
    n_dets: int
    iou_thr: float = 0.5


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_thr: float,
) -> list[int]:
    """TP/FP/IGNORED labels aligned with the input detections.

    Inputs must form one (image, category) group. Detections are processed
    in descending score order (ties by input index); each claims the
    highest-IoU unmatched non-crowd gt with IoU >= iou_thr. A detection
    matching only crowd gts at the threshold is IGNORED.
    """
    keys = {(d.image_id, d.category_id) for d in dets} | {
        (g.image_id, g.category_id) for g in gts
    }
    if len(keys) > 1:
        raise ValidationError(f"match_detections expects one group, got {keys}")
    labels = [FP] * len(dets)
    if not dets:
        return labels
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    if not gts:
        return labels
    det_boxes = boxes_to_array([dets[i].bbox for i in order])
    gt_boxes = boxes_to_array([g.bbox for g in gts])
    ious = kernels.pairwise_iou(det_boxes, gt_boxes)
    crowd = np.array([g.crowd_flag for g in gts], dtype=bool)
    taken = np.zeros(len(gts), dtype=bool)
    for rank, det_idx in enumerate(order):
        row = ious[rank]
        candidates = ~crowd & ~taken
        best = -1
        best_iou = 0.0
        for j in np.nonzero(candidates)[0]:
            if row[j] > best_iou:
                best_iou = float(row[j])
                best = int(j)
        if best >= 0 and best_iou >= iou_thr:
            labels[det_idx] = TP
            taken[best] = True
        elif np.any(crowd & (row >= iou_thr)):
            labels[det_idx] = IGNORED
        else:
            labels[det_idx] = FP
    return labels


def average_precision(labels: Sequence[int], n_gt: int) -> float | None:
    """101-point interpolated AP from score-ordered TP/FP labels.

    Labels must already be ordered by descending score with IGNORED entries
    removed. Returns None when n_gt = 0 (AP undefined; category skipped).
    """
    if n_gt < 0:
        raise ValidationError(f"n_gt must be >= 0, got {n_gt}")
    if n_gt == 0:
        return None
    arr = np.asarray(labels, dtype=np.int64)
    if arr.size == 0:
        return 0.0
    if not np.all((arr == TP) | (arr == FP)):
        raise ValidationError("labels must contain only TP/FP")
    tp_cum = np.cumsum(arr == TP)
    fp_cum = np.cumsum(arr == FP)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    # monotone non-increasing envelope from the right
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, _RECALL_POINTS, side="left")
    sampled = np.where(idx < envelope.size, envelope[np.minimum(idx, envelope.size - 1)], 0.0)
    return math.fsum(sampled) / 101.0


def _cap_detections(dets: Sequence[Detection], max_dets: int | None) -> list[Detection]:
    if max_dets is None:
        return list(dets)
    groups: dict[tuple, list[int]] = {}
    for i, d in enumerate(dets):
        groups.setdefault((d.image_id, d.category_id), []).append(i)
    keep: set[int] = set()
    for indices in groups.values():
        ranked = sorted(indices, key=lambda i: (-dets[i].score, i))
        keep.update(ranked[:max_dets])
    return [d for i, d in enumerate(dets) if i in keep]


def evaluate(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    split: CategorySplit,
    iou_thr: float = 0.5,
    max_dets: int | None = None,
) -> EvalReport:
    """Per-category AP at iou_thr and the base/novel/all split means.

    Split means average per-category AP over split categories that have at
    least one non-crowd ground truth; a split with none yields None rather
    than an error. Results are independent of input ordering up to the
    documented score tie-break.
    """
    dets = _cap_detections(dets, max_dets)
    det_by_cat: dict[Hashable, list[int]] = {}
    for i, d in enumerate(dets):
        det_by_cat.setdefault(d.category_id, []).append(i)
    gt_by_cat: dict[Hashable, list[GroundTruth]] = {}
    for g in gts:
        gt_by_cat.setdefault(g.category_id, []).append(g)

    per_category_ap: dict = {}
    per_category_n_gt: dict = {}
    for cat in sorted(gt_by_cat, key=repr):
        cat_gts = gt_by_cat[cat]
        n_gt = sum(1 for g in cat_gts if not g.crowd_flag)
        per_category_n_gt[cat] = n_gt
        if n_gt == 0:
            continue
        scored: list[tuple[float, int, int]] = []  # (-score, input index, label)
        gts_by_img: dict[Hashable, list[GroundTruth]] = {}
        for g in cat_gts:
            gts_by_img.setdefault(g.image_id, []).append(g)
        dets_by_img: dict[Hashable, list[int]] = {}
        for i in det_by_cat.get(cat, []):
            dets_by_img.setdefault(dets[i].image_id, []).append(i)
        for img, det_indices in dets_by_img.items():
            group = [dets[i] for i in det_indices]
            labels = match_detections(group, gts_by_img.get(img, []), iou_thr)
            for i, label in zip(det_indices, labels):
                if label != IGNORED:
                    scored.append((-dets[i].score, i, label))
        scored.sort()
        per_category_ap[cat] = average_precision([s[2] for s in scored], n_gt)

    def split_mean(cats: frozenset) -> float | None:
        values = [per_category_ap[c] for c in cats if per_category_ap.get(c) is not None]
        return float(np.mean(values)) if values else None

    n_images = len({g.image_id for g in gts} | {d.image_id for d in dets})
    return EvalReport(
        per_category_ap=per_category_ap,
        per_category_n_gt=per_category_n_gt,
        map_base=split_mean(split.base),
        map_novel=split_mean(split.novel),
        map_all=split_mean(split.all),
        n_images=n_images,
        n_gts=len(gts),
        n_dets=len(dets),
        iou_thr=iou_thr,
    )
