"""Classic NMS and overlap-area-ratio suppression of partial regions.

Both algorithms walk detections greedily by descending score and discard a
candidate whose overlap metric against an already-kept box reaches the
threshold. NMS uses symmetric IoU; pos_suppress uses OAR(candidate, kept),
which removes boxes mostly covered by a stronger detection while leaving
occluded objects (low OAR against everything) alone.

Ties on score break by larger area, then lower input index, so results are
deterministic and reproducible against independent oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable

import numpy as np

from . import kernels
from .errors import InvalidThreshold, ValidationError
from .geometry import BBox, boxes_to_array

__all__ = [
    "Detection",
    "CategorySplit",
    "PosDiagnostics",
    "nms",
    "pos_suppress",
    "apply_pos",
]

CategoryId = Hashable


@dataclass(frozen=True)
class Detection:
    """One scored box: (image, category, box, score)."""

    image_id: Hashable
    category_id: CategoryId
    bbox: BBox
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score} outside [0, 1]")
        if self.bbox.area <= 0.0:
            raise ValidationError("detection box must have positive area")


@dataclass(frozen=True)
class CategorySplit:
    """Disjoint base / novel category id sets."""

    base: frozenset
    novel: frozenset

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", frozenset(self.base))
        object.__setattr__(self, "novel", frozenset(self.novel))
        if self.base & self.novel:
            raise ValidationError(
                f"base and novel overlap: {sorted(self.base & self.novel)}"
            )

    @property
    def all(self) -> frozenset:
        return self.base | self.novel


@dataclass
class PosDiagnostics:
    """Counters filled by apply_pos; unknown categories pass through."""

    unknown_category_detections: int = 0
    unknown_category_ids: set = field(default_factory=set)


def _check_single_group(dets: list[Detection], what: str) -> None:
    images = {d.image_id for d in dets}
    cats = {d.category_id for d in dets}
    if len(images) > 1 or len(cats) > 1:
        raise ValidationError(
            f"{what} expects one (image, category) group, got images={images}, "
            f"categories={cats}"
        )


def _suppress(dets: list[Detection], threshold: float, use_oar: bool) -> list[Detection]:
    if not dets:
        return []
    boxes = boxes_to_array([d.bbox for d in dets])
    scores = np.array([d.score for d in dets], dtype=np.float64)
    kept = kernels.greedy_keep(boxes, scores, threshold, use_oar)
    return [dets[i] for i in kept]


def nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS over one (image, category) group.

    A box is discarded iff its IoU with an already-kept box is >= the
    threshold. Output is sorted by descending score and is a subset of the
    input; boxes and scores are never modified.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InvalidThreshold(f"iou_threshold {iou_threshold} outside (0, 1]")
    _check_single_group(dets, "nms")
    return _suppress(dets, iou_threshold, use_oar=False)


def pos_suppress(dets: list[Detection], theta: float) -> list[Detection]:
    """Suppress partial regions in one (image, category) group.

    Greedy by descending score; a remaining box b is discarded iff
    OAR(b, kept) >= theta for the newly kept box. The highest-scoring
    detection is always kept. Output sorted by descending score.
    """
    if not 0.0 < theta <= 1.0:
        raise InvalidThreshold(f"theta {theta} outside (0, 1]")
    _check_single_group(dets, "pos_suppress")
    return _suppress(dets, theta, use_oar=True)


def apply_pos(
    dets: list[Detection],
    split: CategorySplit,
    theta: float,
    scope: str = "novel_only",
    diagnostics: PosDiagnostics | None = None,
) -> list[Detection]:
    """Run pos_suppress per category on one image, honoring the scope.

    scope "novel_only" processes only categories in split.novel; categories
    outside the processed set pass through untouched, so detections of
    distinct categories never suppress each other. Category ids in neither
    split pass through as well and are tallied on `diagnostics`. Output
    preserves the input order of surviving detections.
    """
    if scope not in ("novel_only", "all_categories"):
        raise ValidationError(f"unknown scope {scope!r}")
    if not 0.0 < theta <= 1.0:
        raise InvalidThreshold(f"theta {theta} outside (0, 1]")
    images = {d.image_id for d in dets}
    if len(images) > 1:
        raise ValidationError(f"apply_pos expects one image, got {images}")

    by_category: dict[CategoryId, list[int]] = {}
    for idx, det in enumerate(dets):
        by_category.setdefault(det.category_id, []).append(idx)

    surviving = set(range(len(dets)))
    for cat, indices in by_category.items():
        if scope == "novel_only":
            if cat not in split.novel:
                if cat not in split.base and diagnostics is not None:
                    diagnostics.unknown_category_detections += len(indices)
                    diagnostics.unknown_category_ids.add(cat)
                continue
        group = [dets[i] for i in indices]
        boxes = boxes_to_array([d.bbox for d in group])
        scores = np.array([d.score for d in group], dtype=np.float64)
        kept_local = kernels.greedy_keep(boxes, scores, theta, use_oar=True)
        kept_global = {indices[j] for j in kept_local}
        for i in indices:
            if i not in kept_global:
                surviving.discard(i)
    return [dets[i] for i in sorted(surviving)]


def rescored(det: Detection, score: float) -> Detection:
    """Copy of a detection with a replaced score."""
    return replace(det, score=score)


def group_by_image_category(
    dets: Iterable[Detection],
) -> dict[tuple, list[Detection]]:
    """Stable grouping by (image_id, category_id)."""
    groups: dict[tuple, list[Detection]] = {}
    for d in dets:
        groups.setdefault((d.image_id, d.category_id), []).append(d)
    return groups
