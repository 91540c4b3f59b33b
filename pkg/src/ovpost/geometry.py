"""Axis-aligned box arithmetic: area, intersection, IoU, overlap area ratio.

Boxes are corner-format (x_min, y_min, x_max, y_max) in continuous pixel
coordinates. COCO-style (x, y, w, h) is converted at the I/O boundary, never
here. There is no +1 inclusivity correction anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox, DegenerateInput, ValidationError

__all__ = [
    "BBox",
    "area",
    "intersection_area",
    "iou",
    "oar",
    "boxes_to_array",
    "array_to_boxes",
]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle with x_max >= x_min and y_max >= y_min."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_max >= self.x_min and self.y_max >= self.y_min):
            raise ValidationError(
                f"invalid box corners: ({self.x_min}, {self.y_min}, "
                f"{self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, other: "BBox") -> bool:
        """True if `other` lies fully inside this box (boundaries allowed)."""
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and other.x_max <= self.x_max
            and other.y_max <= self.y_max
        )


def area(b: BBox) -> float:
    """Box area; 0 for degenerate (zero width or height) boxes."""
    return b.area


def intersection_area(b1: BBox, b2: BBox) -> float:
    """Area of the overlap rectangle; 0 if the boxes are disjoint."""
    w = min(b1.x_max, b2.x_max) - max(b1.x_min, b2.x_min)
    h = min(b1.y_max, b2.y_max) - max(b1.y_min, b2.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(b1: BBox, b2: BBox) -> float:
    """Intersection over union, symmetric, in [0, 1].

    Raises DegenerateInput if both boxes have zero area.
    """
    a1 = b1.area
    a2 = b2.area
    if a1 == 0.0 and a2 == 0.0:
        raise DegenerateInput("iou undefined: both boxes have zero area")
    inter = intersection_area(b1, b2)
    union = a1 + a2 - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def oar(b1: BBox, b2: BBox) -> float:
    """Overlap area ratio |b1 n b2| / |b1|, in [0, 1].

    Not symmetric: oar(b1, b2) measures how much of b1 is covered by b2.
    Raises DegenerateBox when area(b1) = 0; a zero-area second argument
    simply yields 0 (no overlap is possible).
    """
    a1 = b1.area
    if a1 == 0.0:
        raise DegenerateBox("oar undefined for zero-area first argument")
    return intersection_area(b1, b2) / a1


def boxes_to_array(boxes: list[BBox]) -> np.ndarray:
    """Stack boxes into an (N, 4) float64 corner array."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array(
        [(b.x_min, b.y_min, b.x_max, b.y_max) for b in boxes], dtype=np.float64
    )


def array_to_boxes(arr: np.ndarray) -> list[BBox]:
    """Inverse of boxes_to_array."""
    return [BBox(float(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in arr]
