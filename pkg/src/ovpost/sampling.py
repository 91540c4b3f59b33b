"""Seeded sampling of oversized and partial regions at prescribed IoU.

An oversized sample is a superset R of a ground-truth box with
iou(gt, R) = |gt|/|R| in the requested range; a partial sample is a subset
with iou = |R|/|gt|. The target IoU is drawn uniformly, the aspect ratio
log-uniformly in [1/3, 3] (clamped to feasibility), and the placement
uniformly among positions preserving containment. Corners are derived by
adding non-negative margins to the ground-truth corners, so containment is
exact in floating point and the achieved IoU matches the draw to ~1e-15.

PRNG: splitmix64 (Steele et al.), fixed here so samples reproduce across
runs, platforms, and reimplementations. Doubles come from the top 53 bits
of each output word. Per attempt the draw order is: target IoU, log-aspect,
x placement, y placement (the aspect draw is skipped when an explicit
aspect is supplied). Derived streams for item i reseed a fresh generator
with mix64(seed XOR mix64(i + 1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

from .errors import InfeasibleSample, ValidationError
from .geometry import BBox

__all__ = [
    "SplitMix64",
    "SampleSpec",
    "ProbeSample",
    "ProbeResult",
    "sample_oversized",
    "sample_partial",
    "probe_bins",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 output mix of a 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit generator; state advances by the golden gamma."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return mix64(self._state)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    @staticmethod
    def derived(seed: int, index: int) -> "SplitMix64":
        """Independent stream for item `index` of a run seeded with `seed`."""
        return SplitMix64(mix64((seed ^ mix64(index + 1)) & _MASK64))


@dataclass(frozen=True)
class SampleSpec:
    """One sampling request: kind, closed IoU range, count, seed."""

    kind: str
    iou_range: tuple[float, float]
    count: int
    seed: int

    def __post_init__(self) -> None:
        if self.kind not in ("oversized", "partial"):
            raise ValidationError(f"unknown sample kind {self.kind!r}")
        lo, hi = self.iou_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ValidationError(f"iou_range {self.iou_range} violates 0 < lo <= hi <= 1")
        if self.count < 0:
            raise ValidationError(f"count must be >= 0, got {self.count}")


_ASPECT_LO = math.log(1.0 / 3.0)
_ASPECT_HI = math.log(3.0)


def _check_range(iou_range: tuple[float, float]) -> None:
    lo, hi = iou_range
    if not 0.0 < lo <= hi <= 1.0:
        raise InfeasibleSample(f"iou_range {iou_range} violates 0 < lo <= hi <= 1")


def sample_oversized(
    gt: BBox,
    image_w: float,
    image_h: float,
    iou_range: tuple[float, float],
    rng: SplitMix64 | int,
    aspect: float | None = None,
    max_attempts: int = 1000,
) -> BBox:
    """Sample a box containing gt, inside the image, with IoU in range."""
    _check_range(iou_range)
    if isinstance(rng, int):
        rng = SplitMix64(rng)
    if gt.area <= 0.0:
        raise InfeasibleSample("ground truth has zero area")
    if gt.x_min < 0 or gt.y_min < 0 or gt.x_max > image_w or gt.y_max > image_h:
        raise InfeasibleSample("ground truth lies outside the image")
    lo, hi = iou_range
    gt_area = gt.area
    for _ in range(max_attempts):
        t = rng.uniform(lo, hi)
        if t >= 1.0:
            return BBox(gt.x_min, gt.y_min, gt.x_max, gt.y_max)
        target_area = gt_area / t
        a = math.exp(rng.uniform(_ASPECT_LO, _ASPECT_HI)) if aspect is None else aspect
        w_lo = max(gt.width, target_area / image_h)
        w_hi = min(image_w, target_area / gt.height)
        if w_lo > w_hi * (1.0 + 1e-12):
            rng.random()
            rng.random()
            continue
        w = min(max(math.sqrt(target_area * a), w_lo), w_hi)
        h = target_area / w
        # distribute the slack as non-negative margins off the gt corners,
        # so containment survives floating-point rounding exactly
        sx = max(0.0, w - gt.width)
        sy = max(0.0, h - gt.height)
        ml_lo = max(0.0, sx - (image_w - gt.x_max))
        ml_hi = min(sx, gt.x_min)
        mt_lo = max(0.0, sy - (image_h - gt.y_max))
        mt_hi = min(sy, gt.y_min)
        if ml_lo > ml_hi or mt_lo > mt_hi:
            rng.random()
            rng.random()
            continue
        ml = rng.uniform(ml_lo, ml_hi)
        mt = rng.uniform(mt_lo, mt_hi)
        x_min = max(0.0, gt.x_min - ml)
        y_min = max(0.0, gt.y_min - mt)
        x_max = min(image_w, gt.x_max + (sx - ml))
        y_max = min(image_h, gt.y_max + (sy - mt))
        return BBox(x_min, y_min, x_max, y_max)
    raise InfeasibleSample(
        f"no feasible oversized box for gt {gt} in {image_w}x{image_h} "
        f"with iou in {iou_range} after {max_attempts} attempts"
    )


def sample_partial(
    gt: BBox,
    iou_range: tuple[float, float],
    rng: SplitMix64 | int,
    aspect: float | None = None,
) -> BBox:
    """Sample a sub-box of gt with IoU = |R|/|gt| in range.

    Always feasible for a positive-area gt, so no attempt limit.
    """
    _check_range(iou_range)
    if isinstance(rng, int):
        rng = SplitMix64(rng)
    if gt.area <= 0.0:
        raise InfeasibleSample("ground truth has zero area")
    lo, hi = iou_range
    t = rng.uniform(lo, hi)
    if t >= 1.0:
        return BBox(gt.x_min, gt.y_min, gt.x_max, gt.y_max)
    target_area = t * gt.area
    a = math.exp(rng.uniform(_ASPECT_LO, _ASPECT_HI)) if aspect is None else aspect
    w_lo = target_area / gt.height
    w_hi = gt.width
    w = min(max(math.sqrt(target_area * a), w_lo), w_hi)
    h = min(target_area / w, gt.height)
    dx = rng.uniform(0.0, max(0.0, gt.width - w))
    dy = rng.uniform(0.0, max(0.0, gt.height - h))
    x_min = gt.x_min + dx
    y_min = gt.y_min + dy
    x_max = min(gt.x_max, x_min + w)
    y_max = min(gt.y_max, y_min + h)
    return BBox(x_min, y_min, x_max, y_max)


@dataclass(frozen=True)
class ProbeSample:
    region_id: str
    image_id: Hashable
    gt: BBox
    box: BBox
    kind: str
    bin_index: int
    iou_range: tuple[float, float]


@dataclass(frozen=True)
class ProbeResult:
    samples: tuple[ProbeSample, ...]
    failures: tuple[str, ...]


def probe_bins(
    gts: Sequence[tuple[Hashable, BBox, float, float]],
    bins: Sequence[tuple[float, float]],
    per_bin: int,
    kind: str,
    seed: int,
    max_attempts: int = 1000,
) -> ProbeResult:
    """Per ground truth and bin, draw `per_bin` samples of the given kind.

    gts records are (image_id, gt_box, image_w, image_h). Bins must be
    disjoint and ordered. Infeasible draws are recorded, not fatal. Each
    sample uses its own derived stream, so output is deterministic given
    the seed and independent of iteration strategy.
    """
    if kind not in ("oversized", "partial"):
        raise ValidationError(f"unknown sample kind {kind!r}")
    if per_bin < 0:
        raise ValidationError(f"per_bin must be >= 0, got {per_bin}")
    for lo, hi in bins:
        if not 0.0 < lo <= hi <= 1.0:
            raise ValidationError(f"bin ({lo}, {hi}) violates 0 < lo <= hi <= 1")
    for (_, h1), (l2, _) in zip(bins, bins[1:]):
        if l2 < h1:
            raise ValidationError("bins must be disjoint and ordered")

    samples: list[ProbeSample] = []
    failures: list[str] = []
    n_bins = len(bins)
    for g, (image_id, gt, image_w, image_h) in enumerate(gts):
        for b, iou_range in enumerate(bins):
            for s in range(per_bin):
                item = (g * n_bins + b) * per_bin + s
                rng = SplitMix64.derived(seed, item)
                region_id = f"{kind}_g{g:04d}_b{b:02d}_s{s:04d}"
                try:
                    if kind == "oversized":
                        box = sample_oversized(
                            gt, image_w, image_h, iou_range, rng,
                            max_attempts=max_attempts,
                        )
                    else:
                        box = sample_partial(gt, iou_range, rng)
                except InfeasibleSample as exc:
                    failures.append(f"{region_id}: {exc}")
                    continue
                samples.append(
                    ProbeSample(region_id, image_id, gt, box, kind, b, tuple(iou_range))
                )
    return ProbeResult(tuple(samples), tuple(failures))
