"""Pipeline configuration with domain validation at load time."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .background import NORMALIZATIONS
from .errors import ValidationError

__all__ = ["Config"]


@dataclass
class Config:
    k: int = 5
    alpha: float = 0.2
    theta: float = 0.5
    pos_scope: str = "novel_only"
    pos_enabled: bool = True
    nms_iou: float = 0.5
    nms_before_rescore: bool = False
    prompt_template: str = "Part of {scene}"
    normalization: str = "zscore"
    renormalize_bg: bool = True
    temperature: float = 0.01
    eval_iou_thr: float = 0.5
    eval_max_dets: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha {self.alpha} outside [0, 1]")
        if not 0.0 < self.theta <= 1.0:
            raise ValidationError(f"theta {self.theta} outside (0, 1]")
        if self.pos_scope not in ("novel_only", "all_categories"):
            raise ValidationError(f"unknown pos_scope {self.pos_scope!r}")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValidationError(f"nms_iou {self.nms_iou} outside (0, 1]")
        if "{scene}" not in self.prompt_template:
            raise ValidationError("prompt_template must contain '{scene}'")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )
        if self.temperature <= 0.0:
            raise ValidationError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 < self.eval_iou_thr <= 1.0:
            raise ValidationError(f"eval_iou_thr {self.eval_iou_thr} outside (0, 1]")
        if self.eval_max_dets is not None and self.eval_max_dets < 1:
            raise ValidationError(f"eval_max_dets must be >= 1, got {self.eval_max_dets}")

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )

    def replaced(self, **kw) -> "Config":
        data = asdict(self)
        data.update(kw)
        return Config(**data)
