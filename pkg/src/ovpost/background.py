"""Scene-information background modeling and score re-scoring.

A per-image background embedding is the L2-normalized mean of the prompted
embeddings of the image's top-k scenes. Because scene vectors co-occur with
object categories in embedding space, every category gets a re-score
coefficient r = sigmoid(normalized cosine similarity to the background
embedding), and detection scores are blended as s^(1-alpha) * r^alpha.

score_regions classifies region embeddings against the class bank with the
background embedding appended as the final column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateSimilaritiesWarning,
    DimensionMismatch,
    DomainError,
    DuplicateName,
    InsufficientScenes,
    MissingCategory,
    MissingSceneEmbedding,
    ValidationError,
    ZeroVector,
)
from .suppression import Detection

__all__ = [
    "EmbeddingTable",
    "SceneContext",
    "BackgroundEmbedding",
    "RescoreEntry",
    "RescoreTable",
    "normalize_table",
    "build_background_embedding",
    "rescore_coefficients",
    "blend_scores",
    "score_regions",
    "rescore_detections",
    "apply_prompt",
]

NORMALIZATIONS = ("zscore", "minmax", "none")


class EmbeddingTable:
    """Ordered name -> D-dim vector map with a single shared dimension."""

    def __init__(
        self,
        names: Sequence[str],
        vectors: np.ndarray,
        normalized: bool = False,
        comments: Sequence[str] = (),
    ) -> None:
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValidationError(f"vectors must be 2-D, got shape {vectors.shape}")
        if len(names) != vectors.shape[0]:
            raise ValidationError(
                f"{len(names)} names but {vectors.shape[0]} vectors"
            )
        seen = set()
        for name in names:
            if name in seen:
                raise DuplicateName(f"duplicate entry name {name!r}")
            seen.add(name)
        self.names = list(names)
        self.vectors = vectors
        self.normalized = bool(normalized)
        self.comments = list(comments)
        self._index = {name: i for i, name in enumerate(self.names)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> np.ndarray:
        return self.vectors[self._index[name]]

    def items(self) -> Iterable[tuple[str, np.ndarray]]:
        return zip(self.names, self.vectors)


@dataclass(frozen=True)
class SceneContext:
    """Per-image scene probabilities, sorted descending."""

    image_id: Hashable
    scenes: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenes", tuple((s, float(p)) for s, p in self.scenes))
        probs = [p for _, p in self.scenes]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValidationError(f"scene probabilities outside [0, 1]: {probs}")
        if any(probs[i] < probs[i + 1] for i in range(len(probs) - 1)):
            raise ValidationError("scene probabilities must be sorted descending")
        if sum(probs) > 1.0 + 1e-6:
            raise ValidationError(f"scene probabilities sum to {sum(probs)} > 1")


@dataclass(frozen=True)
class BackgroundEmbedding:
    """Mean of the top-k prompted scene embeddings (optionally renormalized)."""

    vector: np.ndarray
    source_scenes: tuple[str, ...]
    k: int


@dataclass(frozen=True)
class RescoreEntry:
    raw_similarity: float
    normalized: float
    coefficient: float


class RescoreTable:
    """Per-category re-score coefficients, in class-table order."""

    def __init__(self, entries: Mapping[str, RescoreEntry]) -> None:
        self.entries = dict(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __getitem__(self, name: str) -> RescoreEntry:
        return self.entries[name]

    def coefficients(self) -> dict[str, float]:
        return {name: e.coefficient for name, e in self.entries.items()}


def apply_prompt(template: str, scene: str) -> str:
    """Fill the {scene} placeholder of a prompt template."""
    if "{scene}" not in template:
        raise ValidationError(f"prompt template {template!r} lacks '{{scene}}'")
    return template.replace("{scene}", scene)


def normalize_table(table: EmbeddingTable) -> EmbeddingTable:
    """Return a copy with every vector scaled to unit L2 norm."""
    norms = np.linalg.norm(table.vectors, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise ZeroVector(f"zero vector for entry {table.names[zero[0]]!r}")
    return EmbeddingTable(
        table.names,
        table.vectors / norms[:, None],
        normalized=True,
        comments=table.comments,
    )


def build_background_embedding(
    ctx: SceneContext,
    prompted_scene_table: EmbeddingTable,
    k: int,
    template: str = "Part of {scene}",
    renormalize: bool = True,
) -> BackgroundEmbedding:
    """Mean the embeddings of the image's top-k prompted scenes.

    Scene names from the context are passed through the prompt template and
    looked up in the (prompted) scene table; the mean is L2-renormalized
    unless renormalize is False.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if len(ctx.scenes) < k:
        raise InsufficientScenes(
            f"image {ctx.image_id!r} has {len(ctx.scenes)} scenes, need {k}"
        )
    rows = []
    picked = []
    for scene, _ in ctx.scenes[:k]:
        prompted = apply_prompt(template, scene)
        if prompted not in prompted_scene_table:
            raise MissingSceneEmbedding(
                f"no embedding for prompted scene {prompted!r}"
            )
        rows.append(prompted_scene_table[prompted])
        picked.append(scene)
    mean = np.mean(rows, axis=0)
    if renormalize:
        norm = float(np.linalg.norm(mean))
        if norm == 0.0:
            raise ZeroVector(
                f"top-{k} scene embeddings of image {ctx.image_id!r} cancel out"
            )
        mean = mean / norm
    return BackgroundEmbedding(vector=mean, source_scenes=tuple(picked), k=k)


def _normalize_similarities(phi: np.ndarray, normalization: str) -> np.ndarray | None:
    """Returns normalized similarities, or None for the degenerate branch."""
    if normalization == "zscore":
        std = float(phi.std())  # population std
        if std < 1e-12:
            return None
        return (phi - phi.mean()) / std
    if normalization == "minmax":
        span = float(phi.max() - phi.min())
        if span < 1e-12:
            return None
        return (phi - phi.min()) / span
    if normalization == "none":
        return phi.copy()
    raise ValidationError(f"unknown normalization {normalization!r}")


def rescore_coefficients(
    class_table: EmbeddingTable,
    bg: BackgroundEmbedding,
    normalization: str = "zscore",
) -> RescoreTable:
    """Per-category coefficient r = sigmoid(normalized cosine similarity).

    Similarities are normalized across the category population (z-score by
    default); the sigmoid then maps them into (0, 1). When all categories
    are equidistant from the background, every coefficient is 0.5 and a
    DegenerateSimilaritiesWarning is issued.
    """
    if len(class_table) < 2:
        raise ValidationError("rescore_coefficients needs >= 2 categories")
    if class_table.dim != bg.vector.shape[0]:
        raise DimensionMismatch(
            f"class table dim {class_table.dim} != background dim {bg.vector.shape[0]}"
        )
    phi = class_table.vectors @ bg.vector
    normalized = _normalize_similarities(phi, normalization)
    if normalized is None:
        warnings.warn(
            "all categories equidistant from background; coefficients set to 0.5",
            DegenerateSimilaritiesWarning,
            stacklevel=2,
        )
        entries = {
            name: RescoreEntry(float(p), 0.0, 0.5)
            for name, p in zip(class_table.names, phi)
        }
        return RescoreTable(entries)
    coeff = 1.0 / (1.0 + np.exp(-normalized))
    entries = {
        name: RescoreEntry(float(p), float(n), float(c))
        for name, p, n, c in zip(class_table.names, phi, normalized, coeff)
    }
    return RescoreTable(entries)


def blend_scores(s_initial: float, r: float, alpha: float) -> float:
    """Geometric blend s^(1-alpha) * r^alpha.

    Boundary conventions: alpha=0 returns s_initial exactly, alpha=1 returns
    r exactly, and 0^positive = 0.
    """
    if not 0.0 <= s_initial <= 1.0:
        raise DomainError(f"s_initial {s_initial} outside [0, 1]")
    if not 0.0 < r < 1.0:
        raise DomainError(f"r {r} outside (0, 1)")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha {alpha} outside [0, 1]")
    if alpha == 0.0:
        return s_initial
    if alpha == 1.0:
        return r
    if s_initial == 0.0:
        return 0.0
    return s_initial ** (1.0 - alpha) * r**alpha


def score_regions(
    region_embeddings: EmbeddingTable | np.ndarray,
    class_table: EmbeddingTable,
    bg: BackgroundEmbedding,
    temperature: float = 0.01,
) -> np.ndarray:
    """Softmax over cosine similarities against [classes..., background].

    All embeddings must be unit-normalized. Returns an (n_regions, C + 1)
    array of probabilities; the last column is the background probability.
    """
    if temperature <= 0.0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    regions = (
        region_embeddings.vectors
        if isinstance(region_embeddings, EmbeddingTable)
        else np.asarray(region_embeddings, dtype=np.float64)
    )
    if regions.ndim != 2:
        raise DimensionMismatch(f"region embeddings must be 2-D, got {regions.shape}")
    if regions.shape[1] != class_table.dim or bg.vector.shape[0] != class_table.dim:
        raise DimensionMismatch(
            f"dims disagree: regions {regions.shape[1]}, classes {class_table.dim}, "
            f"background {bg.vector.shape[0]}"
        )
    bank = np.vstack([class_table.vectors, bg.vector[None, :]])
    logits = regions @ bank.T / temperature
    logits -= logits.max(axis=1, keepdims=True)
    expd = np.exp(logits)
    return expd / expd.sum(axis=1, keepdims=True)


def rescore_detections(
    dets: list[Detection],
    table: RescoreTable,
    alpha: float,
    id_to_name: Mapping | None = None,
) -> list[Detection]:
    """Blend every detection's score with its category coefficient.

    Boxes and identities are untouched; order is preserved. id_to_name maps
    detection category ids to class-table names when they differ.
    """
    out = []
    for det in dets:
        key = det.category_id if id_to_name is None else id_to_name.get(det.category_id)
        if key is None or key not in table:
            raise MissingCategory(
                f"category {det.category_id!r} has no re-score entry"
            )
        r = table[key].coefficient
        out.append(replace(det, score=blend_scores(det.score, r, alpha)))
    return out
