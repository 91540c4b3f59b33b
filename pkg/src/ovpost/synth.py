"""Desk-scale synthetic detection worlds.

A world holds images with a dominant scene, category embeddings with a
controlled cosine affinity to their home scene, scene probability contexts
peaked at the true scene, per-image ground truths, and detector output
built from the gts plus score noise, localization jitter, and injected
partial / oversized false positives drawn with the region sampler.

Optionally renders each image as a flat-color PPM (scene color background,
category-colored object rectangles) with a palette file, so downstream
image-reading tools have pixels that mechanically reflect the annotations.
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable

import numpy as np

from .background import EmbeddingTable, SceneContext, apply_prompt
from .errors import InfeasibleSpec, ValidationError
from .evaluation import GroundTruth
from .formats import AnnotationSet
from .geometry import BBox, oar
from .sampling import SplitMix64, sample_oversized, sample_partial
from .suppression import CategorySplit, Detection

__all__ = ["DetectorNoise", "SyntheticWorldSpec", "SyntheticWorld", "generate_synthetic_world", "render_images"]


@dataclass(frozen=True)
class DetectorNoise:
    score_noise_sd: float = 0.0
    localization_noise_sd: float = 0.0
    partial_fp_rate: float = 0.0
    oversized_fp_rate: float = 0.0

    def __post_init__(self) -> None:
        for name in ("partial_fp_rate", "oversized_fp_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} {v} outside [0, 1]")
        for name in ("score_noise_sd", "localization_noise_sd"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be >= 0")


@dataclass(frozen=True)
class SyntheticWorldSpec:
    n_images: int = 50
    n_base_categories: int = 8
    n_novel_categories: int = 4
    embedding_dim: int = 64
    scene_count: int = 12
    scene_object_affinity: float = 0.6
    detector_noise: DetectorNoise = field(default_factory=DetectorNoise)
    seed: int = 0
    image_w: float = 640.0
    image_h: float = 480.0
    objects_per_image: tuple[int, int] = (2, 4)
    fp_categories: str = "all"  # or "novel_only"
    prompt_template: str = "Part of {scene}"

    def __post_init__(self) -> None:
        if min(self.n_images, self.n_base_categories, self.n_novel_categories) < 1:
            raise InfeasibleSpec("need at least 1 image, base, and novel category")
        if self.embedding_dim < 2 or self.scene_count < 1:
            raise InfeasibleSpec("embedding_dim >= 2 and scene_count >= 1 required")
        if not 0.0 <= self.scene_object_affinity <= 1.0:
            raise InfeasibleSpec(
                f"scene_object_affinity {self.scene_object_affinity} outside [0, 1]"
            )
        if self.image_w <= 0 or self.image_h <= 0:
            raise InfeasibleSpec("image size must be positive")
        lo, hi = self.objects_per_image
        if not 1 <= lo <= hi:
            raise InfeasibleSpec(f"objects_per_image {self.objects_per_image} invalid")
        if self.fp_categories not in ("all", "novel_only"):
            raise InfeasibleSpec(f"unknown fp_categories {self.fp_categories!r}")


@dataclass
class SyntheticWorld:
    spec: SyntheticWorldSpec
    annotations: AnnotationSet
    detections: list[Detection]
    class_table: EmbeddingTable
    scene_table: EmbeddingTable
    scene_contexts: list[SceneContext]
    split: CategorySplit
    scene_names: list[str]
    image_scene: dict[Hashable, str]
    palette: dict


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _golden_color(i: int, sat: float, val: float) -> list[int]:
    hue = (i * 0.3819660112501051) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, sat, val)
    return [int(round(255 * r)), int(round(255 * g)), int(round(255 * b))]


def _place_gt(
    rng: np.random.Generator,
    spec: SyntheticWorldSpec,
    existing_same_cat: list[BBox],
) -> BBox | None:
    """Uniform box with limited same-category overlap; None if crowded out."""
    for _ in range(50):
        w = rng.uniform(0.10, 0.30) * spec.image_w
        h = rng.uniform(0.10, 0.30) * spec.image_h
        x = rng.uniform(0.0, spec.image_w - w)
        y = rng.uniform(0.0, spec.image_h - h)
        box = BBox(x, y, x + w, y + h)
        if all(
            max(oar(box, other), oar(other, box)) < 0.3 for other in existing_same_cat
        ):
            return box
    return None


def _jitter_box(
    rng: np.random.Generator, box: BBox, sd: float, spec: SyntheticWorldSpec
) -> BBox:
    if sd == 0.0:
        return box
    m = min(box.width, box.height)
    d = np.clip(rng.normal(0.0, sd * m, size=4), -0.3 * m, 0.3 * m)
    x1 = min(max(box.x_min + d[0], 0.0), spec.image_w - 1.0)
    y1 = min(max(box.y_min + d[1], 0.0), spec.image_h - 1.0)
    x2 = min(max(box.x_max + d[2], x1 + 1.0), spec.image_w)
    y2 = min(max(box.y_max + d[3], y1 + 1.0), spec.image_h)
    return BBox(x1, y1, x2, y2)


def generate_synthetic_world(spec: SyntheticWorldSpec) -> SyntheticWorld:
    """Deterministic world per spec.seed; see the module docstring."""
    rng = np.random.default_rng(spec.seed)
    n_cats = spec.n_base_categories + spec.n_novel_categories
    base_ids = list(range(1, spec.n_base_categories + 1))
    novel_ids = list(range(spec.n_base_categories + 1, n_cats + 1))
    cat_names = {cid: f"base_{cid:02d}" for cid in base_ids}
    cat_names.update({cid: f"novel_{cid:02d}" for cid in novel_ids})
    scene_names = [f"scene_{i:02d}" for i in range(spec.scene_count)]

    scene_vecs = _unit_rows(rng, spec.scene_count, spec.embedding_dim)
    home_scene = rng.integers(0, spec.scene_count, size=n_cats)
    blend = spec.scene_object_affinity
    raw = _unit_rows(rng, n_cats, spec.embedding_dim)
    cat_vecs = blend * scene_vecs[home_scene] + (1.0 - blend) * raw
    cat_vecs /= np.linalg.norm(cat_vecs, axis=1, keepdims=True)

    class_table = EmbeddingTable(
        [cat_names[cid] for cid in base_ids + novel_ids], cat_vecs, normalized=True
    )
    prompted = [apply_prompt(spec.prompt_template, s) for s in scene_names]
    scene_table = EmbeddingTable(prompted, scene_vecs, normalized=True)

    contexts: list[SceneContext] = []
    image_scene: dict[Hashable, str] = {}
    gts: list[GroundTruth] = []
    detections: list[Detection] = []
    images: dict[Hashable, tuple[float, float]] = {}
    cats_by_home: dict[int, list[int]] = {}
    for idx, cid in enumerate(base_ids + novel_ids):
        cats_by_home.setdefault(int(home_scene[idx]), []).append(cid)

    noise = spec.detector_noise
    sampler_seed = int(rng.integers(0, 2**63))
    sample_counter = 0
    for img in range(1, spec.n_images + 1):
        images[img] = (spec.image_w, spec.image_h)
        true_scene = int(rng.integers(0, spec.scene_count))
        image_scene[img] = scene_names[true_scene]
        logits = rng.normal(0.0, 1.0, size=spec.scene_count)
        logits[true_scene] += 3.0
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        ranked = sorted(zip(scene_names, probs), key=lambda sp: (-sp[1], sp[0]))
        contexts.append(SceneContext(img, tuple((s, float(p)) for s, p in ranked)))

        n_obj = int(rng.integers(spec.objects_per_image[0], spec.objects_per_image[1] + 1))
        placed: dict[int, list[BBox]] = {}
        for _ in range(n_obj):
            if rng.random() < spec.scene_object_affinity and true_scene in cats_by_home:
                pool = cats_by_home[true_scene]
                cid = int(pool[rng.integers(0, len(pool))])
            else:
                cid = int((base_ids + novel_ids)[rng.integers(0, n_cats)])
            box = _place_gt(rng, spec, placed.get(cid, []))
            if box is None:
                continue
            placed.setdefault(cid, []).append(box)
            gts.append(GroundTruth(img, cid, box))

            tp_score = float(rng.uniform(0.55, 0.95))
            if noise.score_noise_sd > 0.0:
                tp_score += float(rng.normal(0.0, noise.score_noise_sd))
            tp_score = float(np.clip(tp_score, 0.05, 0.999))
            det_box = _jitter_box(rng, box, noise.localization_noise_sd, spec)
            detections.append(Detection(img, cid, det_box, tp_score))

            fp_ok = spec.fp_categories == "all" or cid in novel_ids
            if fp_ok and rng.random() < noise.partial_fp_rate:
                sm = SplitMix64.derived(sampler_seed, sample_counter)
                sample_counter += 1
                fp_box = sample_partial(box, (0.15, 0.4), sm)
                fp_score = float(np.clip(tp_score * rng.uniform(0.45, 0.85), 0.01, 1.0))
                detections.append(Detection(img, cid, fp_box, fp_score))
            if fp_ok and rng.random() < noise.oversized_fp_rate:
                sm = SplitMix64.derived(sampler_seed, sample_counter)
                sample_counter += 1
                fp_box = sample_oversized(
                    box, spec.image_w, spec.image_h, (0.15, 0.4), sm
                )
                fp_score = float(np.clip(tp_score * rng.uniform(0.45, 0.85), 0.01, 1.0))
                detections.append(Detection(img, cid, fp_box, fp_score))

    palette = {
        "scene_colors": {
            s: _golden_color(i, sat=0.22, val=0.88) for i, s in enumerate(scene_names)
        },
        "category_colors": {
            cat_names[cid]: _golden_color(100 + i, sat=0.92, val=0.85)
            for i, cid in enumerate(base_ids + novel_ids)
        },
        "category_ids": {cat_names[cid]: cid for cid in base_ids + novel_ids},
    }
    annotations = AnnotationSet(
        gts, images, [(cid, cat_names[cid]) for cid in base_ids + novel_ids]
    )
    return SyntheticWorld(
        spec=spec,
        annotations=annotations,
        detections=detections,
        class_table=class_table,
        scene_table=scene_table,
        scene_contexts=contexts,
        split=CategorySplit(frozenset(base_ids), frozenset(novel_ids)),
        scene_names=scene_names,
        image_scene=image_scene,
        palette=palette,
    )


def render_images(world: SyntheticWorld, out_dir: str | Path) -> dict:
    """Write one flat-color PPM per image plus a palette.json; returns the
    image_id -> relative-path manifest embedded in the palette file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, str] = {}
    by_image: dict[Hashable, list[GroundTruth]] = {}
    for g in world.annotations.gts:
        by_image.setdefault(g.image_id, []).append(g)
    name_of = {cid: name for cid, name in world.annotations.categories}
    for img, (w, h) in sorted(world.annotations.images.items()):
        wi, hi = int(round(w)), int(round(h))
        scene = world.image_scene[img]
        pixels = np.empty((hi, wi, 3), dtype=np.uint8)
        pixels[:] = world.palette["scene_colors"][scene]
        boxes = sorted(by_image.get(img, []), key=lambda g: -g.bbox.area)
        for g in boxes:
            color = world.palette["category_colors"][name_of[g.category_id]]
            x1 = max(0, int(round(g.bbox.x_min)))
            y1 = max(0, int(round(g.bbox.y_min)))
            x2 = min(wi, int(round(g.bbox.x_max)))
            y2 = min(hi, int(round(g.bbox.y_max)))
            pixels[y1:y2, x1:x2] = color
        rel = f"img_{img:05d}.ppm"
        with open(out_dir / rel, "wb") as fh:
            fh.write(f"P6\n{wi} {hi}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
        paths[str(img)] = rel
    palette = dict(world.palette)
    palette["images"] = paths
    palette["image_scenes"] = {str(k): v for k, v in world.image_scene.items()}
    (out_dir / "palette.json").write_text(
        json.dumps(palette, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return paths
