"""Post-processing toolkit for open-vocabulary object detection.

Building blocks: box geometry (IoU and overlap area ratio), NMS and
partial-object suppression, scene-aware background embeddings with score
re-scoring, region sampling at prescribed IoU, AP50 evaluation over
base/novel/all category splits, and a CLI tying them into a pipeline.
"""

from .background import (
    BackgroundEmbedding,
    EmbeddingTable,
    RescoreTable,
    SceneContext,
    blend_scores,
    build_background_embedding,
    normalize_table,
    rescore_coefficients,
    rescore_detections,
    score_regions,
)
from .config import Config
from .evaluation import EvalReport, GroundTruth, average_precision, evaluate, match_detections
from .geometry import BBox, area, intersection_area, iou, oar
from .kernels import BACKEND
from .pipeline import PipelineInputs, PipelineResult, run_pipeline, sweep
from .sampling import SampleSpec, probe_bins, sample_oversized, sample_partial
from .suppression import CategorySplit, Detection, apply_pos, nms, pos_suppress
from .synth import DetectorNoise, SyntheticWorldSpec, generate_synthetic_world

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BBox",
    "BackgroundEmbedding",
    "CategorySplit",
    "Config",
    "Detection",
    "DetectorNoise",
    "EmbeddingTable",
    "EvalReport",
    "GroundTruth",
    "PipelineInputs",
    "PipelineResult",
    "RescoreTable",
    "SampleSpec",
    "SceneContext",
    "SyntheticWorldSpec",
    "apply_pos",
    "area",
    "average_precision",
    "blend_scores",
    "build_background_embedding",
    "evaluate",
    "generate_synthetic_world",
    "intersection_area",
    "iou",
    "match_detections",
    "nms",
    "normalize_table",
    "oar",
    "pos_suppress",
    "probe_bins",
    "rescore_coefficients",
    "rescore_detections",
    "run_pipeline",
    "sample_oversized",
    "sample_partial",
    "score_regions",
    "sweep",
]
