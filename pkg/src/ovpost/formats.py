"""File formats: embedding tables, scene contexts, COCO detections and
annotations, sample manifests, metrics reports.

Text formats carry numbers as shortest round-trip decimals; COCO bbox
coordinates are quantized to 1e-6 px on save so the corner<->xywh
conversion cannot drift. All writers are canonical: save -> load -> save
is byte-identical.

embtab v1 text layout:
    embtab v1 <dim> <count> <normalized:0|1>
    # optional comment lines (preserved verbatim)
    <name>\\t<v1> <v2> ... <vD>

embtab binary layout (magic "EMB1", little-endian): u32 dim, u32 count,
u8 normalized, then per record u16 name length, utf-8 name, dim float32.

scene-context layout:
    scenectx v1 <count>
    <image_id>\\t<scene>\\t<prob>\\t<scene>\\t<prob>...
"""

from __future__ import annotations

import json
import struct
import warnings
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from .background import EmbeddingTable, SceneContext
from .errors import (
    DuplicateName,
    FormatWarning,
    ParseError,
    ValidationError,
)
from .evaluation import EvalReport, GroundTruth
from .geometry import BBox
from .sampling import ProbeResult, ProbeSample
from .suppression import CategorySplit, Detection

__all__ = [
    "load_embedding_table",
    "save_embedding_table",
    "load_scene_contexts",
    "save_scene_contexts",
    "load_detections",
    "save_detections",
    "load_annotations",
    "save_annotations",
    "load_split",
    "save_split",
    "load_manifest",
    "save_manifest",
    "save_report",
    "report_table",
    "AnnotationSet",
]

_EMB_MAGIC = b"EMB1"
_NORM_TOL = 1e-5


def _reject(context: str, reason: str, strict: bool) -> None:
    message = f"{context}: {reason}"
    if strict:
        raise ValidationError(message)
    warnings.warn(message, FormatWarning, stacklevel=3)


def _check_name(name: str) -> None:
    if "\t" in name or "\n" in name or "\r" in name:
        raise ValidationError(f"entry name {name!r} contains tab/newline")
    if not name:
        raise ValidationError("entry name must be non-empty")


# ---------------------------------------------------------------------------
# embedding tables


def save_embedding_table(table: EmbeddingTable, path: str | Path, binary: bool = False) -> None:
    path = Path(path)
    for name in table.names:
        _check_name(name)
    if binary:
        parts = [_EMB_MAGIC, struct.pack("<IIB", table.dim, len(table), int(table.normalized))]
        for name, vec in table.items():
            raw = name.encode("utf-8")
            parts.append(struct.pack("<H", len(raw)))
            parts.append(raw)
            parts.append(np.asarray(vec, dtype="<f4").tobytes())
        path.write_bytes(b"".join(parts))
        return
    lines = [f"embtab v1 {table.dim} {len(table)} {int(table.normalized)}"]
    for comment in table.comments:
        lines.append(comment if comment.startswith("#") else f"# {comment}")
    for name, vec in table.items():
        lines.append(name + "\t" + " ".join(repr(float(v)) for v in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_embedding_binary(data: bytes, path: Path) -> EmbeddingTable:
    offset = 4
    try:
        dim, count, normalized = struct.unpack_from("<IIB", data, 4)
        offset = 4 + 9
        names = []
        rows = np.empty((count, dim), dtype=np.float64)
        for i in range(count):
            (n_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            names.append(data[offset : offset + n_len].decode("utf-8"))
            offset += n_len
            rows[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
            offset += 4 * dim
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed binary table at byte {offset}: {exc}") from None
    if offset != len(data):
        raise ParseError(f"{path}: {len(data) - offset} trailing bytes")
    return _finish_table(names, rows, bool(normalized), [], path)


def _finish_table(
    names: list[str],
    rows: np.ndarray,
    normalized: bool,
    comments: list[str],
    path: Path,
) -> EmbeddingTable:
    try:
        table = EmbeddingTable(names, rows, normalized=normalized, comments=comments)
    except DuplicateName:
        raise
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if normalized:
        norms = np.linalg.norm(table.vectors, axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > _NORM_TOL)[0]
        if bad.size:
            warnings.warn(
                f"{path}: entry {names[bad[0]]!r} declared normalized but has "
                f"norm {norms[bad[0]]:.8f}",
                FormatWarning,
                stacklevel=3,
            )
    return table


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    """Load an embtab v1 file, auto-detecting text vs binary."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == _EMB_MAGIC:
        return _load_embedding_binary(data, path)
    text = data.decode("utf-8")
    lines = text.split("\n")
    header = lines[0].split(" ")
    if len(header) != 5 or header[0] != "embtab" or header[1] != "v1":
        raise ParseError(f"{path}:1: bad header {lines[0]!r}")
    try:
        dim, count, normalized = int(header[2]), int(header[3]), int(header[4])
    except ValueError:
        raise ParseError(f"{path}:1: non-integer header fields") from None
    if normalized not in (0, 1):
        raise ParseError(f"{path}:1: normalized flag must be 0 or 1")
    names: list[str] = []
    comments: list[str] = []
    rows = np.empty((count, dim), dtype=np.float64)
    row = 0
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        if row >= count:
            raise ParseError(f"{path}:{lineno}: more records than header count {count}")
        name, sep, values = line.partition("\t")
        if not sep:
            raise ParseError(f"{path}:{lineno}: missing tab separator")
        parts = values.split(" ")
        if len(parts) != dim:
            raise ParseError(
                f"{path}:{lineno}: expected {dim} values, got {len(parts)}"
            )
        try:
            rows[row] = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        names.append(name)
        row += 1
    if row != count:
        raise ParseError(f"{path}: header promises {count} records, found {row}")
    return _finish_table(names, rows, bool(normalized), comments, path)


# ---------------------------------------------------------------------------
# scene contexts


def save_scene_contexts(contexts: Sequence[SceneContext], path: str | Path) -> None:
    lines = [f"scenectx v1 {len(contexts)}"]
    for ctx in contexts:
        cells = [str(ctx.image_id)]
        for scene, prob in ctx.scenes:
            _check_name(scene)
            cells.append(scene)
            cells.append(repr(float(prob)))
        lines.append("\t".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_image_id(token: str) -> Hashable:
    try:
        return int(token)
    except ValueError:
        return token


def load_scene_contexts(path: str | Path) -> list[SceneContext]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    header = lines[0].split(" ")
    if len(header) != 3 or header[0] != "scenectx" or header[1] != "v1":
        raise ParseError(f"{path}:1: bad header {lines[0]!r}")
    try:
        count = int(header[2])
    except ValueError:
        raise ParseError(f"{path}:1: non-integer count") from None
    out: list[SceneContext] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) < 3 or len(cells) % 2 == 0:
            raise ParseError(f"{path}:{lineno}: expected id + (scene, prob) pairs")
        scenes = []
        for i in range(1, len(cells), 2):
            try:
                scenes.append((cells[i], float(cells[i + 1])))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
        try:
            out.append(SceneContext(_parse_image_id(cells[0]), tuple(scenes)))
        except ValidationError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    if len(out) != count:
        raise ParseError(f"{path}: header promises {count} records, found {len(out)}")
    return out


# ---------------------------------------------------------------------------
# COCO-format detections and annotations


def _q6(v: float) -> float:
    """Quantize a coordinate to the 1e-6 px grid used on disk."""
    return round(float(v), 6)


def _bbox_from_xywh(raw, context: str) -> BBox:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 4):
        raise ValidationError(f"{context}: bbox must be [x, y, w, h]")
    x, y, w, h = (float(v) for v in raw)
    if w <= 0.0 or h <= 0.0:
        raise ValidationError(f"{context}: non-positive bbox size {w}x{h}")
    return BBox(x, y, x + w, y + h)


def _bbox_to_xywh(b: BBox) -> list[float]:
    return [_q6(b.x_min), _q6(b.y_min), _q6(b.x_max - b.x_min), _q6(b.y_max - b.y_min)]


def _write_records(records: Iterable[dict], path: Path) -> None:
    body = ",\n".join(json.dumps(r, sort_keys=True) for r in records)
    path.write_text("[\n" + body + "\n]\n" if body else "[]\n", encoding="utf-8")


def load_detections(path: str | Path, strict: bool = False) -> list[Detection]:
    """Load a COCO-results array; bad records are skipped with a warning
    (or raise under strict)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(data, list):
        raise ParseError(f"{path}: top level must be an array")
    out: list[Detection] = []
    for i, rec in enumerate(data):
        context = f"{path}: record {i}"
        try:
            if not isinstance(rec, dict):
                raise ValidationError(f"{context}: not an object")
            bbox = _bbox_from_xywh(rec["bbox"], context)
            score = float(rec["score"])
            if not 0.0 <= score <= 1.0:
                raise ValidationError(f"{context}: score {score} outside [0, 1]")
            out.append(Detection(rec["image_id"], rec["category_id"], bbox, score))
        except (KeyError, TypeError) as exc:
            _reject(context, f"missing/invalid field ({exc!r})", strict)
        except ValidationError as exc:
            _reject(context, str(exc), strict)
    return out


def save_detections(dets: Sequence[Detection], path: str | Path) -> None:
    records = [
        {
            "bbox": _bbox_to_xywh(d.bbox),
            "category_id": d.category_id,
            "image_id": d.image_id,
            "score": float(d.score),
        }
        for d in dets
    ]
    _write_records(records, Path(path))


class AnnotationSet:
    """Parsed COCO annotations: ground truths plus image and category maps."""

    def __init__(
        self,
        gts: list[GroundTruth],
        images: dict[Hashable, tuple[float, float]],
        categories: list[tuple[Hashable, str]],
    ) -> None:
        self.gts = gts
        self.images = images
        self.categories = categories

    @property
    def id_to_name(self) -> dict:
        return {cid: name for cid, name in self.categories}


def load_annotations(path: str | Path, strict: bool = False) -> AnnotationSet:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    images: dict[Hashable, tuple[float, float]] = {}
    for i, rec in enumerate(data.get("images", [])):
        try:
            images[rec["id"]] = (float(rec["width"]), float(rec["height"]))
        except (KeyError, TypeError, ValueError):
            _reject(f"{path}: images[{i}]", "missing id/width/height", strict)
    categories = []
    for rec in data.get("categories", []):
        categories.append((rec["id"], str(rec.get("name", rec["id"]))))
    gts: list[GroundTruth] = []
    for i, rec in enumerate(data.get("annotations", [])):
        context = f"{path}: annotations[{i}]"
        try:
            bbox = _bbox_from_xywh(rec["bbox"], context)
            gts.append(
                GroundTruth(
                    rec["image_id"],
                    rec["category_id"],
                    bbox,
                    crowd_flag=bool(rec.get("iscrowd", 0)),
                )
            )
        except (KeyError, TypeError) as exc:
            _reject(context, f"missing/invalid field ({exc!r})", strict)
        except ValidationError as exc:
            _reject(context, str(exc), strict)
    return AnnotationSet(gts, images, categories)


def save_annotations(ann: AnnotationSet, path: str | Path) -> None:
    payload = {
        "annotations": [
            {
                "bbox": _bbox_to_xywh(g.bbox),
                "category_id": g.category_id,
                "id": i + 1,
                "image_id": g.image_id,
                "iscrowd": int(g.crowd_flag),
            }
            for i, g in enumerate(ann.gts)
        ],
        "categories": [{"id": cid, "name": name} for cid, name in ann.categories],
        "images": [
            {"height": _q6(h), "id": iid, "width": _q6(w)}
            for iid, (w, h) in sorted(ann.images.items(), key=lambda kv: repr(kv[0]))
        ],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# category splits


def load_split(path: str | Path) -> CategorySplit:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return CategorySplit(frozenset(data["base"]), frozenset(data["novel"]))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: expected {{'base': [...], 'novel': [...]}} ({exc!r})") from None


def save_split(split: CategorySplit, path: str | Path) -> None:
    payload = {"base": sorted(split.base, key=repr), "novel": sorted(split.novel, key=repr)}
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# region sample manifests


def save_manifest(result: ProbeResult, path: str | Path) -> None:
    records = [
        {
            "bin_index": s.bin_index,
            "box": [s.box.x_min, s.box.y_min, s.box.x_max, s.box.y_max],
            "gt": [s.gt.x_min, s.gt.y_min, s.gt.x_max, s.gt.y_max],
            "image_id": s.image_id,
            "iou_range": list(s.iou_range),
            "kind": s.kind,
            "region_id": s.region_id,
        }
        for s in result.samples
    ]
    payload = {"failures": list(result.failures), "samples": records}
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_manifest(path: str | Path) -> ProbeResult:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    samples = []
    try:
        for rec in data["samples"]:
            samples.append(
                ProbeSample(
                    region_id=rec["region_id"],
                    image_id=rec["image_id"],
                    gt=BBox(*rec["gt"]),
                    box=BBox(*rec["box"]),
                    kind=rec["kind"],
                    bin_index=int(rec["bin_index"]),
                    iou_range=tuple(rec["iou_range"]),
                )
            )
        return ProbeResult(tuple(samples), tuple(data.get("failures", ())))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed manifest ({exc!r})") from None


# ---------------------------------------------------------------------------
# evaluation reports


def save_report(report: EvalReport, path: str | Path) -> None:
    payload = {
        "counts": {
            "n_dets": report.n_dets,
            "n_gts": report.n_gts,
            "n_images": report.n_images,
        },
        "iou_thr": report.iou_thr,
        "map_all": report.map_all,
        "map_base": report.map_base,
        "map_novel": report.map_novel,
        "per_category": [
            {
                "ap": report.per_category_ap.get(cat),
                "category_id": cat,
                "n_gt": report.per_category_n_gt[cat],
            }
            for cat in sorted(report.per_category_n_gt, key=repr)
        ],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def _fmt(v: float | None) -> str:
    return "   --" if v is None else f"{v:.4f}"


def report_table(report: EvalReport) -> str:
    """Aligned human-readable summary of an EvalReport."""
    rows = [
        f"AP@{report.iou_thr:.2f} over {report.n_images} images, "
        f"{report.n_gts} gts, {report.n_dets} detections",
        f"{'category':>12}  {'n_gt':>5}  {'ap':>6}",
    ]
    for cat in sorted(report.per_category_n_gt, key=repr):
        ap = report.per_category_ap.get(cat)
        rows.append(f"{str(cat):>12}  {report.per_category_n_gt[cat]:>5}  {_fmt(ap):>6}")
    rows.append(f"{'mAP base':>12}  {'':>5}  {_fmt(report.map_base):>6}")
    rows.append(f"{'mAP novel':>12}  {'':>5}  {_fmt(report.map_novel):>6}")
    rows.append(f"{'mAP all':>12}  {'':>5}  {_fmt(report.map_all):>6}")
    return "\n".join(rows)
