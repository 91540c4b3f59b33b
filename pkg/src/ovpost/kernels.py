"""Kernel backend selection.

Imports the compiled extension when present, otherwise the pure-numpy
fallback. Set OVPOST_PURE_PYTHON=1 to force the fallback. Both backends
implement the same contracts and return identical arrays.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("OVPOST_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "pairwise_iou",
    "pairwise_oar",
    "suppression_order",
    "greedy_keep",
]


def available_backends() -> dict[str, object]:
    """Importable backend modules by name."""
    backends: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _ckernels

        backends["cython"] = _ckernels
    except ImportError:
        pass
    return backends


def get_backend(name: str):
    return available_backends()[name]


def _as_boxes(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 4:
        raise ValueError(f"expected (N, 4) box array, got shape {a.shape}")
    return a


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(N, M) IoU matrix; entries with zero union are 0."""
    return _impl.pairwise_iou(_as_boxes(a), _as_boxes(b))


def pairwise_oar(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(N, M) matrix of |a_i n b_j| / |a_i|; rows of zero-area a_i are 0."""
    return _impl.pairwise_oar(_as_boxes(a), _as_boxes(b))


def suppression_order(boxes: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Greedy processing order: score desc, then area desc, then index asc.

    The tie rule is part of the suppression contract; both suppression
    algorithms and their oracles must share it for set equality.
    """
    boxes = _as_boxes(boxes)
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    n = scores.shape[0]
    return np.lexsort((np.arange(n), -areas, -scores)).astype(np.int64)


def greedy_keep(
    boxes: np.ndarray,
    scores: np.ndarray,
    threshold: float,
    use_oar: bool,
    backend=None,
) -> np.ndarray:
    """Indices kept by greedy suppression, in keep (descending-rank) order."""
    boxes = _as_boxes(boxes)
    order = suppression_order(boxes, scores)
    impl = _impl if backend is None else backend
    return impl.greedy_keep(boxes, order, float(threshold), bool(use_oar))
