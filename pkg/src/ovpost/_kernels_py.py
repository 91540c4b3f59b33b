"""Pure-numpy kernel implementations.

Fallback backend used when the compiled extension is unavailable. Both
backends must produce bit-identical results; tests/test_kernels.py holds
them to that.
"""

from __future__ import annotations

import numpy as np


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(N, M) IoU matrix for corner-format boxes; 0 where the union is 0."""
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def pairwise_oar(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(N, M) overlap-area-ratio matrix |a_i n b_j| / |a_i|; 0 for zero-area a_i."""
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    out = np.zeros_like(inter)
    np.divide(inter, area_a[:, None], out=out, where=area_a[:, None] > 0.0)
    return out


def greedy_keep(boxes: np.ndarray, order: np.ndarray, threshold: float, use_oar: bool) -> np.ndarray:
    """Greedy suppression walk over `order`; returns kept indices in keep order.

    A candidate at position i is discarded iff its overlap metric against an
    already-kept box is >= threshold. use_oar selects OAR(candidate, kept)
    instead of IoU(candidate, kept).
    """
    n = order.shape[0]
    ob = boxes[order]
    oa = (ob[:, 2] - ob[:, 0]) * (ob[:, 3] - ob[:, 1])
    suppressed = np.zeros(n, dtype=bool)
    kept: list[int] = []
    for i in range(n):
        if suppressed[i]:
            continue
        kept.append(int(order[i]))
        if i + 1 == n:
            break
        iw = np.minimum(ob[i + 1 :, 2], ob[i, 2]) - np.maximum(ob[i + 1 :, 0], ob[i, 0])
        ih = np.minimum(ob[i + 1 :, 3], ob[i, 3]) - np.maximum(ob[i + 1 :, 1], ob[i, 1])
        inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
        if use_oar:
            denom = oa[i + 1 :]
        else:
            denom = oa[i + 1 :] + oa[i] - inter
        metric = np.zeros_like(inter)
        np.divide(inter, denom, out=metric, where=denom > 0.0)
        suppressed[i + 1 :] |= metric >= threshold
    return np.asarray(kept, dtype=np.int64)
