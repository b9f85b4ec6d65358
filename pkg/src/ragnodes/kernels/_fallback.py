"""Pure-Python/numpy kernels; numerically identical to the compiled ones.

Dot products accumulate column by column so each row sum is formed in the
same left-to-right order as the compiled loop, which keeps scores bitwise
equal across implementations.
"""

from __future__ import annotations

import numpy as np


def scores(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    n, d = matrix.shape
    out = np.zeros(n, dtype=np.float64)
    for j in range(d):
        out += matrix[:, j] * query[j]
    return out


def topk(matrix: np.ndarray, query: np.ndarray, k: int,
         mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Indices and scores of the k best rows, ordered by (-score, row index)."""
    s = scores(matrix, query)
    idx = np.arange(len(s))
    if mask is not None:
        keep = mask.astype(bool)
        s, idx = s[keep], idx[keep]
    if len(s) == 0 or k <= 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    k = min(k, len(s))
    if k < len(s):
        kth = np.partition(s, len(s) - k)[len(s) - k]
        pick = s >= kth
        s, idx = s[pick], idx[pick]
    order = np.lexsort((idx, -s))[:k]
    return idx[order].astype(np.int64), s[order]


def mean_of_means(values: np.ndarray, offsets: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-group arithmetic means of a ragged array and the mean over groups."""
    n = len(offsets) - 1
    per = np.zeros(n)
    total = 0.0
    for i in range(n):
        a, b = int(offsets[i]), int(offsets[i + 1])
        acc = 0.0
        for j in range(a, b):
            acc += float(values[j])
        per[i] = acc / (b - a) if b > a else 0.0
        total += per[i]
    return per, (total / n if n else 0.0)


def contextual_precision(relevance: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Rank-weighted precision per group; a group without relevant entries scores 0."""
    n = len(offsets) - 1
    per = np.zeros(n)
    for i in range(n):
        a, b = int(offsets[i]), int(offsets[i + 1])
        cum = 0.0
        acc = 0.0
        for j in range(a, b):
            r = float(relevance[j])
            cum += r
            acc += (cum / (j - a + 1)) * r
        per[i] = acc / cum if cum > 0.0 else 0.0
    return per
