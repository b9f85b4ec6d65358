from __future__ import annotations

import math

import numpy as np
import pytest

from ragnodes import kernels
from ragnodes.index import EmbeddingRecord, InMemoryVectorStore


def _oracle_topk(matrix, q, k, mask=None):
    rows = [(-math.fsum(float(a) * float(b) for a, b in zip(row, q)), i)
            for i, row in enumerate(matrix) if mask is None or mask[i]]
    return [i for _, i in sorted(rows)[:k]]


@pytest.mark.parametrize("seed", range(5))
def test_topk_matches_oracle(kernel_impl, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((300, 16))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    q = m[7].copy()
    idx, s = kernels.topk(m, q, 5)
    assert idx.tolist() == _oracle_topk(m, q, 5)
    assert idx[0] == 7
    mask = (rng.random(300) < 0.3).astype(np.uint8)
    idx, _ = kernels.topk(m, q, 5, mask)
    assert idx.tolist() == _oracle_topk(m, q, 5, mask)


def test_topk_ties_and_truncation(kernel_impl):
    m = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    idx, s = kernels.topk(m, np.array([1.0, 0.0]), 10)
    assert idx.tolist() == [0, 1, 3, 2]
    assert s.tolist() == [1.0, 1.0, 1.0, 0.0]
    idx, _ = kernels.topk(m, np.array([1.0, 0.0]), 2, np.zeros(4, dtype=np.uint8))
    assert idx.tolist() == []


def test_mean_of_means_and_precision(kernel_impl):
    values = np.array([1.0, 0.6, 0.5, 1.0, 0.0, 1.0])
    offsets = np.array([0, 2, 3, 6])
    per, mean = kernels.mean_of_means(values, offsets)
    assert per.tolist() == pytest.approx([0.8, 0.5, 2 / 3], abs=1e-15)
    assert mean == pytest.approx((0.8 + 0.5 + 2 / 3) / 3, abs=1e-15)
    per = kernels.contextual_precision(values, offsets)
    assert len(per) == 3
    assert kernels.contextual_precision(np.array([0.0, 0.0]), np.array([0, 2])).tolist() == [0.0]


def test_implementations_bitwise_equal():
    if len(kernels.available_backends()) < 2:
        pytest.skip("compiled kernels not built")
    py, cy = kernels.implementation("python"), kernels.implementation("cython")
    rng = np.random.default_rng(42)
    m = rng.standard_normal((2000, 64))
    q = rng.standard_normal(64)
    assert np.array_equal(py.scores(m, q), cy.scores(m, q))
    for k in (1, 5, 50):
        a, b = py.topk(m, q, k), cy.topk(m, q, k)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    vals = rng.choice([0.0, 0.2, 0.4, 0.6, 0.8, 1.0], 40)
    offs = np.array([0, 3, 3, 10, 25, 40])
    for fn in ("mean_of_means",):
        pa, ma = getattr(py, fn)(vals, offs)
        pb, mb = getattr(cy, fn)(vals, offs)
        assert np.array_equal(pa, pb) and ma == mb
    assert np.array_equal(py.contextual_precision(vals, offs), cy.contextual_precision(vals, offs))


def test_unknown_implementation():
    with pytest.raises(ImportError):
        kernels.implementation("fortran")


def test_store_uses_active_kernel(kernel_impl):
    store = InMemoryVectorStore()
    for i, v in enumerate(([1.0, 0.0], [0.0, 1.0], [0.7, 0.7])):
        store.upsert(EmbeddingRecord(f"d/{i}", np.array(v), "", {"doc_id": "d"}))
    assert [h.node_id for h in store.query(np.array([1.0, 0.1]), 3)] == ["d/0", "d/2", "d/1"]
