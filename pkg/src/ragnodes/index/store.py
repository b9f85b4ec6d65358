"""Vector store contract and the in-memory exhaustive reference store."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .. import kernels
from ..errors import DimensionMismatch, EmptyIndex, MetadataTooLarge

METADATA_LIMIT_BYTES = 40960
DEFAULT_NAMESPACE = "default"


def metadata_bytes(metadata: dict) -> int:
    """Size of the compact UTF-8 JSON encoding, the figure the limit applies to."""
    return len(json.dumps(metadata, sort_keys=True, ensure_ascii=False,
                          separators=(",", ":")).encode("utf-8"))


@dataclass(frozen=True)
class EmbeddingRecord:
    node_id: str
    vector: np.ndarray
    source_text: str
    metadata: dict = field(default_factory=dict)
    namespace: str = DEFAULT_NAMESPACE

    @property
    def doc_id(self) -> str | None:
        return self.metadata.get("doc_id")

    def to_json(self) -> str:
        return json.dumps({
            "node_id": self.node_id,
            "vector": [float(x) for x in self.vector],
            "source_text": self.source_text,
            "metadata": self.metadata,
            "namespace": self.namespace,
        }, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> EmbeddingRecord:
        d = json.loads(line)
        return cls(d["node_id"], np.asarray(d["vector"], dtype=np.float64), d["source_text"],
                   d.get("metadata", {}), d.get("namespace", DEFAULT_NAMESPACE))


@dataclass(frozen=True)
class RetrievalHit:
    node_id: str
    score: float
    rank: int
    metadata: dict = field(default_factory=dict)


class VectorStore(Protocol):
    def upsert(self, record: EmbeddingRecord) -> str: ...
    def query(self, vector: np.ndarray, k: int, namespace: str = DEFAULT_NAMESPACE,
              doc_filter: Iterable[str] | None = None,
              kinds: Iterable[str] | None = None) -> list[RetrievalHit]: ...
    def delete(self, node_ids: Iterable[str], namespace: str = DEFAULT_NAMESPACE) -> int: ...
    def stats(self, namespace: str = DEFAULT_NAMESPACE) -> dict: ...
    def namespaces(self) -> list[str]: ...


@dataclass(frozen=True)
class _Snapshot:
    """Immutable view used by queries: rows sorted by node_id."""
    ids: tuple[str, ...]
    matrix: np.ndarray
    doc_ids: np.ndarray
    kinds: np.ndarray
    metadata: tuple[dict, ...]


class _Namespace:
    def __init__(self):
        self.records: dict[str, EmbeddingRecord] = {}
        self.dim: int | None = None
        self.lock = threading.Lock()
        self.snapshot: _Snapshot | None = None

    def build(self) -> _Snapshot:
        ids = tuple(sorted(self.records))
        if ids:
            matrix = np.ascontiguousarray(np.stack([self.records[i].vector for i in ids]))
        else:
            matrix = np.zeros((0, self.dim or 0))
        matrix.setflags(write=False)
        doc_ids = np.array([self.records[i].metadata.get("doc_id", "") for i in ids], dtype=object)
        kinds = np.array([self.records[i].metadata.get("kind", "") for i in ids], dtype=object)
        return _Snapshot(ids, matrix, doc_ids, kinds, tuple(self.records[i].metadata for i in ids))


class InMemoryVectorStore:
    """Exhaustive cosine index, one namespace per knowledge base.

    Vectors are L2-normalised on upsert so the dot product is the cosine.
    Writers serialise per namespace and publish a fresh immutable snapshot;
    readers only ever see a complete snapshot.
    """

    def __init__(self, dim: int | None = None, metadata_limit_bytes: int = METADATA_LIMIT_BYTES):
        self.dim = dim
        self.metadata_limit_bytes = metadata_limit_bytes
        self._spaces: dict[str, _Namespace] = {}
        self._lock = threading.Lock()

    def _space(self, namespace: str, create: bool = False) -> _Namespace | None:
        with self._lock:
            space = self._spaces.get(namespace)
            if space is None and create:
                space = self._spaces[namespace] = _Namespace()
                space.dim = self.dim
            return space

    def upsert(self, record: EmbeddingRecord, normalize: bool = True) -> str:
        vector = np.asarray(record.vector, dtype=np.float64).ravel()
        size = metadata_bytes(record.metadata)
        if size > self.metadata_limit_bytes:
            raise MetadataTooLarge(f"{record.node_id}: metadata is {size} bytes, "
                                   f"limit {self.metadata_limit_bytes}")
        norm = float(np.linalg.norm(vector))
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError(f"{record.node_id}: vector has no direction")
        space = self._space(record.namespace, create=True)
        with space.lock:
            if space.dim is None:
                space.dim = len(vector)
            if len(vector) != space.dim:
                raise DimensionMismatch(f"{record.node_id}: dimension {len(vector)}, "
                                        f"index has {space.dim}")
            stored = EmbeddingRecord(record.node_id, vector / norm if normalize else vector.copy(),
                                     record.source_text, dict(record.metadata), record.namespace)
            stored.vector.setflags(write=False)
            space.records[record.node_id] = stored
            space.snapshot = None
        return record.node_id

    def upsert_many(self, records: Iterable[EmbeddingRecord]) -> int:
        return sum(1 for r in records if self.upsert(r))

    def _snapshot(self, namespace: str) -> _Snapshot | None:
        space = self._space(namespace)
        if space is None:
            return None
        with space.lock:
            if space.snapshot is None:
                space.snapshot = space.build()
            return space.snapshot

    def query(self, vector: np.ndarray, k: int, namespace: str = DEFAULT_NAMESPACE,
              doc_filter: Iterable[str] | None = None,
              kinds: Iterable[str] | None = None) -> list[RetrievalHit]:
        """Top-k by cosine; ties go to the lower node_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        snap = self._snapshot(namespace)
        if snap is None or not snap.ids:
            raise EmptyIndex(f"namespace {namespace!r} has no records")
        q = np.asarray(vector, dtype=np.float64).ravel()
        if len(q) != snap.matrix.shape[1]:
            raise DimensionMismatch(f"query dimension {len(q)}, index has {snap.matrix.shape[1]}")
        norm = float(np.linalg.norm(q))
        q = q / norm if norm else q
        mask = None
        if doc_filter is not None:
            mask = np.isin(snap.doc_ids, list(doc_filter))
        if kinds is not None:
            km = np.isin(snap.kinds, list(kinds))
            mask = km if mask is None else mask & km
        idx, scores = kernels.topk(snap.matrix, q, k, None if mask is None else mask.astype(np.uint8))
        return [RetrievalHit(snap.ids[i], min(1.0, max(-1.0, float(s))), rank, snap.metadata[i])
                for rank, (i, s) in enumerate(zip(idx, scores), start=1)]

    def get(self, node_id: str, namespace: str = DEFAULT_NAMESPACE) -> EmbeddingRecord:
        space = self._space(namespace)
        if space is None or node_id not in space.records:
            raise KeyError(node_id)
        return space.records[node_id]

    def records(self, namespace: str = DEFAULT_NAMESPACE) -> list[EmbeddingRecord]:
        space = self._space(namespace)
        if space is None:
            return []
        with space.lock:
            return [space.records[i] for i in sorted(space.records)]

    def delete(self, node_ids: Iterable[str], namespace: str = DEFAULT_NAMESPACE) -> int:
        space = self._space(namespace)
        if space is None:
            return 0
        with space.lock:
            removed = sum(1 for nid in list(node_ids) if space.records.pop(nid, None) is not None)
            if removed:
                space.snapshot = None
            return removed

    def delete_document(self, doc_id: str, namespace: str = DEFAULT_NAMESPACE) -> int:
        return self.delete([r.node_id for r in self.records(namespace) if r.doc_id == doc_id], namespace)

    def stats(self, namespace: str = DEFAULT_NAMESPACE) -> dict:
        recs = self.records(namespace)
        kinds: dict[str, int] = {}
        for r in recs:
            kind = r.metadata.get("kind", "")
            kinds[kind] = kinds.get(kind, 0) + 1
        space = self._space(namespace)
        return {"namespace": namespace, "count": len(recs), "dim": space.dim if space else self.dim,
                "documents": sorted({r.doc_id for r in recs if r.doc_id}),
                "kinds": dict(sorted(kinds.items()))}

    def namespaces(self) -> list[str]:
        with self._lock:
            return sorted(ns for ns, s in self._spaces.items() if s.records)

    def index_path(self, out_dir: Path | str, namespace: str = DEFAULT_NAMESPACE) -> Path:
        return Path(out_dir) / f"{namespace}.index.jsonl"

    def save(self, out_dir: Path | str, namespace: str = DEFAULT_NAMESPACE) -> Path:
        path = self.index_path(out_dir, namespace)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".jsonl.tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for rec in self.records(namespace):
                fh.write(rec.to_json() + "\n")
        tmp.replace(path)
        return path

    def load(self, path: Path | str) -> int:
        n = 0
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    # stored vectors are already unit length; keep their exact bits
                    self.upsert(EmbeddingRecord.from_json(line), normalize=False)
                    n += 1
        return n

    @classmethod
    def from_file(cls, path: Path | str, **kwargs) -> InMemoryVectorStore:
        store = cls(**kwargs)
        store.load(path)
        return store
