"""Note embeddings via an HTTP endpoint or a deterministic mock, plus
cosine-based similarity metrics."""

from __future__ import annotations

import hashlib
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jsonio
from .errors import DataError
from .httpapi import EndpointConfig  # re-exported: endpoint config lives with the client

__all__ = [
    "EmbeddingVector",
    "EmbeddingCache",
    "EndpointConfig",
    "embed_batch",
    "mock_embed",
    "mock_embed_many",
    "cosine_similarity",
    "set_similarity",
]


@dataclass
class EmbeddingVector:
    id: str
    values: np.ndarray
    model: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"embedding for {self.id!r} has non-finite components")


class EmbeddingCache:
    """Append-only JSONL cache keyed by (note id, model).

    Hits return bit-identical vectors: floats are serialized with
    Python's repr round-trip, so the stored and reloaded float64 values
    are exactly equal.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._store: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            for _, rec in jsonio.read_jsonl(self.path):
                key = (str(rec["id"]), str(rec["model"]))
                self._store[key] = np.asarray(rec["vector"], dtype=np.float64)

    def __len__(self) -> int:
        return len(self._store)

    def get(self, note_id: str, model: str) -> np.ndarray | None:
        return self._store.get((note_id, model))

    def put(self, vec: EmbeddingVector) -> None:
        with self._lock:
            key = (vec.id, vec.model)
            if key in self._store:
                return
            self._store[key] = vec.values
            jsonio.append_jsonl(
                self.path,
                [{"id": vec.id, "model": vec.model, "vector": vec.values.tolist()}],
            )


def embed_batch(texts: list[tuple[str, str]], cfg: EndpointConfig,
                cache: EmbeddingCache | None = None) -> list[EmbeddingVector]:
    """Embed (id, text) pairs, preserving input order.

    Cached ids are never re-sent.  Uncached texts are chunked into
    requests of at most cfg.max_batch and issued with up to
    cfg.concurrency parallel requests; results are reassembled in input
    order and appended to the cache.
    """
    from .httpapi import embeddings_request

    if not texts:
        raise DataError("embed_batch requires nonempty input")
    results: list[np.ndarray | None] = [None] * len(texts)
    pending: list[tuple[int, str, str]] = []
    for pos, (note_id, text) in enumerate(texts):
        hit = cache.get(note_id, cfg.model) if cache is not None else None
        if hit is not None:
            results[pos] = hit
        else:
            pending.append((pos, note_id, text))

    if pending:
        chunks = [pending[i:i + cfg.max_batch]
                  for i in range(0, len(pending), cfg.max_batch)]

        def fetch(chunk):
            return embeddings_request(cfg, [t for _, _, t in chunk])

        if cfg.concurrency > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
                chunk_vectors = list(pool.map(fetch, chunks))
        else:
            chunk_vectors = [fetch(c) for c in chunks]

        for chunk, vectors in zip(chunks, chunk_vectors):
            if len(vectors) != len(chunk):
                raise DataError(
                    f"endpoint returned {len(vectors)} vectors for "
                    f"{len(chunk)} inputs"
                )
            for (pos, note_id, _), vec in zip(chunk, vectors):
                ev = EmbeddingVector(note_id, np.asarray(vec, dtype=np.float64),
                                     cfg.model)
                results[pos] = ev.values
                if cache is not None:
                    cache.put(ev)

    dims = {v.shape[0] for v in results}
    if len(dims) != 1:
        raise DataError(f"embedding dimension mismatch within batch: {sorted(dims)}")
    return [EmbeddingVector(note_id, vec, cfg.model)
            for (note_id, _), vec in zip(texts, results)]


def _hash_bucket(gram: str, d: int, seed: int) -> tuple[int, float]:
    digest = hashlib.blake2b(
        f"{seed}|{gram}".encode("utf-8"), digest_size=8
    ).digest()
    value = int.from_bytes(digest, "big")
    return value % d, 1.0 if (value >> 63) & 1 else -1.0


def mock_embed(text: str, d: int, seed: int) -> np.ndarray:
    """Deterministic stand-in embedding: signed feature hashing of
    unigrams and bigrams into d buckets, L2-normalized."""
    if d < 2:
        raise DataError("mock embedding dimension must be >= 2")
    tokens = text.lower().split()
    vec = np.zeros(d, dtype=np.float64)
    grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    for gram in grams:
        bucket, sign = _hash_bucket(gram, d, seed)
        vec[bucket] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def mock_embed_many(texts: list[tuple[str, str]], d: int, seed: int,
                    model: str = "mock") -> list[EmbeddingVector]:
    return [EmbeddingVector(note_id, mock_embed(text, d, seed), model)
            for note_id, text in texts]


def _as_matrix(vectors) -> np.ndarray:
    rows = [v.values if isinstance(v, EmbeddingVector) else np.asarray(v, float)
            for v in vectors]
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise DataError(f"mixed embedding dimensions: {sorted(dims)}")
    return np.vstack(rows)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DataError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DataError("cosine similarity of a zero-norm vector")
    return float(np.dot(u, v) / (nu * nv))


def set_similarity(synthetic, real) -> float:
    """Mean cosine similarity over all synthetic x real pairs.

    Computed as the dot product of the two mean unit-vector fields,
    which equals the all-pairs mean exactly.
    """
    if len(synthetic) == 0 or len(real) == 0:
        raise DataError("set_similarity requires nonempty sets")
    s = _as_matrix(synthetic)
    r = _as_matrix(real)
    if s.shape[1] != r.shape[1]:
        raise DataError(f"dimension mismatch: {s.shape[1]} vs {r.shape[1]}")
    s_norms = np.linalg.norm(s, axis=1)
    r_norms = np.linalg.norm(r, axis=1)
    if np.any(s_norms == 0.0) or np.any(r_norms == 0.0):
        raise DataError("set_similarity with a zero-norm vector")
    s_mean = (s / s_norms[:, None]).mean(axis=0)
    r_mean = (r / r_norms[:, None]).mean(axis=0)
    return float(np.dot(s_mean, r_mean))
