"""Deterministic embedding and exact k-nearest-neighbor search over documents.

The default embedder is a hashed bag-of-tokens: lowercase, split on
non-alphanumerics, FNV-1a 64-bit hash each token into one of D buckets,
count, L2-normalize. It is fully offline and bitwise reproducible, which is
what makes the whole mock pipeline deterministic. A remote adapter with the
same contract exists for deployments that want a served embedding model.

Similarity is cosine mapped affinely onto [0, 1]: score = (1 + cos) / 2.
Search is exact (full scan); corpora here are tens of documents.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateKey,
    EmptyCorpus,
    EmptyText,
    ProviderError,
    ProviderUnavailable,
)
from .tmk import Document, Kind

DEFAULT_DIMENSION = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def _fnv1a64(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


class HashingEmbedder:
    """Bag-of-tokens embedder over FNV-1a 64 bucket hashing."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.embedder_id = f"fnv1a64-bag/v1/d{dimension}"

    def embed(self, text: str) -> np.ndarray:
        """Embed text as a unit-norm float64 vector.

        Deterministic: identical text gives a bitwise-identical vector, and
        token order does not matter. Raises EmptyText when the text is blank
        or carries no alphanumeric token (the zero vector is rejected).
        """
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        tokens = tokenize(text)
        if not tokens:
            raise EmptyText("text contains no alphanumeric tokens")
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            vec[_fnv1a64(token) % self.dimension] += 1.0
        return vec / np.linalg.norm(vec)


class RemoteEmbedder:
    """Embeddings-API adapter with the same contract as HashingEmbedder.

    Speaks the common embeddings wire format: POST {endpoint} with
    {"model": ..., "input": text}, expecting {"data": [{"embedding": [...]}]}.
    Vectors are L2-normalized on receipt; zero vectors are rejected.
    """

    def __init__(self, endpoint: str, dimension: int, model_name: str = "",
                 api_key: str | None = None, timeout: float = 30.0):
        self.endpoint = endpoint
        self.dimension = dimension
        self.model_name = model_name
        self.api_key = api_key
        self.timeout = timeout
        self.embedder_id = f"remote/{model_name or 'default'}/d{dimension}"

    def embed(self, text: str) -> np.ndarray:
        import httpx

        if not text.strip():
            raise EmptyText("cannot embed empty text")
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(
                self.endpoint,
                json={"model": self.model_name, "input": text},
                headers=headers,
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"embedding endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProviderError(response.status_code, response.text)
        try:
            values = response.json()["data"][0]["embedding"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(response.status_code, response.text) from exc
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise DimensionMismatch(
                f"endpoint returned dimension {vec.shape}, index expects {self.dimension}")
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise EmptyText("embedding endpoint returned a zero vector")
        return vec / norm


@dataclass(frozen=True)
class RetrievalHit:
    element_id: str
    kind: Kind
    score: float

    def as_dict(self) -> dict:
        return {"element_id": self.element_id, "kind": self.kind.value, "score": self.score}


class VectorIndex:
    """Immutable exact-search index: unique document keys plus unit vectors."""

    def __init__(self, dimension: int, embedder_id: str,
                 entries: list[tuple[str, np.ndarray]]):
        keys = [k for k, _ in entries]
        if len(set(keys)) != len(keys):
            raise DuplicateKey("index entries must have unique keys")
        for key, vec in entries:
            if vec.shape != (dimension,):
                raise DimensionMismatch(
                    f"entry '{key}' has dimension {vec.shape[0]}, index expects {dimension}")
        self.dimension = dimension
        self.embedder_id = embedder_id
        self._keys = tuple(keys)
        self._matrix = (
            np.stack([v for _, v in entries])
            if entries else np.zeros((0, dimension), dtype=np.float64)
        )

    def __len__(self) -> int:
        return len(self._keys)

    @property
    def entries(self) -> list[tuple[str, np.ndarray]]:
        return [(k, self._matrix[i].copy()) for i, k in enumerate(self._keys)]


def _cosine(u, v) -> float:
    # correctly-rounded sum (fsum), so scores do not depend on the summation
    # order of any particular BLAS and ties resolve identically everywhere
    return math.fsum(a * b for a, b in zip(u, v))


def similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of two unit vectors mapped onto [0, 1]: (1 + cos) / 2."""
    if u.shape != v.shape:
        raise DimensionMismatch(f"dimensions differ: {u.shape[0]} vs {v.shape[0]}")
    return similarity_from_cosine(_cosine(u.tolist(), v.tolist()))


def build_index(documents: list[Document], embedder) -> VectorIndex:
    """Embed title + body of each document into a fresh index.

    Keys are "kind:element_id", which is what makes tie-breaks and dump
    files deterministic. Raises EmptyCorpus / DuplicateKey.
    """
    if not documents:
        raise EmptyCorpus("cannot build an index over zero documents")
    seen: set[str] = set()
    entries: list[tuple[str, np.ndarray]] = []
    for doc in documents:
        if doc.key in seen:
            raise DuplicateKey(f"duplicate document key '{doc.key}'")
        seen.add(doc.key)
        entries.append((doc.key, embedder.embed(f"{doc.title}\n{doc.body}")))
    return VectorIndex(embedder.dimension, embedder.embedder_id, entries)


def search(index: VectorIndex, query: np.ndarray, k: int) -> list[RetrievalHit]:
    """Exact top-k by similarity, descending; ties broken by ascending key.

    Returns min(k, len(index)) hits. Invariant under index insertion order,
    and search(k1) is a prefix of search(k2) for k1 < k2.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if query.shape != (index.dimension,):
        raise DimensionMismatch(
            f"query dimension {query.shape[0]}, index expects {index.dimension}")
    q = query.tolist()
    ranked = sorted(
        ((key, similarity_from_cosine(_cosine(q, index._matrix[i].tolist())))
         for i, key in enumerate(index._keys)),
        key=lambda pair: (-pair[1], pair[0]),
    )
    hits = []
    for key, score in ranked[: min(k, len(ranked))]:
        kind_value, element_id = key.split(":", 1)
        hits.append(RetrievalHit(element_id=element_id, kind=Kind(kind_value), score=score))
    return hits


def similarity_from_cosine(cos: float) -> float:
    return (1.0 + max(-1.0, min(1.0, cos))) / 2.0


# --- text dump (debugging aid; no binary formats) -----------------------------

_DUMP_HEADER = "asktmk-index v1"


def dump_index(index: VectorIndex) -> str:
    lines = [
        _DUMP_HEADER,
        f"dimension {index.dimension}",
        f"embedder_id {index.embedder_id}",
    ]
    for key, vec in index.entries:
        values = " ".join(repr(float(x)) for x in vec)
        lines.append(f"entry {key} {values}")
    return "\n".join(lines) + "\n"


def load_index(text: str) -> VectorIndex:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != _DUMP_HEADER:
        raise ValueError(f"not an index dump (expected header '{_DUMP_HEADER}')")
    dimension = int(lines[1].split(" ", 1)[1])
    embedder_id = lines[2].split(" ", 1)[1]
    entries = []
    for line in lines[3:]:
        _, key, values = line.split(" ", 2)
        vec = np.array([float(x) for x in values.split()], dtype=np.float64)
        entries.append((key, vec))
    return VectorIndex(dimension, embedder_id, entries)
