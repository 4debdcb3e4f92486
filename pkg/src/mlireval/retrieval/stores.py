"""Vector stores and the dense / sparse / late-interaction scoring kernels.

Stores hold 32-bit payloads; every score accumulates in 64-bit floats so
metric values do not depend on platform BLAS width.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import Corpus
from ..errors import DataError, FormatError


@dataclass
class DenseStore:
    """One vector per id; queries and passages may share a store."""

    ids: tuple[str, ...]
    matrix: np.ndarray  # (n, dim) float32
    _row: dict[str, int] = field(init=False, repr=False)
    _matrix64: np.ndarray | None = field(default=None, init=False, repr=False)
    _norms: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.matrix.ndim != 2 or len(self.ids) != self.matrix.shape[0]:
            raise FormatError("dense store shape does not match id count")
        self._row = {}
        for i, rid in enumerate(self.ids):
            if rid in self._row:
                raise FormatError(f"duplicate id {rid!r} in dense store")
            self._row[rid] = i

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __contains__(self, rid: str) -> bool:
        return rid in self._row

    def row(self, rid: str) -> int:
        try:
            return self._row[rid]
        except KeyError:
            raise DataError(f"id {rid!r} not present in dense store") from None

    def vector(self, rid: str) -> np.ndarray:
        return self.matrix[self.row(rid)]

    def matrix64(self) -> np.ndarray:
        if self._matrix64 is None:
            self._matrix64 = self.matrix.astype(np.float64)
        return self._matrix64

    def norms(self) -> np.ndarray:
        if self._norms is None:
            self._norms = np.sqrt(np.einsum("ij,ij->i", self.matrix64(), self.matrix64()))
        return self._norms


@dataclass
class TokenStore:
    """Variable-length token vectors per id, unit-normalized rows."""

    dim: int
    vectors: dict[str, np.ndarray]  # id -> (tokens, dim) float32
    normalized_on_load: bool = False

    def __post_init__(self):
        for rid, arr in self.vectors.items():
            if arr.ndim != 2 or arr.shape[1] != self.dim:
                raise FormatError(f"token record {rid!r} has wrong shape {arr.shape}")
            if arr.shape[0] < 1:
                raise FormatError(f"token record {rid!r} has no token vectors")

    def get(self, rid: str) -> np.ndarray:
        try:
            return self.vectors[rid]
        except KeyError:
            raise DataError(f"id {rid!r} not present in token store") from None

    def __contains__(self, rid: str) -> bool:
        return rid in self.vectors


@dataclass
class SparseStore:
    """Learned-sparse weights per id over a fixed vocabulary."""

    vocab_size: int
    entries: dict[str, dict[int, float]]  # id -> {vocab index: weight}

    def __post_init__(self):
        for rid, weights in self.entries.items():
            for idx, w in weights.items():
                if not (0 <= idx < self.vocab_size):
                    raise FormatError(
                        f"sparse record {rid!r}: index {idx} outside vocabulary "
                        f"of size {self.vocab_size}"
                    )
                if not math.isfinite(w) or w < 0:
                    raise FormatError(f"sparse record {rid!r}: weight at {idx} is {w!r}")

    def get(self, rid: str) -> dict[int, float]:
        try:
            return self.entries[rid]
        except KeyError:
            raise DataError(f"id {rid!r} not present in sparse store") from None

    def __contains__(self, rid: str) -> bool:
        return rid in self.entries


def normalize_rows(store: TokenStore, tolerance: float = 1e-3) -> TokenStore:
    """Unit-normalize token vectors in place; zero rows are an error.

    Records whether any row actually needed rescaling so imports can report
    it.
    """
    touched = False
    for rid, arr in store.vectors.items():
        norms = np.sqrt(np.einsum("ij,ij->i", arr.astype(np.float64), arr.astype(np.float64)))
        if np.any(norms == 0.0):
            raise FormatError(f"token record {rid!r} contains a zero vector")
        if np.any(np.abs(norms - 1.0) > tolerance):
            store.vectors[rid] = (arr.astype(np.float64) / norms[:, None]).astype(np.float32)
            touched = True
    store.normalized_on_load = touched
    return store


def dense_score(store: DenseStore, query_id: str, passage_id: str) -> float:
    """Cosine similarity between the two stored vectors."""
    q = store.matrix64()[store.row(query_id)]
    d = store.matrix64()[store.row(passage_id)]
    nq = math.sqrt(float(np.dot(q, q)))
    nd = math.sqrt(float(np.dot(d, d)))
    if nq == 0.0 or nd == 0.0:
        raise DataError(
            f"zero-norm vector for {'query' if nq == 0.0 else 'passage'} "
            f"{query_id if nq == 0.0 else passage_id!r}"
        )
    return float(np.dot(q, d)) / (nq * nd)


def sparse_score(store: SparseStore, query_id: str, passage_id: str) -> float:
    """Inner product over the shared vocabulary indices."""
    q = store.get(query_id)
    d = store.get(passage_id)
    if len(d) < len(q):
        q, d = d, q
    return math.fsum(w * d[idx] for idx, w in q.items() if idx in d)


def maxsim_score(store: TokenStore, query_id: str, passage_id: str) -> float:
    """Late-interaction score: per query token, the best passage-token
    similarity; summed over query tokens.

    Rows are unit vectors, so the dot product is the cosine. The final sum
    uses exact (fsum) accumulation, making the score invariant under
    permutation of query tokens as well as passage tokens.
    """
    q = store.get(query_id).astype(np.float64)
    d = store.get(passage_id).astype(np.float64)
    sims = q @ d.T
    return math.fsum(np.max(sims, axis=1).tolist())


def _hash_features(seed: int, salt: str, key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}:{salt}:{key}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dim)
    return v / np.sqrt(np.dot(v, v))


def mock_embed(
    corpus: Corpus, dim: int, language_weight: float, seed: int = 0
) -> DenseStore:
    """Deterministic test embedder.

    Each vector is the unit-normalized concatenation of a content-group
    feature block and a language feature block scaled by language_weight:
    weight 0 makes all translations of a group score identically, a large
    weight makes the same-language member strictly dominate. Queries and
    passages share the construction, so the store holds both.
    """
    if dim < 2:
        raise DataError("mock embedder needs dim >= 2")
    half = dim // 2
    group_feats = {
        gid: _hash_features(seed, "group", gid, half) for gid in sorted(corpus.groups)
    }
    lang_feats = {
        lang: _hash_features(seed, "lang", lang, dim - half) for lang in corpus.languages
    }
    for q in corpus.queries.values():
        lang_feats.setdefault(q.lang, _hash_features(seed, "lang", q.lang, dim - half))

    overlap = set(corpus.passages) & set(corpus.queries)
    if overlap:
        raise DataError(
            f"mock embedder cannot store colliding passage/query ids: {sorted(overlap)[:3]}"
        )

    def make_vector(group_id: str, lang: str) -> np.ndarray:
        v = np.concatenate([group_feats[group_id], language_weight * lang_feats[lang]])
        norm = np.sqrt(np.dot(v, v))
        return (v / norm).astype(np.float32)

    ids: list[str] = []
    rows: list[np.ndarray] = []
    for pid in sorted(corpus.passages):
        p = corpus.passages[pid]
        ids.append(pid)
        rows.append(make_vector(p.group_id, p.lang))
    for qid in sorted(corpus.queries):
        q = corpus.queries[qid]
        if q.group_id not in group_feats:
            group_feats[q.group_id] = _hash_features(seed, "group", q.group_id, half)
        ids.append(qid)
        rows.append(make_vector(q.group_id, q.lang))

    return DenseStore(ids=tuple(ids), matrix=np.vstack(rows))
