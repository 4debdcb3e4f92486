"""Retriever contract: score any (query, passage) pair, rank the corpus.

All four paradigms sit behind the same two entry points so metric code
never branches on paradigm. Ranking order is non-increasing score with
exact ties broken by ascending passage id; score_all feeds both the top-k
list and the full-group lookups from one score vector per query.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from ..core import Corpus
from ..errors import DataError
from .index import InvertedIndex, bm25_score, bm25_score_all
from .stores import DenseStore, SparseStore, TokenStore, dense_score, maxsim_score, sparse_score
from .tokenizer import Tokenizer


class Retriever(ABC):
    """Scores queries against a fixed passage collection."""

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self.passage_ids: tuple[str, ...] = tuple(sorted(corpus.passages))
        self._row = {pid: i for i, pid in enumerate(self.passage_ids)}
        self._pid_array = np.array(self.passage_ids)

    def _query(self, query_id: str):
        try:
            return self.corpus.queries[query_id]
        except KeyError:
            raise DataError(f"unknown query id {query_id!r}") from None

    @abstractmethod
    def score(self, query_id: str, passage_id: str) -> float:
        """Score one pair; must be defined for every passage in the corpus."""

    def score_all(self, query_id: str) -> np.ndarray:
        """Float64 scores aligned with passage_ids."""
        return np.array(
            [self.score(query_id, pid) for pid in self.passage_ids], dtype=np.float64
        )

    def rank_all(self, query_id: str) -> tuple[np.ndarray, np.ndarray]:
        """(permutation, scores): descending score, ascending id on ties."""
        scores = self.score_all(query_id)
        # passage_ids is ascending, so a stable sort keeps id order within ties
        return np.argsort(-scores, kind="stable"), scores

    def top_k(self, query_id: str, k: int) -> list[tuple[str, float]]:
        if k < 1:
            raise DataError(f"k must be >= 1, got {k}")
        order, scores = self.rank_all(query_id)
        top = order[: min(k, len(self.passage_ids))]
        return [(self.passage_ids[i], float(scores[i])) for i in top]


class Bm25Retriever(Retriever):
    def __init__(self, corpus: Corpus, index: InvertedIndex, tokenizer: Tokenizer,
                 k1: float = 1.2, b: float = 0.75):
        super().__init__(corpus)
        missing = [pid for pid in self.passage_ids if pid not in index.doc_lengths]
        if missing:
            raise DataError(f"index does not cover passages: {missing[:5]}")
        self.index = index
        self.tokenizer = tokenizer
        self.k1 = k1
        self.b = b
        self._token_cache: dict[str, list[str]] = {}

    def _tokens(self, query_id: str) -> list[str]:
        if query_id not in self._token_cache:
            self._token_cache[query_id] = self.tokenizer.tokenize(self._query(query_id).text)
        return self._token_cache[query_id]

    def score(self, query_id: str, passage_id: str) -> float:
        return bm25_score(self.index, self._tokens(query_id), passage_id, self.k1, self.b)

    def score_all(self, query_id: str) -> np.ndarray:
        acc = bm25_score_all(self.index, self._tokens(query_id), self.k1, self.b)
        scores = np.zeros(len(self.passage_ids), dtype=np.float64)
        for pid, s in acc.items():
            scores[self._row[pid]] = s
        return scores


class DenseRetriever(Retriever):
    def __init__(self, corpus: Corpus, store: DenseStore):
        super().__init__(corpus)
        _check_coverage(store, corpus)
        self.store = store
        self._rows = np.array([store.row(pid) for pid in self.passage_ids])
        norms = store.norms()[self._rows]
        if np.any(norms == 0.0):
            bad = self.passage_ids[int(np.argmax(norms == 0.0))]
            raise DataError(f"zero-norm vector for passage {bad!r}")
        self._passage_norms = norms

    def score(self, query_id: str, passage_id: str) -> float:
        self._query(query_id)
        return dense_score(self.store, query_id, passage_id)

    def score_all(self, query_id: str) -> np.ndarray:
        self._query(query_id)
        q = self.store.matrix64()[self.store.row(query_id)]
        nq = math.sqrt(float(np.dot(q, q)))
        if nq == 0.0:
            raise DataError(f"zero-norm vector for query {query_id!r}")
        dots = self.store.matrix64()[self._rows] @ q
        return dots / (self._passage_norms * nq)


class SparseRetriever(Retriever):
    def __init__(self, corpus: Corpus, store: SparseStore):
        super().__init__(corpus)
        _check_coverage(store, corpus)
        self.store = store

    def score(self, query_id: str, passage_id: str) -> float:
        self._query(query_id)
        return sparse_score(self.store, query_id, passage_id)


class LateInteractionRetriever(Retriever):
    def __init__(self, corpus: Corpus, store: TokenStore):
        super().__init__(corpus)
        _check_coverage(store, corpus)
        self.store = store
        # transposed f64 copies avoid per-query conversions
        self._passage64 = {
            pid: store.get(pid).astype(np.float64).T for pid in self.passage_ids
        }

    def score(self, query_id: str, passage_id: str) -> float:
        self._query(query_id)
        return maxsim_score(self.store, query_id, passage_id)

    def score_all(self, query_id: str) -> np.ndarray:
        self._query(query_id)
        q = self.store.get(query_id).astype(np.float64)
        out = np.empty(len(self.passage_ids), dtype=np.float64)
        for i, pid in enumerate(self.passage_ids):
            sims = q @ self._passage64[pid]
            out[i] = math.fsum(np.max(sims, axis=1).tolist())
        return out


def _check_coverage(store, corpus: Corpus) -> None:
    missing = [pid for pid in sorted(corpus.passages) if pid not in store]
    missing += [qid for qid in sorted(corpus.queries) if qid not in store]
    if missing:
        shown = ", ".join(repr(m) for m in missing[:5])
        raise DataError(f"store is missing {len(missing)} corpus ids (first: {shown})")


def top_k(retriever: Retriever, query_id: str, k: int) -> list[tuple[str, float]]:
    """Module-level alias for the contract entry point."""
    return retriever.top_k(query_id, k)
