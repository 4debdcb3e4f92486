"""Inverted index and BM25 scoring.

The scoring function is the Lucene practical form with the (k1+1)
numerator constant dropped (it rescales every document equally):

    idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
    tf_norm(t,d) = tf / (tf + k1 * (1 - b + b * dl/avgdl))
    score(q,d)  = sum over unique query tokens of idf(t) * tf_norm(t,d)

Unique query tokens are scored once each, in first-occurrence order;
query-side term frequency is ignored. Tokens absent from the index
contribute nothing.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path

from ..core import Corpus
from ..errors import DataError, FormatError
from .tokenizer import Tokenizer

K1_DEFAULT = 1.2
B_DEFAULT = 0.75

_INDEX_FORMAT = "mlireval-bm25-index/1"


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]]  # token -> [(passage id, tf)], id-sorted
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    doc_freq: dict[str, int]
    tokenizer_source: str = "fallback"

    def term_frequency(self, token: str, passage_id: str) -> int:
        plist = self.postings.get(token)
        if not plist:
            return 0
        i = bisect_left(plist, (passage_id,))
        if i < len(plist) and plist[i][0] == passage_id:
            return plist[i][1]
        return 0


def build_index(corpus: Corpus, tokenizer: Tokenizer) -> InvertedIndex:
    """Index every passage; postings sorted by passage id."""
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for pid in sorted(corpus.passages):
        tokens = tokenizer.tokenize(corpus.passages[pid].text)
        doc_lengths[pid] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for tok, tf in counts.items():
            postings.setdefault(tok, []).append((pid, tf))

    postings = {tok: plist for tok, plist in sorted(postings.items())}
    doc_count = len(doc_lengths)
    total = sum(doc_lengths.values())
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=total / doc_count if doc_count else 0.0,
        doc_count=doc_count,
        doc_freq={tok: len(plist) for tok, plist in postings.items()},
        tokenizer_source=tokenizer.source,
    )


def _idf(index: InvertedIndex, token: str) -> float:
    df = index.doc_freq.get(token, 0)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def _unique(tokens) -> list[str]:
    return list(dict.fromkeys(tokens))


def bm25_score(
    index: InvertedIndex,
    query_tokens,
    passage_id: str,
    k1: float = K1_DEFAULT,
    b: float = B_DEFAULT,
) -> float:
    """Score one (query, passage) pair.

    Accumulation order matches bm25_score_all exactly (first-occurrence
    token order, skipping zero-tf terms), so the two paths agree bitwise.
    """
    if passage_id not in index.doc_lengths:
        raise DataError(f"passage {passage_id!r} is not indexed")
    dl = index.doc_lengths[passage_id]
    norm = k1 * (1.0 - b + b * dl / index.avg_doc_length) if index.avg_doc_length else k1
    score = 0.0
    for token in _unique(query_tokens):
        tf = index.term_frequency(token, passage_id)
        if tf == 0:
            continue
        score += _idf(index, token) * (tf / (tf + norm))
    return score


def bm25_score_all(
    index: InvertedIndex,
    query_tokens,
    k1: float = K1_DEFAULT,
    b: float = B_DEFAULT,
) -> dict[str, float]:
    """Scores for every passage with at least one query term (others are 0)."""
    avgdl = index.avg_doc_length
    acc: dict[str, float] = {}
    for token in _unique(query_tokens):
        plist = index.postings.get(token)
        if not plist:
            continue
        idf = _idf(index, token)
        for pid, tf in plist:
            dl = index.doc_lengths[pid]
            norm = k1 * (1.0 - b + b * dl / avgdl) if avgdl else k1
            acc[pid] = acc.get(pid, 0.0) + idf * (tf / (tf + norm))
    return acc


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist as a deterministic JSON document (sorted keys throughout)."""
    doc = {
        "format": _INDEX_FORMAT,
        "tokenizer_source": index.tokenizer_source,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
        "doc_lengths": dict(sorted(index.doc_lengths.items())),
        "postings": {tok: [[pid, tf] for pid, tf in plist] for tok, plist in index.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def load_index(path: str | Path) -> InvertedIndex:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: cannot load index: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _INDEX_FORMAT:
        raise FormatError(f"{path}: not a {_INDEX_FORMAT} file")
    postings = {
        str(tok): [(str(pid), int(tf)) for pid, tf in plist]
        for tok, plist in doc["postings"].items()
    }
    doc_lengths = {str(pid): int(n) for pid, n in doc["doc_lengths"].items()}
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=float(doc["avg_doc_length"]),
        doc_count=int(doc["doc_count"]),
        doc_freq={tok: len(plist) for tok, plist in postings.items()},
        tokenizer_source=str(doc.get("tokenizer_source", "fallback")),
    )
