"""Protocol runner: execute one (model, corpus) evaluation pass.

For every query the runner computes one score vector over the whole
passage collection, takes the top-k prefix, and keeps the scores of every
member of the query's target group so within-group preference can be
judged even when members fall outside the top k. Runs persist to a single
"MLRN" file:

    magic "MLRN" | u32 version | u64 header_len | header JSON |
    passage id table | query id table |
    per query (ascending id): u32 n_rank | u32 n_group |
        n_rank  x (u32 passage row | f64 score)
        n_group x (u32 passage row | f64 score)
    | sha256 over all preceding bytes (32 bytes)

Id tables are u32 count then per id u16 length + UTF-8 bytes. The trailer
hash makes truncation or corruption a load-time error, never a partial
run.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

from . import __version__ as ENGINE_VERSION
from .core import Corpus
from .errors import DataError, DepthError, DigestError, FormatError
from .ingest import corpus_digest
from .metrics import QueryOutcome, compute_outcome
from .retrieval import (
    Bm25Retriever,
    DenseRetriever,
    LateInteractionRetriever,
    Retriever,
    SparseRetriever,
    load_index,
    load_tokenizer,
    merge_dense,
    merge_sparse,
    merge_token,
    mock_embed,
    read_dense,
    read_sparse,
    read_token,
)

log = logging.getLogger("mlireval.runner")

PARADIGMS = ("bm25", "dense", "sparse", "late_interaction", "mock")

RUN_MAGIC = b"MLRN"
RUN_VERSION = 1

# depth rule: small parallel corpora get 20, wide ones 200
DEPTH_SMALL = 20
DEPTH_LARGE = 200
DEPTH_GROUP_CUTOFF = 12


@dataclass(frozen=True)
class MockParams:
    dim: int = 16
    language_weight: float = 4.0
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    model: str
    corpus: str
    paradigm: str
    depth: int | None = None
    store_paths: tuple[str, ...] = ()
    index_path: str | None = None
    tokenizer: str | None = None
    k1: float = 1.2
    b: float = 0.75
    mock: MockParams | None = None
    force_depth: bool = False

    def __post_init__(self):
        if self.paradigm not in PARADIGMS:
            raise DataError(f"unknown paradigm {self.paradigm!r}; expected one of {PARADIGMS}")

    def to_dict(self) -> dict:
        doc = {
            "model": self.model,
            "corpus": self.corpus,
            "paradigm": self.paradigm,
            "depth": self.depth,
            "store_paths": list(self.store_paths),
            "index_path": self.index_path,
            "tokenizer": self.tokenizer,
            "k1": self.k1,
            "b": self.b,
            "force_depth": self.force_depth,
        }
        if self.mock is not None:
            doc["mock"] = {
                "dim": self.mock.dim,
                "language_weight": self.mock.language_weight,
                "seed": self.mock.seed,
            }
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "RunConfig":
        mock = None
        if doc.get("mock") is not None:
            m = doc["mock"]
            mock = MockParams(
                dim=int(m.get("dim", 16)),
                language_weight=float(m.get("language_weight", 4.0)),
                seed=int(m.get("seed", 0)),
            )
        return RunConfig(
            model=str(doc["model"]),
            corpus=str(doc["corpus"]),
            paradigm=str(doc["paradigm"]),
            depth=int(doc["depth"]) if doc.get("depth") is not None else None,
            store_paths=tuple(doc.get("store_paths") or ()),
            index_path=doc.get("index_path"),
            tokenizer=doc.get("tokenizer"),
            k1=float(doc.get("k1", 1.2)),
            b=float(doc.get("b", 0.75)),
            mock=mock,
            force_depth=bool(doc.get("force_depth", False)),
        )

    @staticmethod
    def load(path: str | Path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: cannot load run config: {exc}") from exc
        return RunConfig.from_dict(doc)


@dataclass
class ScoredRun:
    config: RunConfig
    corpus_name: str
    k: int
    engine_version: str
    digests: dict[str, str]
    rankings: dict[str, tuple[tuple[str, float], ...]]  # qid -> ((pid, score), ...)
    group_scores: dict[str, dict[str, float]]  # qid -> {pid: score}

    def query_ids(self) -> list[str]:
        return sorted(self.rankings)

    def outcomes(self, corpus: Corpus) -> list[QueryOutcome]:
        return [
            compute_outcome(
                corpus.queries[qid], self.rankings[qid], self.group_scores[qid], corpus
            )
            for qid in self.query_ids()
        ]


def resolve_depth(config: RunConfig, corpus: Corpus, manifest_default: int | None = None) -> int:
    """Apply the depth rule and enforce depth >= max group size.

    Precedence: explicit config depth, then the corpus manifest's
    default_depth, then the size rule (20 for narrow groups, 200 for wide).
    """
    if config.depth is not None:
        k = config.depth
    elif manifest_default is not None:
        k = manifest_default
    elif corpus.max_group_size <= DEPTH_GROUP_CUTOFF:
        k = DEPTH_SMALL
    else:
        k = DEPTH_LARGE
    if k < corpus.max_group_size:
        if not config.force_depth:
            raise DepthError(
                f"depth {k} is below the corpus max group size {corpus.max_group_size}; "
                "raise depth or set force_depth"
            )
        log.warning("depth %d below max group size %d (forced)", k, corpus.max_group_size)
    elif k == corpus.max_group_size:
        log.warning("depth %d equals max group size; borderline coverage", k)
    return k


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve(path: str, data_root: Path | None) -> Path:
    p = Path(path)
    if not p.is_absolute() and data_root is not None:
        return data_root / p
    return p


def build_retriever(
    config: RunConfig, corpus: Corpus, data_root: Path | None = None
) -> tuple[Retriever, dict[str, str]]:
    """Instantiate the configured retriever and digest its inputs."""
    digests: dict[str, str] = {"corpus": corpus_digest(corpus)}
    if config.paradigm == "mock":
        params = config.mock or MockParams()
        digests["mock"] = hashlib.sha256(
            f"{params.dim}:{params.language_weight}:{params.seed}".encode()
        ).hexdigest()
        return DenseRetriever(corpus, mock_embed(
            corpus, params.dim, params.language_weight, params.seed
        )), digests

    if config.paradigm == "bm25":
        if not config.index_path:
            raise DataError("bm25 run needs index_path")
        index_path = _resolve(config.index_path, data_root)
        index = load_index(index_path)
        if config.tokenizer in (None, "fallback"):
            tokenizer = load_tokenizer("fallback")
        else:
            tokenizer = load_tokenizer(_resolve(config.tokenizer, data_root))
        digests[f"index:{config.index_path}"] = _file_digest(index_path)
        if tokenizer.source != "fallback":
            digests[f"tokenizer:{config.tokenizer}"] = _file_digest(Path(tokenizer.source))
        return Bm25Retriever(corpus, index, tokenizer, k1=config.k1, b=config.b), digests

    if not config.store_paths:
        raise DataError(f"{config.paradigm} run needs store_paths")
    paths = [_resolve(p, data_root) for p in config.store_paths]
    for raw, p in zip(config.store_paths, paths):
        digests[f"store:{raw}"] = _file_digest(p)

    if config.paradigm == "dense":
        return DenseRetriever(corpus, merge_dense([read_dense(p) for p in paths])), digests
    if config.paradigm == "sparse":
        return SparseRetriever(corpus, merge_sparse([read_sparse(p) for p in paths])), digests
    return LateInteractionRetriever(
        corpus, merge_token([read_token(p) for p in paths])
    ), digests


def run(
    config: RunConfig,
    corpus: Corpus,
    data_root: Path | None = None,
    workers: int = 1,
    manifest_default_depth: int | None = None,
) -> ScoredRun:
    """Score every query: top-k ranking plus full-group score lookups.

    One score vector per query feeds both outputs, so a group member
    appearing in the top-k carries the identical score in both places.
    """
    if config.corpus != corpus.name:
        raise DataError(f"config is for corpus {config.corpus!r}, got {corpus.name!r}")
    k = resolve_depth(config, corpus, manifest_default_depth)
    retriever, digests = build_retriever(config, corpus, data_root)

    passage_ids = retriever.passage_ids
    row = {pid: i for i, pid in enumerate(passage_ids)}
    query_ids = sorted(corpus.queries)

    def score_query(qid: str):
        order, scores = retriever.rank_all(qid)
        top = order[: min(k, len(passage_ids))]
        ranking = tuple((passage_ids[i], float(scores[i])) for i in top)
        members = corpus.groups[corpus.queries[qid].group_id].members.values()
        group = {pid: float(scores[row[pid]]) for pid in sorted(members)}
        return qid, ranking, group

    rankings: dict[str, tuple[tuple[str, float], ...]] = {}
    group_scores: dict[str, dict[str, float]] = {}
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for qid, ranking, group in pool.map(score_query, query_ids, chunksize=16):
                rankings[qid] = ranking
                group_scores[qid] = group
    else:
        for qid in query_ids:
            qid, ranking, group = score_query(qid)
            rankings[qid] = ranking
            group_scores[qid] = group

    return ScoredRun(
        config=config,
        corpus_name=corpus.name,
        k=k,
        engine_version=ENGINE_VERSION,
        digests=digests,
        rankings=rankings,
        group_scores=group_scores,
    )


def _pack_id(rid: str) -> bytes:
    raw = rid.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def persist_run(run_: ScoredRun, path: str | Path) -> None:
    """Write the MLRN file; byte-identical for identical runs."""
    header = {
        "format_version": RUN_VERSION,
        "engine_version": run_.engine_version,
        "config": run_.config.to_dict(),
        "corpus": run_.corpus_name,
        "k": run_.k,
        "digests": dict(sorted(run_.digests.items())),
        "n_queries": len(run_.rankings),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    passage_ids = sorted({pid for r in run_.rankings.values() for pid, _ in r}
                         | {pid for g in run_.group_scores.values() for pid in g})
    prow = {pid: i for i, pid in enumerate(passage_ids)}
    query_ids = run_.query_ids()

    h = hashlib.sha256()

    def emit(fh, chunk: bytes):
        fh.write(chunk)
        h.update(chunk)

    with open(path, "wb") as fh:
        emit(fh, RUN_MAGIC)
        emit(fh, struct.pack("<IQ", RUN_VERSION, len(header_bytes)))
        emit(fh, header_bytes)
        emit(fh, struct.pack("<I", len(passage_ids)))
        for pid in passage_ids:
            emit(fh, _pack_id(pid))
        emit(fh, struct.pack("<I", len(query_ids)))
        for qid in query_ids:
            emit(fh, _pack_id(qid))
        for qid in query_ids:
            ranking = run_.rankings[qid]
            group = run_.group_scores[qid]
            emit(fh, struct.pack("<II", len(ranking), len(group)))
            for pid, score in ranking:
                emit(fh, struct.pack("<Id", prow[pid], score))
            for pid in sorted(group):
                emit(fh, struct.pack("<Id", prow[pid], group[pid]))
        fh.write(h.digest())


def load_run(path: str | Path) -> ScoredRun:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 4 + 12 + 32 or data[:4] != RUN_MAGIC:
        raise FormatError(f"{path}: not an MLRN run file")
    body, trailer = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != trailer:
        raise DigestError(f"{path}: integrity digest mismatch (truncated or modified)")

    pos = 4
    version, header_len = struct.unpack_from("<IQ", body, pos)
    pos += 12
    if version != RUN_VERSION:
        raise FormatError(f"{path}: unsupported run version {version}")
    try:
        header = json.loads(body[pos : pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad run header: {exc}") from exc
    pos += header_len

    def read_id_table():
        nonlocal pos
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        ids = []
        for _ in range(count):
            (length,) = struct.unpack_from("<H", body, pos)
            pos += 2
            ids.append(body[pos : pos + length].decode("utf-8"))
            pos += length
        return ids

    try:
        passage_ids = read_id_table()
        query_ids = read_id_table()
        rankings: dict[str, tuple[tuple[str, float], ...]] = {}
        group_scores: dict[str, dict[str, float]] = {}
        for qid in query_ids:
            n_rank, n_group = struct.unpack_from("<II", body, pos)
            pos += 8
            ranking = []
            for _ in range(n_rank):
                idx, score = struct.unpack_from("<Id", body, pos)
                pos += 12
                ranking.append((passage_ids[idx], score))
            group = {}
            for _ in range(n_group):
                idx, score = struct.unpack_from("<Id", body, pos)
                pos += 12
                group[passage_ids[idx]] = score
            rankings[qid] = tuple(ranking)
            group_scores[qid] = group
    except (struct.error, IndexError) as exc:
        raise FormatError(f"{path}: malformed run payload: {exc}") from exc
    if pos != len(body):
        raise FormatError(f"{path}: {len(body) - pos} unexpected trailing bytes")

    if len(query_ids) != header.get("n_queries"):
        raise FormatError(f"{path}: header count disagrees with payload")

    return ScoredRun(
        config=RunConfig.from_dict(header["config"]),
        corpus_name=header["corpus"],
        k=int(header["k"]),
        engine_version=header["engine_version"],
        digests=dict(header["digests"]),
        rankings=rankings,
        group_scores=group_scores,
    )


def verify_run_corpus(run_: ScoredRun, corpus: Corpus) -> None:
    """Fail if the presented corpus is not the one the run was scored on."""
    expected = run_.digests.get("corpus")
    actual = corpus_digest(corpus)
    if expected != actual:
        raise DigestError(
            f"corpus digest mismatch: run recorded {expected[:12]}..., "
            f"presented corpus is {actual[:12]}..."
        )
