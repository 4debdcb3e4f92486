"""Shared fixtures: corpus builders, score-table retrievers, file writers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from mlireval.core import Corpus, Passage, Query
from mlireval.ingest import LanguageClassification
from mlireval.retrieval.search import Retriever
from mlireval.runner import RunConfig, ScoredRun

LANG_POOL = ("en", "de", "th", "sw", "zh_simpl", "ru")
MACRO_POOL = ("Germanic", "Slavic", "EastAsian", "African")
TIER_POOL = ("low", "mid", "high")


def make_parallel_corpus(name="toy", n_groups=4, langs=("en", "de", "th"),
                         queries_per_group=None) -> Corpus:
    """Fully parallel corpus; by default one query per (group, lang)."""
    passages = [
        Passage(f"p{g:03d}{lang}", lang, f"g{g:03d}", f"passage {g} {lang}")
        for g in range(n_groups)
        for lang in langs
    ]
    queries = []
    for g in range(n_groups):
        for lang in langs:
            n = queries_per_group or 1
            for i in range(n):
                queries.append(
                    Query(f"q{g:03d}{lang}{i}", lang, f"g{g:03d}", f"ask {g} {lang} {i}")
                )
    return Corpus.build(name, passages, queries)


def random_corpus(rng: np.random.Generator, max_groups=12, max_langs=4,
                  max_queries=25, name="rand") -> Corpus:
    """Random partially parallel corpus; every query has a same-language
    group member."""
    n_langs = int(rng.integers(1, max_langs + 1))
    langs = list(LANG_POOL[:n_langs])
    n_groups = int(rng.integers(1, max_groups + 1))
    passages = []
    group_langs: dict[str, list[str]] = {}
    for g in range(n_groups):
        gid = f"g{g:03d}"
        chosen = [l for l in langs if rng.random() < 0.7]
        if not chosen:
            chosen = [langs[int(rng.integers(0, n_langs))]]
        group_langs[gid] = chosen
        for lang in chosen:
            passages.append(Passage(f"p{g:03d}{lang}", lang, gid, f"body {g} {lang}"))
    queries = []
    n_queries = int(rng.integers(1, max_queries + 1))
    gids = sorted(group_langs)
    for i in range(n_queries):
        gid = gids[int(rng.integers(0, len(gids)))]
        lang = group_langs[gid][int(rng.integers(0, len(group_langs[gid])))]
        queries.append(Query(f"q{i:04d}", lang, gid, f"question {i}"))
    return Corpus.build(name, passages, queries)


def random_classification(rng: np.random.Generator, corpus: Corpus) -> LanguageClassification:
    tiers, macros = {}, {}
    for lang in corpus.languages:
        tiers[lang] = TIER_POOL[int(rng.integers(0, len(TIER_POOL)))]
        macros[lang] = MACRO_POOL[int(rng.integers(0, len(MACRO_POOL)))]
    return LanguageClassification(resource_tier=tiers, macro_group=macros)


def random_score_table(rng: np.random.Generator, corpus: Corpus,
                       quantize: bool = False) -> dict[str, dict[str, float]]:
    """qid -> pid -> score. Quantized tables force frequent exact ties."""
    table = {}
    pids = sorted(corpus.passages)
    for qid in sorted(corpus.queries):
        if quantize:
            values = rng.integers(0, 4, size=len(pids)) / 4.0
        else:
            values = rng.uniform(0.0, 1.0, size=len(pids))
        table[qid] = {pid: float(v) for pid, v in zip(pids, values)}
    return table


class TableRetriever(Retriever):
    """Retriever backed by a precomputed score table (test double)."""

    def __init__(self, corpus: Corpus, table: dict[str, dict[str, float]]):
        super().__init__(corpus)
        self.table = table

    def score(self, query_id: str, passage_id: str) -> float:
        return self.table[query_id][passage_id]


def run_from_table(corpus: Corpus, table: dict[str, dict[str, float]],
                   k: int, model="table", ) -> ScoredRun:
    """Build a ScoredRun through the engine's ranking path."""
    retriever = TableRetriever(corpus, table)
    rankings = {}
    group_scores = {}
    for qid in sorted(corpus.queries):
        rankings[qid] = tuple(retriever.top_k(qid, k))
        members = corpus.groups[corpus.queries[qid].group_id].members.values()
        group_scores[qid] = {pid: table[qid][pid] for pid in sorted(members)}
    config = RunConfig(model=model, corpus=corpus.name, paradigm="mock", depth=k,
                       force_depth=True)
    return ScoredRun(
        config=config,
        corpus_name=corpus.name,
        k=k,
        engine_version="test",
        digests={"corpus": "synthetic"},
        rankings=rankings,
        group_scores=group_scores,
    )


def write_corpus_files(corpus: Corpus, directory: Path, shuffle_rng=None) -> Path:
    """Write manifest + JSONL files; optionally shuffle line order."""
    directory.mkdir(parents=True, exist_ok=True)
    passages = [corpus.passages[pid] for pid in sorted(corpus.passages)]
    queries = [corpus.queries[qid] for qid in sorted(corpus.queries)]
    if shuffle_rng is not None:
        passages = [passages[i] for i in shuffle_rng.permutation(len(passages))]
        queries = [queries[i] for i in shuffle_rng.permutation(len(queries))]
    with open(directory / "passages.jsonl", "w", encoding="utf-8") as fh:
        for p in passages:
            fh.write(json.dumps(
                {"id": p.id, "lang": p.lang, "group_id": p.group_id, "text": p.text}
            ) + "\n")
    with open(directory / "queries.jsonl", "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps(
                {"id": q.id, "lang": q.lang, "group_id": q.group_id, "text": q.text}
            ) + "\n")
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({
        "name": corpus.name,
        "passages_path": "passages.jsonl",
        "queries_path": "queries.jsonl",
        "parallelism": corpus.parallelism,
        "default_depth": max(20, corpus.max_group_size),
    }), encoding="utf-8")
    return manifest


@pytest.fixture
def toy_corpus() -> Corpus:
    return make_parallel_corpus()
