"""Language-aware retrieval metrics.

Rankings and within-group score lookups come in from scored runs; this
module derives per-query outcomes and aggregates them:

* language preference rate (LPR): how often the query-language member of
  the target group strictly outscores every other member,
* language-aware nDCG over the 3/2/0 grading, next to standard binary
  nDCG at the same discount,
* recall and language-restricted recall at depth k,
* a four-way classification of the rank-1 result,
* per-query-language LPR and macro-group transition matrices for LPR
  failures,
* Pearson/Spearman correlation across models.

Every metric depends only on score comparisons and grades, never on score
magnitudes, so monotone transforms of the scores leave all values intact.
All query means use a fixed pairwise summation tree over query-id order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import Corpus, Query, grade
from .errors import MetricError
from .ingest import LanguageClassification

TOP1_PERFECT = "perfect"
TOP1_LANG_FAIL = "lang_fail"
TOP1_SEM_FAIL = "sem_fail"
TOP1_BOTH_FAIL = "both_fail"
TOP1_CLASSES = (TOP1_PERFECT, TOP1_LANG_FAIL, TOP1_SEM_FAIL, TOP1_BOTH_FAIL)


def pairwise_sum(values: Sequence[float]) -> float:
    """Balanced pairwise summation; deterministic for a given order."""
    n = len(values)
    if n == 0:
        return 0.0
    if n == 1:
        return float(values[0])
    if n == 2:
        return float(values[0]) + float(values[1])
    mid = n // 2
    return pairwise_sum(values[:mid]) + pairwise_sum(values[mid:])


def pairwise_mean(values: Sequence[float]) -> float:
    if not values:
        raise MetricError("mean of zero values")
    return pairwise_sum(values) / len(values)


@dataclass(frozen=True)
class QueryOutcome:
    """Everything the aggregates need from one query."""

    query_id: str
    ranking: tuple[tuple[str, float], ...]  # (passage id, score), rank order
    group_scores: Mapping[str, float]  # every member of the target group
    top1_class: str
    lpr_hit: bool
    tie_flag: bool
    best_group_member: str  # group argmax, ascending id on exact ties


def group_argmax(group_scores: Mapping[str, float]) -> tuple[str, bool]:
    """(argmax passage id, tie flag). Ties resolve to the lowest id."""
    if not group_scores:
        raise MetricError("empty group score mapping")
    best = max(group_scores.values())
    winners = sorted(pid for pid, s in group_scores.items() if s == best)
    return winners[0], len(winners) > 1


def classify_top1(query: Query, top_passage_id: str, corpus: Corpus) -> str:
    p = corpus.passages[top_passage_id]
    group_match = p.group_id == query.group_id
    lang_match = p.lang == query.lang
    if group_match and lang_match:
        return TOP1_PERFECT
    if group_match:
        return TOP1_LANG_FAIL
    if lang_match:
        return TOP1_SEM_FAIL
    return TOP1_BOTH_FAIL


def compute_outcome(
    query: Query,
    ranking: Sequence[tuple[str, float]],
    group_scores: Mapping[str, float],
    corpus: Corpus,
) -> QueryOutcome:
    """Derive the per-query outcome from a ranking and full-group scores.

    The strict preference rule: the query-language member must be the
    unique score maximum of its group; an exact tie at the top sets
    tie_flag and counts as a miss.
    """
    if not ranking:
        raise MetricError(f"query {query.id!r}: empty ranking")
    group = corpus.groups.get(query.group_id)
    if group is None:
        raise MetricError(f"query {query.id!r}: unknown group {query.group_id!r}")
    missing = [pid for pid in group.members.values() if pid not in group_scores]
    if missing:
        raise MetricError(
            f"query {query.id!r}: group scores missing members {sorted(missing)[:5]}"
        )
    best_member, tie = group_argmax(
        {pid: group_scores[pid] for pid in group.members.values()}
    )
    lpr_hit = (not tie) and corpus.passages[best_member].lang == query.lang
    return QueryOutcome(
        query_id=query.id,
        ranking=tuple((pid, float(s)) for pid, s in ranking),
        group_scores={pid: float(group_scores[pid]) for pid in sorted(group_scores)},
        top1_class=classify_top1(query, ranking[0][0], corpus),
        lpr_hit=lpr_hit,
        tie_flag=tie,
        best_group_member=best_member,
    )


def _log2_discount(rank: int) -> float:
    return math.log2(rank + 1)


def dcg_lang(grades: Sequence[int], k: int) -> float:
    """Graded DCG with exponential gain: sum (2^g - 1) / log2(rank + 1)."""
    if k < 1:
        raise MetricError(f"k must be >= 1, got {k}")
    return math.fsum(
        (2.0 ** g - 1.0) / _log2_discount(i + 1) for i, g in enumerate(grades[:k])
    )


def lang_ndcg(grades: Sequence[int], group_size: int, k: int) -> float:
    """Language-aware nDCG: one grade-3 then grade-2s form the ideal list."""
    ideal = [3] + [2] * (group_size - 1)
    idcg = dcg_lang(ideal, k)
    if idcg == 0.0:
        raise MetricError("ideal DCG is zero; group has no gradable member")
    return dcg_lang(grades, k) / idcg


def base_ndcg(grades: Sequence[int], group_size: int, k: int) -> float:
    """Standard nDCG with binary relevance (any group member counts 1)."""
    if k < 1:
        raise MetricError(f"k must be >= 1, got {k}")
    dcg = math.fsum(
        1.0 / _log2_discount(i + 1) for i, g in enumerate(grades[:k]) if g > 0
    )
    idcg = math.fsum(1.0 / _log2_discount(i + 1) for i in range(min(k, group_size)))
    if idcg == 0.0:
        raise MetricError("ideal DCG is zero; group is empty")
    return dcg / idcg


def recall_at_k(ranking_ids: Sequence[str], group_ids: Iterable[str], k: int) -> float:
    if k < 1:
        raise MetricError(f"k must be >= 1, got {k}")
    members = set(group_ids)
    hit = sum(1 for pid in ranking_ids[:k] if pid in members)
    return hit / len(members)


def lang_recall_at_k(ranking_ids: Sequence[str], target_id: str, k: int) -> float:
    if k < 1:
        raise MetricError(f"k must be >= 1, got {k}")
    return 1.0 if target_id in ranking_ids[:k] else 0.0


def decompose_top1(outcomes: Sequence[QueryOutcome]) -> dict[str, float]:
    """Proportions of the four rank-1 classes; always sums to 1."""
    if not outcomes:
        raise MetricError("no outcomes to decompose")
    for o in outcomes:
        if not o.ranking:
            raise MetricError(f"query {o.query_id!r}: empty ranking")
    n = len(outcomes)
    counts = {cls: 0 for cls in TOP1_CLASSES}
    for o in outcomes:
        counts[o.top1_class] += 1
    return {cls: counts[cls] / n for cls in TOP1_CLASSES}


def lpr(outcomes: Sequence[QueryOutcome]) -> tuple[float, dict[str, bool]]:
    """(mean preference rate, per-query hit flags keyed by query id)."""
    if not outcomes:
        raise MetricError("no outcomes")
    flags = {o.query_id: o.lpr_hit for o in outcomes}
    ordered = [float(flags[qid]) for qid in sorted(flags)]
    return pairwise_mean(ordered), flags


def lpr_by_query_language(
    outcomes: Sequence[QueryOutcome], queries: Mapping[str, Query]
) -> dict[str, float]:
    """Mean hit rate per query language; absent languages are absent."""
    buckets: dict[str, list[float]] = {}
    for o in sorted(outcomes, key=lambda o: o.query_id):
        lang = queries[o.query_id].lang
        buckets.setdefault(lang, []).append(float(o.lpr_hit))
    return {lang: pairwise_mean(vals) for lang, vals in sorted(buckets.items())}


@dataclass(frozen=True)
class TransitionMatrix:
    """Where LPR failures land, macro group by macro group.

    cells[(query group label, document group label)] holds the proportion
    of that query group's failures whose group argmax carries a document
    in the document group; each query-group column sums to 1. Query groups
    with no failures have no cells (no zero-filled columns).
    """

    labels: tuple[str, ...]
    cells: Mapping[tuple[str, str], float]
    support: Mapping[str, int]

    def column(self, query_label: str) -> dict[str, float]:
        return {
            dlab: p for (qlab, dlab), p in self.cells.items() if qlab == query_label
        }


def transition_matrix(
    outcomes: Sequence[QueryOutcome],
    queries: Mapping[str, Query],
    corpus: Corpus,
    classification: LanguageClassification,
) -> TransitionMatrix:
    """Tabulate macro_group(query lang) -> macro_group(argmax doc lang)
    over LPR-failure queries, normalized per query group.

    The classification must cover every corpus language; the label list is
    the macro groups those languages map to.
    """
    observed_langs = set(corpus.languages) | {queries[o.query_id].lang for o in outcomes}
    missing = sorted(l for l in observed_langs if l not in classification.macro_group)
    if missing:
        raise MetricError(f"no macro group configured for languages: {missing[:5]}")
    labels = tuple(sorted({classification.macro_group[l] for l in observed_langs}))

    counts: dict[tuple[str, str], int] = {}
    support: dict[str, int] = {}
    for o in sorted(outcomes, key=lambda o: o.query_id):
        if o.lpr_hit:
            continue
        qlab = classification.macro_group[queries[o.query_id].lang]
        dlab = classification.macro_group[corpus.passages[o.best_group_member].lang]
        counts[(qlab, dlab)] = counts.get((qlab, dlab), 0) + 1
        support[qlab] = support.get(qlab, 0) + 1
    cells = {
        (qlab, dlab): c / support[qlab] for (qlab, dlab), c in sorted(counts.items())
    }
    return TransitionMatrix(
        labels=labels,
        cells=cells,
        support=dict(sorted(support.items())),
    )


@dataclass(frozen=True)
class MetricReport:
    """Aggregated metrics for one (model, dataset) run."""

    model: str
    dataset: str
    k: int | None
    n_queries: int
    ndcg: float
    lang_ndcg: float
    lpr: float
    recall: float
    lang_recall: float
    decomposition: Mapping[str, float]
    lpr_by_language: Mapping[str, float]
    tie_rate: float

    def __post_init__(self):
        total = math.fsum(self.decomposition.values())
        if abs(total - 1.0) > 1e-9:
            raise MetricError(f"decomposition sums to {total}, not 1")
        for name in ("ndcg", "lang_ndcg", "lpr", "recall", "lang_recall", "tie_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise MetricError(f"{name} out of [0, 1]: {v}")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dataset": self.dataset,
            "k": self.k,
            "n_queries": self.n_queries,
            "ndcg": self.ndcg,
            "lang_ndcg": self.lang_ndcg,
            "lpr": self.lpr,
            "recall": self.recall,
            "lang_recall": self.lang_recall,
            "decomposition": dict(self.decomposition),
            "lpr_by_language": dict(self.lpr_by_language),
            "tie_rate": self.tie_rate,
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "MetricReport":
        return MetricReport(
            model=doc["model"],
            dataset=doc["dataset"],
            k=doc.get("k"),
            n_queries=int(doc["n_queries"]),
            ndcg=float(doc["ndcg"]),
            lang_ndcg=float(doc["lang_ndcg"]),
            lpr=float(doc["lpr"]),
            recall=float(doc["recall"]),
            lang_recall=float(doc["lang_recall"]),
            decomposition={k: float(v) for k, v in doc["decomposition"].items()},
            lpr_by_language={k: float(v) for k, v in doc["lpr_by_language"].items()},
            tie_rate=float(doc["tie_rate"]),
        )


def report_from_outcomes(
    model: str,
    dataset: str,
    k: int,
    outcomes: Sequence[QueryOutcome],
    corpus: Corpus,
) -> MetricReport:
    """Aggregate per-query outcomes into a report (query-id order means)."""
    if not outcomes:
        raise MetricError("no outcomes to aggregate")
    ordered = sorted(outcomes, key=lambda o: o.query_id)

    ndcgs: list[float] = []
    lang_ndcgs: list[float] = []
    recalls: list[float] = []
    lang_recalls: list[float] = []
    ties: list[float] = []
    hits: list[float] = []
    for o in ordered:
        q = corpus.queries[o.query_id]
        group = corpus.groups[q.group_id]
        ranking_ids = [pid for pid, _ in o.ranking]
        grades = [grade(q, corpus.passages[pid]) for pid in ranking_ids[:k]]
        ndcgs.append(base_ndcg(grades, group.size(), k))
        lang_ndcgs.append(lang_ndcg(grades, group.size(), k))
        recalls.append(recall_at_k(ranking_ids, group.members.values(), k))
        lang_recalls.append(lang_recall_at_k(ranking_ids, group.members[q.lang], k))
        ties.append(float(o.tie_flag))
        hits.append(float(o.lpr_hit))

    return MetricReport(
        model=model,
        dataset=dataset,
        k=k,
        n_queries=len(ordered),
        ndcg=pairwise_mean(ndcgs),
        lang_ndcg=pairwise_mean(lang_ndcgs),
        lpr=pairwise_mean(hits),
        recall=pairwise_mean(recalls),
        lang_recall=pairwise_mean(lang_recalls),
        decomposition=decompose_top1(ordered),
        lpr_by_language=lpr_by_query_language(ordered, corpus.queries),
        tie_rate=pairwise_mean(ties),
    )


def correlate(values_a: Sequence[float], values_b: Sequence[float]) -> tuple[float | None, float | None]:
    """(Pearson, Spearman) across models; None marks an undefined side.

    Spearman is Pearson over fractional ranks with ties sharing their
    average rank. Zero variance in either vector makes the coefficient
    undefined rather than a number.
    """
    if len(values_a) != len(values_b):
        raise MetricError("correlation inputs must align")
    if len(values_a) < 3:
        raise MetricError(f"need >= 3 paired values, got {len(values_a)}")
    pearson = _pearson(values_a, values_b)
    spearman = _pearson(_fractional_ranks(values_a), _fractional_ranks(values_b))
    return pearson, spearman


def _pearson(a: Sequence[float], b: Sequence[float]) -> float | None:
    n = len(a)
    mean_a = math.fsum(a) / n
    mean_b = math.fsum(b) / n
    da = [x - mean_a for x in a]
    db = [x - mean_b for x in b]
    var_a = math.fsum(x * x for x in da)
    var_b = math.fsum(x * x for x in db)
    if var_a == 0.0 or var_b == 0.0:
        return None
    cov = math.fsum(x * y for x, y in zip(da, db))
    return cov / math.sqrt(var_a * var_b)


def _fractional_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # ranks are 1-based
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def macro_average(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean across datasets (each dataset counts once)."""
    if not reports:
        raise MetricError("no reports to average")
    models = {r.model for r in reports}
    if len(models) != 1:
        raise MetricError(f"macro average mixes models: {sorted(models)}")

    def mean_of(attr: str) -> float:
        return pairwise_mean([getattr(r, attr) for r in reports])

    decomposition = {
        cls: pairwise_mean([r.decomposition[cls] for r in reports]) for cls in TOP1_CLASSES
    }
    total = math.fsum(decomposition.values())
    if abs(total - 1.0) > 1e-9:
        raise MetricError(f"averaged decomposition sums to {total}")

    langs = sorted({lang for r in reports for lang in r.lpr_by_language})
    by_lang = {
        lang: pairwise_mean(
            [r.lpr_by_language[lang] for r in reports if lang in r.lpr_by_language]
        )
        for lang in langs
    }
    return MetricReport(
        model=reports[0].model,
        dataset="macro",
        k=None,
        n_queries=sum(r.n_queries for r in reports),
        ndcg=mean_of("ndcg"),
        lang_ndcg=mean_of("lang_ndcg"),
        lpr=mean_of("lpr"),
        recall=mean_of("recall"),
        lang_recall=mean_of("lang_recall"),
        decomposition=decomposition,
        lpr_by_language=by_lang,
        tie_rate=mean_of("tie_rate"),
    )
