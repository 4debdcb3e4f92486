"""Report bundle: fixed-layout JSON/CSV artifacts and TREC run export.

Everything emitted here is recomputable from persisted runs; emission is
deterministic (stable key order, 5-decimal round-half-even formatting) so
re-emitting the same bundle is byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import MetricError
from .metrics import TOP1_CLASSES, MetricReport, TransitionMatrix, correlate, macro_average
from .runner import ScoredRun

DECIMALS = 5


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.{DECIMALS}f}"


def _round(x: float | None):
    return None if x is None else round(x, DECIMALS)


@dataclass
class ReportBundle:
    """All tables for a set of runs: per-(model, dataset) metrics, macro
    averages, the nDCG-vs-LPR correlation block, and transition matrices."""

    reports: dict[str, dict[str, MetricReport]]  # model -> dataset -> report
    macro: dict[str, MetricReport] = field(default_factory=dict)
    correlations: dict[str, dict] = field(default_factory=dict)  # dataset -> block
    transitions: dict[tuple[str, str], TransitionMatrix] = field(default_factory=dict)


def build_bundle(
    reports: list[MetricReport],
    transitions: Mapping[tuple[str, str], TransitionMatrix] | None = None,
) -> ReportBundle:
    by_model: dict[str, dict[str, MetricReport]] = {}
    for r in reports:
        slot = by_model.setdefault(r.model, {})
        if r.dataset in slot:
            raise MetricError(f"duplicate report for ({r.model}, {r.dataset})")
        slot[r.dataset] = r

    macro = {
        model: macro_average(list(per_ds.values())) for model, per_ds in sorted(by_model.items())
    }

    correlations: dict[str, dict] = {}
    datasets = sorted({r.dataset for r in reports})
    for ds in datasets:
        models = sorted(m for m, per_ds in by_model.items() if ds in per_ds)
        block: dict = {"n_models": len(models)}
        if len(models) >= 3:
            ndcgs = [by_model[m][ds].ndcg for m in models]
            lprs = [by_model[m][ds].lpr for m in models]
            pearson, spearman = correlate(ndcgs, lprs)
            block["pearson"] = pearson
            block["spearman"] = spearman
        else:
            block["pearson"] = None
            block["spearman"] = None
        correlations[ds] = block

    return ReportBundle(
        reports=by_model,
        macro=macro,
        correlations=correlations,
        transitions=dict(transitions or {}),
    )


def scatter_table(bundle: ReportBundle) -> list[tuple[str, float, float]]:
    """(model, macro nDCG, macro LPR) rows, sorted by model name."""
    return [
        (model, bundle.macro[model].ndcg, bundle.macro[model].lpr)
        for model in sorted(bundle.macro)
    ]


def _report_doc(r: MetricReport) -> dict:
    return {
        "model": r.model,
        "dataset": r.dataset,
        "k": r.k,
        "n_queries": r.n_queries,
        "ndcg": _round(r.ndcg),
        "lang_ndcg": _round(r.lang_ndcg),
        "lpr": _round(r.lpr),
        "recall": _round(r.recall),
        "lang_recall": _round(r.lang_recall),
        "decomposition": {cls: _round(r.decomposition[cls]) for cls in TOP1_CLASSES},
        "lpr_by_language": {lang: _round(v) for lang, v in sorted(r.lpr_by_language.items())},
        "tie_rate": _round(r.tie_rate),
    }


def _transition_doc(t: TransitionMatrix) -> dict:
    return {
        "labels": list(t.labels),
        "support": {lab: n for lab, n in sorted(t.support.items())},
        "cells": {
            qlab: {
                dlab: _round(p)
                for (q2, dlab), p in sorted(t.cells.items())
                if q2 == qlab
            }
            for qlab in sorted({q for q, _ in t.cells})
        },
    }


def emit_json(bundle: ReportBundle, path: str | Path) -> None:
    doc = {
        "reports": {
            model: {ds: _report_doc(r) for ds, r in sorted(per_ds.items())}
            for model, per_ds in sorted(bundle.reports.items())
        },
        "macro": {model: _report_doc(r) for model, r in sorted(bundle.macro.items())},
        "correlations": {
            ds: {
                "n_models": block["n_models"],
                "pearson": _round(block["pearson"]),
                "spearman": _round(block["spearman"]),
            }
            for ds, block in sorted(bundle.correlations.items())
        },
        "transitions": {
            f"{model}/{ds}": _transition_doc(t)
            for (model, ds), t in sorted(bundle.transitions.items())
        },
        "scatter": [
            {"model": m, "ndcg": _round(n), "lpr": _round(l)}
            for m, n, l in scatter_table(bundle)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_csv(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    """One CSV per table; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def table(name: str, header: list[str], rows: list[list]) -> None:
        path = out / name
        _write_csv(path, header, rows)
        written.append(path)

    flat = [
        r
        for model in sorted(bundle.reports)
        for _, r in sorted(bundle.reports[model].items())
    ]
    table(
        "main_results.csv",
        ["model", "dataset", "k", "n_queries", "ndcg", "lang_ndcg", "lpr",
         "recall", "lang_recall", "tie_rate"],
        [
            [r.model, r.dataset, r.k, r.n_queries, _fmt(r.ndcg), _fmt(r.lang_ndcg),
             _fmt(r.lpr), _fmt(r.recall), _fmt(r.lang_recall), _fmt(r.tie_rate)]
            for r in flat
        ],
    )
    table(
        "macro_results.csv",
        ["model", "ndcg", "lang_ndcg", "lpr", "recall", "lang_recall", "tie_rate"],
        [
            [m, _fmt(r.ndcg), _fmt(r.lang_ndcg), _fmt(r.lpr), _fmt(r.recall),
             _fmt(r.lang_recall), _fmt(r.tie_rate)]
            for m, r in sorted(bundle.macro.items())
        ],
    )
    table(
        "decomposition.csv",
        ["model", "dataset"] + list(TOP1_CLASSES),
        [
            [r.model, r.dataset] + [_fmt(r.decomposition[cls]) for cls in TOP1_CLASSES]
            for r in flat
        ],
    )
    table(
        "per_language_lpr.csv",
        ["model", "dataset", "lang", "lpr"],
        [
            [r.model, r.dataset, lang, _fmt(v)]
            for r in flat
            for lang, v in sorted(r.lpr_by_language.items())
        ],
    )
    table(
        "correlations.csv",
        ["dataset", "n_models", "pearson", "spearman"],
        [
            [ds, block["n_models"], _fmt(block["pearson"]), _fmt(block["spearman"])]
            for ds, block in sorted(bundle.correlations.items())
        ],
    )
    table(
        "transitions.csv",
        ["model", "dataset", "query_group", "doc_group", "proportion", "support"],
        [
            [model, ds, qlab, dlab, _fmt(p), t.support[qlab]]
            for (model, ds), t in sorted(bundle.transitions.items())
            for (qlab, dlab), p in sorted(t.cells.items())
        ],
    )
    table(
        "scatter.csv",
        ["model", "ndcg", "lpr"],
        [[m, _fmt(n), _fmt(l)] for m, n, l in scatter_table(bundle)],
    )
    return written


def safe_name(raw: str) -> str:
    """Filesystem- and TREC-safe token: whitespace and separators to '_'."""
    cleaned = "".join(c if (c.isalnum() or c in "-._") else "_" for c in raw)
    return cleaned.strip("_") or "unnamed"


def emit_trec_run(run: ScoredRun, path: str | Path, run_tag: str | None = None) -> None:
    """TREC format: query_id Q0 passage_id rank score run_tag."""
    tag = safe_name(run_tag or run.config.model)
    with open(path, "w", encoding="utf-8") as fh:
        for qid in run.query_ids():
            for rank, (pid, score) in enumerate(run.rankings[qid], start=1):
                fh.write(f"{qid} Q0 {pid} {rank} {score:.{DECIMALS}f} {tag}\n")
