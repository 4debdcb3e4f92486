"""Command-line surface.

Exit codes: 0 success, 1 data/validation failure, 2 usage error. Failures
print one machine-parsable line to stderr: "<CODE>: <detail>". Relative
store/index/tokenizer paths inside run configs resolve against the
MLIREVAL_DATA_ROOT environment variable when it is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .core import validate_corpus
from .errors import DataError, EngineError
from .ingest import (
    load_corpus,
    load_language_classification,
    load_manifest,
    manifest_violations,
)
from .metrics import report_from_outcomes, transition_matrix
from .report import build_bundle, emit_csv, emit_json, emit_trec_run, safe_name
from .retrieval import build_index, load_tokenizer, mock_embed, save_index
from .retrieval import read_dense, read_sparse, read_token, write_dense
from .runner import RunConfig, load_run, persist_run, run, verify_run_corpus

ENV_DATA_ROOT = "MLIREVAL_DATA_ROOT"


def _data_root() -> Path | None:
    root = os.environ.get(ENV_DATA_ROOT)
    return Path(root) if root else None


def _load_corpus(manifest_path: str):
    manifest = load_manifest(manifest_path)
    corpus = load_corpus(manifest)
    return manifest, corpus


def _load_valid_corpus(manifest_path: str):
    """Load and insist on a violation-free corpus (non-ingest commands)."""
    manifest, corpus = _load_corpus(manifest_path)
    violations = validate_corpus(corpus)
    if violations:
        detail = "; ".join(str(v) for v in violations[:3])
        raise DataError(
            f"corpus {corpus.name!r} has {len(violations)} violation(s) "
            f"(run 'ingest' for the full list): {detail}"
        )
    return manifest, corpus


def cmd_ingest(args) -> int:
    manifest, corpus = _load_corpus(args.manifest)
    violations = validate_corpus(corpus) + manifest_violations(manifest, corpus)
    print(
        f"{len(corpus.languages)} languages, {len(corpus.groups)} groups, "
        f"{len(corpus.passages)} passages, {len(corpus.queries)} queries"
    )
    if violations:
        for v in violations:
            print(str(v), file=sys.stderr)
        print(f"E_VALIDATION: {len(violations)} violation(s)", file=sys.stderr)
        return 1
    return 0


def cmd_index(args) -> int:
    _, corpus = _load_valid_corpus(args.corpus)
    tokenizer = load_tokenizer(args.tokenizer)
    index = build_index(corpus, tokenizer)
    save_index(index, args.out)
    print(f"indexed {index.doc_count} passages, {len(index.postings)} terms -> {args.out}")
    return 0


def cmd_import_vectors(args) -> int:
    readers = {"dense": read_dense, "token": read_token, "sparse": read_sparse}
    store = readers[args.kind](args.file)
    if args.kind == "dense":
        print(f"dense store: {len(store.ids)} records, dim {store.dim}")
    elif args.kind == "token":
        note = " (rows normalized on load)" if store.normalized_on_load else ""
        print(f"token store: {len(store.vectors)} records, dim {store.dim}{note}")
    else:
        print(f"sparse store: {len(store.entries)} records, vocabulary {store.vocab_size}")
    return 0


def cmd_run(args) -> int:
    config = RunConfig.load(args.config)
    manifest, corpus = _load_valid_corpus(args.corpus)
    scored = run(config, corpus, data_root=_data_root(), workers=args.workers,
                 manifest_default_depth=manifest.default_depth)
    out = args.out or f"{safe_name(config.model)}_{safe_name(config.corpus)}_k{scored.k}.mlrn"
    persist_run(scored, out)
    print(f"run complete: {len(scored.rankings)} queries at depth {scored.k} -> {out}")
    return 0


def cmd_eval(args) -> int:
    scored = load_run(args.run)
    _, corpus = _load_valid_corpus(args.manifest)
    verify_run_corpus(scored, corpus)
    outcomes = scored.outcomes(corpus)
    report = report_from_outcomes(
        scored.config.model, scored.corpus_name, scored.k, outcomes, corpus
    )
    doc = report.to_dict()
    if args.classification:
        classification = load_language_classification(args.classification)
        matrix = transition_matrix(outcomes, corpus.queries, corpus, classification)
        doc["transition_matrix"] = {
            "labels": list(matrix.labels),
            "support": dict(matrix.support),
            "cells": {
                f"{qlab}->{dlab}": p for (qlab, dlab), p in sorted(matrix.cells.items())
            },
        }
    rendered = json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(rendered + "\n", encoding="utf-8")
    else:
        print(rendered)
    return 0


def cmd_report(args) -> int:
    import glob as globmod

    run_paths = sorted(p for pattern in args.runs for p in globmod.glob(pattern))
    if not run_paths:
        print("E_DATA: no run files matched", file=sys.stderr)
        return 1
    corpora = {}
    for manifest_path in args.manifest:
        manifest, corpus = _load_valid_corpus(manifest_path)
        corpora[corpus.name] = corpus
    classification = (
        load_language_classification(args.classification) if args.classification else None
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    transitions = {}
    for path in run_paths:
        scored = load_run(path)
        corpus = corpora.get(scored.corpus_name)
        if corpus is None:
            print(f"E_DATA: no manifest given for corpus {scored.corpus_name!r}", file=sys.stderr)
            return 1
        verify_run_corpus(scored, corpus)
        outcomes = scored.outcomes(corpus)
        reports.append(
            report_from_outcomes(
                scored.config.model, scored.corpus_name, scored.k, outcomes, corpus
            )
        )
        if classification is not None:
            transitions[(scored.config.model, scored.corpus_name)] = transition_matrix(
                outcomes, corpus.queries, corpus, classification
            )
        emit_trec_run(
            scored,
            out_dir / f"{safe_name(scored.config.model)}_{safe_name(scored.corpus_name)}_k{scored.k}.trec",
        )

    bundle = build_bundle(reports, transitions)
    emit_json(bundle, out_dir / "report.json")
    emit_csv(bundle, out_dir)
    print(f"report bundle written to {out_dir}")
    return 0


def cmd_mock_embed(args) -> int:
    _, corpus = _load_valid_corpus(args.corpus)
    store = mock_embed(corpus, args.dim, args.language_weight, args.seed)
    write_dense(store, args.out)
    print(f"mock store: {len(store.ids)} vectors, dim {store.dim} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlireval",
        description="Language-aware multilingual retrieval evaluation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate a corpus")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build a BM25 inverted index")
    p.add_argument("--corpus", required=True, help="corpus manifest path")
    p.add_argument("--tokenizer", default="fallback", help="tokenizer definition path or 'fallback'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("import-vectors", help="validate a vector store file")
    p.add_argument("--kind", required=True, choices=["dense", "token", "sparse"])
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_import_vectors)

    p = sub.add_parser("run", help="execute a scoring run")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--corpus", required=True, help="corpus manifest path")
    p.add_argument("--out", default=None, help="output MLRN path")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="compute metrics for a persisted run")
    p.add_argument("--run", required=True)
    p.add_argument("--manifest", required=True, help="corpus manifest path")
    p.add_argument("--classification", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="emit the full report bundle for runs")
    p.add_argument("--runs", required=True, nargs="+", help="run file globs")
    p.add_argument("--manifest", required=True, action="append",
                   help="corpus manifest (repeatable)")
    p.add_argument("--classification", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("mock-embed", help="write deterministic test embeddings")
    p.add_argument("--corpus", required=True, help="corpus manifest path")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--language-weight", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mock_embed)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
