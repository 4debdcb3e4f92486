"""Corpus and classification loading.

File formats (all UTF-8):

* passages / queries: JSON lines, one object per line with required string
  fields ``id``, ``lang``, ``group_id``, ``text``; unknown fields ignored.
* manifest: a JSON document ``{"name", "passages_path", "queries_path",
  "parallelism", "default_depth"}``; paths resolve relative to the
  manifest's directory; ``default_depth`` may be omitted.
* language classification: JSON lines ``{"lang", "tier", "macro_group"}``,
  one entry per language tag, ``tier`` in {low, mid, high}.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    PARALLELISM_FULL,
    PARALLELISM_PARTIAL,
    Corpus,
    Passage,
    Query,
    Violation,
    normalize_lang,
)
from .errors import DataError, ParseError

RESOURCE_TIERS = ("low", "mid", "high")


@dataclass(frozen=True)
class CorpusManifest:
    name: str
    passages_path: Path
    queries_path: Path
    parallelism: str
    default_depth: int | None = None


@dataclass(frozen=True)
class LanguageClassification:
    """Per-language resource tier and macro group labels."""

    resource_tier: dict[str, str] = field(default_factory=dict)
    macro_group: dict[str, str] = field(default_factory=dict)

    def missing_tags(self, langs) -> list[str]:
        """Language tags not covered by both mappings, sorted."""
        return sorted(
            lang for lang in set(langs)
            if lang not in self.resource_tier or lang not in self.macro_group
        )


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read manifest: {exc}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=path) from exc
    if not isinstance(doc, dict):
        raise ParseError("manifest root must be an object", path=path)

    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ParseError("manifest field 'name' must be a non-empty string", path=path)
    parallelism = doc.get("parallelism", PARALLELISM_PARTIAL)
    if parallelism not in (PARALLELISM_FULL, PARALLELISM_PARTIAL):
        raise ParseError(
            f"manifest field 'parallelism' must be 'full' or 'partial', got {parallelism!r}",
            path=path,
        )
    depth = doc.get("default_depth")
    if depth is not None and (not isinstance(depth, int) or isinstance(depth, bool) or depth < 1):
        raise ParseError("manifest field 'default_depth' must be a positive integer", path=path)

    base = path.parent
    try:
        passages_path = base / str(doc["passages_path"])
        queries_path = base / str(doc["queries_path"])
    except KeyError as exc:
        raise ParseError(f"manifest missing field {exc.args[0]!r}", path=path) from exc

    return CorpusManifest(
        name=name,
        passages_path=passages_path,
        queries_path=queries_path,
        parallelism=parallelism,
        default_depth=depth,
    )


def _iter_jsonl(path: Path):
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=path) from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", path=path, line=lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("line must be a JSON object", path=path, line=lineno)
            yield lineno, obj


def _required_str(obj: dict, name: str, path: Path, lineno: int) -> str:
    value = obj.get(name)
    if not isinstance(value, str):
        raise ParseError(f"field {name!r} missing or not a string", path=path, line=lineno)
    if name != "text" and not value.strip():
        raise ParseError(f"field {name!r} must be non-empty", path=path, line=lineno)
    return value


def _load_records(path: Path):
    for lineno, obj in _iter_jsonl(path):
        rid = _required_str(obj, "id", path, lineno)
        lang = normalize_lang(_required_str(obj, "lang", path, lineno))
        group_id = _required_str(obj, "group_id", path, lineno)
        text = _required_str(obj, "text", path, lineno)
        yield rid, lang, group_id, text


def load_corpus(manifest: CorpusManifest) -> Corpus:
    """Load passages and queries, grouping passages on group_id.

    Deterministic: the result does not depend on line order within either
    file. Referential problems are left to validate_corpus; only structural
    problems (bad JSON, missing fields, duplicate ids) raise here.
    """
    passages = [
        Passage(id=r, lang=lang, group_id=g, text=t)
        for r, lang, g, t in _load_records(manifest.passages_path)
    ]
    queries = [
        Query(id=r, lang=lang, group_id=g, text=t)
        for r, lang, g, t in _load_records(manifest.queries_path)
    ]
    try:
        return Corpus.build(manifest.name, passages, queries)
    except DataError as exc:
        raise ParseError(str(exc), path=manifest.passages_path) from exc


def manifest_violations(manifest: CorpusManifest, corpus: Corpus) -> list[Violation]:
    """Cross-check the manifest's declarations against the loaded corpus."""
    violations: list[Violation] = []
    if manifest.default_depth is not None and manifest.default_depth < corpus.max_group_size:
        violations.append(
            Violation(
                rule="depth-below-max-group-size",
                subject_id=manifest.name,
                detail=f"default_depth {manifest.default_depth} < "
                f"max group size {corpus.max_group_size}",
            )
        )
    if manifest.parallelism != corpus.parallelism:
        violations.append(
            Violation(
                rule="parallelism-mismatch",
                subject_id=manifest.name,
                detail=f"manifest declares {manifest.parallelism!r}, "
                f"data is {corpus.parallelism!r}",
            )
        )
    return violations


def _record_line(record) -> str:
    return json.dumps(
        {"id": record.id, "lang": record.lang, "group_id": record.group_id, "text": record.text},
        ensure_ascii=False,
        sort_keys=True,
    )


def export_corpus(corpus: Corpus, passages_path: str | Path, queries_path: str | Path) -> None:
    """Write the corpus back to canonical JSONL (sorted by id)."""
    with open(passages_path, "w", encoding="utf-8") as fh:
        for pid in sorted(corpus.passages):
            fh.write(_record_line(corpus.passages[pid]) + "\n")
    with open(queries_path, "w", encoding="utf-8") as fh:
        for qid in sorted(corpus.queries):
            fh.write(_record_line(corpus.queries[qid]) + "\n")


def corpus_digest(corpus: Corpus) -> str:
    """Content digest over the canonical serialization, order-invariant."""
    h = hashlib.sha256()
    h.update(corpus.name.encode("utf-8"))
    for pid in sorted(corpus.passages):
        h.update(_record_line(corpus.passages[pid]).encode("utf-8"))
        h.update(b"\n")
    h.update(b"--queries--\n")
    for qid in sorted(corpus.queries):
        h.update(_record_line(corpus.queries[qid]).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def load_language_classification(path: str | Path) -> LanguageClassification:
    """Load the per-language tier / macro-group table.

    An empty file is legal (analyses needing the mappings report missing
    tags); a tag appearing twice is an error.
    """
    path = Path(path)
    tiers: dict[str, str] = {}
    macros: dict[str, str] = {}
    for lineno, obj in _iter_jsonl(path):
        lang = normalize_lang(_required_str(obj, "lang", path, lineno))
        tier = _required_str(obj, "tier", path, lineno)
        macro = _required_str(obj, "macro_group", path, lineno)
        if tier not in RESOURCE_TIERS:
            raise ParseError(
                f"tier must be one of {RESOURCE_TIERS}, got {tier!r}", path=path, line=lineno
            )
        if lang in tiers:
            raise ParseError(f"duplicate entry for language {lang!r}", path=path, line=lineno)
        tiers[lang] = tier
        macros[lang] = macro
    return LanguageClassification(resource_tier=tiers, macro_group=macros)
