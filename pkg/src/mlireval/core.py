"""Domain model: passages, queries, content groups, and relevance grading.

A corpus groups semantically equivalent passages across languages into
content groups. Every passage in a query's target group is relevant; the
member written in the query's language is the query-language relevant
passage. Grading distinguishes the two cases (3 vs 2) and everything else
is irrelevant (0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import DataError

PARALLELISM_FULL = "full"
PARALLELISM_PARTIAL = "partial"

GRADE_SAME_LANG = 3
GRADE_CROSS_LANG = 2
GRADE_IRRELEVANT = 0


def normalize_lang(code: str) -> str:
    """Normalize a language tag: trim, lowercase, fold hyphens to underscores.

    Tags are compared as opaque strings after normalization; script or
    variant suffixes (``zh_simpl`` vs ``zh_trad``) stay distinct.
    Idempotent: normalize(normalize(x)) == normalize(x).
    """
    tag = code.strip().lower().replace("-", "_")
    if not tag:
        raise DataError("empty language tag")
    return tag


@dataclass(frozen=True)
class Passage:
    id: str
    lang: str
    group_id: str
    text: str


@dataclass(frozen=True)
class Query:
    id: str
    lang: str
    group_id: str
    text: str


@dataclass(frozen=True)
class ContentGroup:
    """Set of semantically equivalent passages, keyed by language."""

    group_id: str
    members: Mapping[str, str]  # lang -> passage id

    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Corpus:
    name: str
    passages: Mapping[str, Passage]
    queries: Mapping[str, Query]
    groups: Mapping[str, ContentGroup]
    max_group_size: int
    parallelism: str
    languages: tuple[str, ...] = field(default=())

    @staticmethod
    def build(name: str, passages: Iterable[Passage], queries: Iterable[Query]) -> "Corpus":
        """Assemble a corpus, deriving groups from passage group ids.

        Duplicate (group, lang) pairs keep the lowest passage id so the
        result is independent of input order; the duplicates themselves are
        surfaced later by validate_corpus, not here.
        """
        passage_map: dict[str, Passage] = {}
        for p in sorted(passages, key=lambda p: p.id):
            if p.id in passage_map:
                raise DataError(f"duplicate passage id {p.id!r}")
            passage_map[p.id] = p
        query_map: dict[str, Query] = {}
        for q in sorted(queries, key=lambda q: q.id):
            if q.id in query_map:
                raise DataError(f"duplicate query id {q.id!r}")
            query_map[q.id] = q

        members: dict[str, dict[str, str]] = {}
        for pid in sorted(passage_map):
            p = passage_map[pid]
            group = members.setdefault(p.group_id, {})
            group.setdefault(p.lang, pid)

        groups = {
            gid: ContentGroup(group_id=gid, members=dict(sorted(langs.items())))
            for gid, langs in sorted(members.items())
        }
        max_size = max((g.size() for g in groups.values()), default=0)
        languages = tuple(sorted({p.lang for p in passage_map.values()}))
        full = bool(groups) and all(g.size() == len(languages) for g in groups.values())
        return Corpus(
            name=name,
            passages=passage_map,
            queries=query_map,
            groups=groups,
            max_group_size=max_size,
            parallelism=PARALLELISM_FULL if full else PARALLELISM_PARTIAL,
            languages=languages,
        )


def grade(query: Query, passage: Passage) -> int:
    """Language-aware relevance grade.

    3 if the passage is in the query's target group and language, 2 if in
    the group but another language, 0 otherwise. Binary relevance is
    (grade > 0).
    """
    if passage.group_id != query.group_id:
        return GRADE_IRRELEVANT
    if passage.lang == query.lang:
        return GRADE_SAME_LANG
    return GRADE_CROSS_LANG


@dataclass(frozen=True)
class Violation:
    rule: str
    subject_id: str
    detail: str

    def __str__(self) -> str:
        return f"{self.rule} [{self.subject_id}]: {self.detail}"


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Check all corpus invariants; violations are data, not exceptions.

    Groups smaller than the language count are legal (partial parallelism),
    but a query whose target group lacks a passage in the query's language
    is a violation: every query must have its query-language relevant
    passage.
    """
    violations: list[Violation] = []

    seen: dict[tuple[str, str], str] = {}
    for pid in sorted(corpus.passages):
        p = corpus.passages[pid]
        key = (p.group_id, p.lang)
        if key in seen:
            violations.append(
                Violation(
                    rule="duplicate-language",
                    subject_id=pid,
                    detail=f"group {p.group_id!r} already has a {p.lang!r} passage ({seen[key]!r})",
                )
            )
        else:
            seen[key] = pid
        if p.group_id not in corpus.groups:
            violations.append(
                Violation(
                    rule="unknown-passage-group",
                    subject_id=pid,
                    detail=f"group {p.group_id!r} is not derivable from the corpus",
                )
            )

    for gid in sorted(corpus.groups):
        g = corpus.groups[gid]
        if g.size() == 0:
            violations.append(
                Violation(rule="empty-group", subject_id=gid, detail="group has no members")
            )
        for lang, pid in g.members.items():
            p = corpus.passages.get(pid)
            if p is None:
                violations.append(
                    Violation(
                        rule="dangling-member",
                        subject_id=gid,
                        detail=f"member {pid!r} is not a corpus passage",
                    )
                )
            elif p.group_id != gid or p.lang != lang:
                violations.append(
                    Violation(
                        rule="inconsistent-member",
                        subject_id=gid,
                        detail=f"member {pid!r} is keyed ({gid!r}, {lang!r}) "
                        f"but carries ({p.group_id!r}, {p.lang!r})",
                    )
                )

    for qid in sorted(corpus.queries):
        q = corpus.queries[qid]
        group = corpus.groups.get(q.group_id)
        if group is None:
            violations.append(
                Violation(
                    rule="unknown-query-group",
                    subject_id=qid,
                    detail=f"target group {q.group_id!r} does not exist",
                )
            )
            continue
        if q.lang not in group.members:
            violations.append(
                Violation(
                    rule="missing-query-language-passage",
                    subject_id=qid,
                    detail=f"group {q.group_id!r} has no {q.lang!r} passage",
                )
            )

    computed_max = max((g.size() for g in corpus.groups.values()), default=0)
    if corpus.max_group_size != computed_max:
        violations.append(
            Violation(
                rule="max-group-size-mismatch",
                subject_id=corpus.name,
                detail=f"recorded {corpus.max_group_size}, computed {computed_max}",
            )
        )

    return violations
