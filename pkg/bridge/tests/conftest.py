"""Bridge test fixtures: corpus JSONL writers and a recording encoder."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from mlirbridge.encoders import Encoder


def write_corpus_jsonl(directory: Path, n_groups=5, langs=("en", "de", "th"),
                       queries_per_group=1) -> tuple[Path, Path]:
    """Engine-schema corpus files; passage and query ids never collide."""
    directory.mkdir(parents=True, exist_ok=True)
    passages = directory / "passages.jsonl"
    queries = directory / "queries.jsonl"
    with open(passages, "w", encoding="utf-8") as fh:
        for g in range(n_groups):
            for lang in langs:
                fh.write(json.dumps({
                    "id": f"p{g:03d}{lang}", "lang": lang, "group_id": f"g{g:03d}",
                    "text": f"passage {g} {lang}",
                }) + "\n")
    with open(queries, "w", encoding="utf-8") as fh:
        for g in range(n_groups):
            for lang in langs:
                for i in range(queries_per_group):
                    fh.write(json.dumps({
                        "id": f"q{g:03d}{lang}{i}", "lang": lang, "group_id": f"g{g:03d}",
                        "text": f"ask {g} {lang} {i}",
                    }) + "\n")
    return passages, queries


class RecordingEncoder(Encoder):
    """Captures exactly what export feeds the model."""

    def __init__(self, dim=4):
        self.dim = dim
        self.seen: list[str] = []

    def encode_dense(self, texts):
        self.seen.extend(texts)
        rng = np.random.default_rng(0)
        return rng.normal(size=(len(texts), self.dim)).astype(np.float32)


class ShapeShiftingEncoder(Encoder):
    """Returns a different dim on the second batch (error-path double)."""

    def __init__(self):
        self.calls = 0

    def encode_dense(self, texts):
        self.calls += 1
        dim = 4 if self.calls == 1 else 6
        return np.ones((len(texts), dim), dtype=np.float32)
