"""Model recipes: instruction prefixes, pooling, normalization, batching.

A recipe JSON document mirrors a model's published usage table:

    {
      "model_id": "hash:dim=16,seed=3" or a sentence-transformers id,
      "paradigm": "dense" | "token" | "sparse",
      "query_prefix": "query: ",
      "passage_prefix": "--",
      "pooling": "mean",
      "normalize": true,
      "batch_size": 32,
      "max_tokens": 512
    }

"--" is the published tables' marker for "no prefix" and is read as the
empty string. Prefixes are applied by verbatim concatenation, never
trimmed or reformatted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PARADIGMS = ("dense", "token", "sparse")
POOLINGS = ("cls", "mean", "last_token")

NO_PREFIX_MARKER = "--"


class RecipeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelRecipe:
    model_id: str
    paradigm: str
    query_prefix: str = ""
    passage_prefix: str = ""
    pooling: str = "mean"
    normalize: bool = True
    batch_size: int = 32
    max_tokens: int = 512

    def __post_init__(self):
        if not self.model_id:
            raise RecipeError("model_id must be non-empty")
        if self.paradigm not in PARADIGMS:
            raise RecipeError(f"paradigm must be one of {PARADIGMS}, got {self.paradigm!r}")
        if self.pooling not in POOLINGS:
            raise RecipeError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.batch_size < 1:
            raise RecipeError("batch_size must be >= 1")
        if self.max_tokens < 1:
            raise RecipeError("max_tokens must be >= 1")

    def query_input(self, text: str) -> str:
        return self.query_prefix + text

    def passage_input(self, text: str) -> str:
        return self.passage_prefix + text


def _prefix(raw) -> str:
    if raw is None or raw == NO_PREFIX_MARKER:
        return ""
    return str(raw)


def load_recipe(path: str | Path) -> ModelRecipe:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise RecipeError(f"{path}: cannot read recipe: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RecipeError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise RecipeError(f"{path}: recipe must be a JSON object")
    try:
        return ModelRecipe(
            model_id=str(doc["model_id"]),
            paradigm=str(doc.get("paradigm", "dense")),
            query_prefix=_prefix(doc.get("query_prefix")),
            passage_prefix=_prefix(doc.get("passage_prefix")),
            pooling=str(doc.get("pooling", "mean")),
            normalize=bool(doc.get("normalize", True)),
            batch_size=int(doc.get("batch_size", 32)),
            max_tokens=int(doc.get("max_tokens", 512)),
        )
    except KeyError as exc:
        raise RecipeError(f"{path}: recipe missing field {exc.args[0]!r}") from exc
