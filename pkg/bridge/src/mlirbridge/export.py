"""Corpus-to-vector export.

Reads the engine's corpus JSONL files, applies the recipe's instruction
prefixes by verbatim concatenation, batch-encodes, and writes one vector
file plus a sidecar manifest (counts, dim, truncation records).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import Encoder, load_encoder
from .formats import write_dense, write_sparse, write_token
from .recipe import ModelRecipe


class ExportError(ValueError):
    pass


def read_corpus_texts(path: str | Path) -> dict[str, str]:
    """id -> text from a corpus JSONL file; unknown fields ignored."""
    out: dict[str, str] = {}
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            rid = obj.get("id")
            text = obj.get("text")
            if not isinstance(rid, str) or not rid or not isinstance(text, str):
                raise ExportError(f"{path}:{lineno}: needs string 'id' and 'text'")
            if rid in out:
                raise ExportError(f"{path}:{lineno}: duplicate id {rid!r}")
            out[rid] = text
    return out


@dataclass(frozen=True)
class ExportResult:
    vector_path: Path
    manifest_path: Path
    count: int
    dim: int | None


def _batched(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _unit_normalize(matrix: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", matrix.astype(np.float64),
                              matrix.astype(np.float64)))
    if np.any(norms == 0.0):
        raise ExportError("cannot normalize a zero vector")
    return (matrix.astype(np.float64) / norms[:, None]).astype(np.float32)


def export(
    recipe: ModelRecipe,
    passages_path: str | Path,
    queries_path: str | Path,
    out_stem: str | Path,
    encoder: Encoder | None = None,
) -> ExportResult:
    """Encode every passage and query; ids preserved verbatim.

    The encoder argument is an injection point for tests; by default the
    recipe's model id decides the backend.
    """
    passages = read_corpus_texts(passages_path)
    queries = read_corpus_texts(queries_path)
    collisions = sorted(set(passages) & set(queries))
    if collisions:
        raise ExportError(f"passage/query id collision: {collisions[:3]}")

    encoder = encoder or load_encoder(recipe)
    ids: list[str] = []
    inputs: list[str] = []
    for rid in sorted(passages):
        ids.append(rid)
        inputs.append(recipe.passage_input(passages[rid]))
    for rid in sorted(queries):
        ids.append(rid)
        inputs.append(recipe.query_input(queries[rid]))

    out_stem = Path(out_stem)
    out_stem.parent.mkdir(parents=True, exist_ok=True)
    suffix = {"dense": ".mlev", "token": ".mltv", "sparse": ".mlsv"}[recipe.paradigm]
    vector_path = out_stem.with_suffix(suffix)
    manifest = {
        "model_id": recipe.model_id,
        "paradigm": recipe.paradigm,
        "pooling": recipe.pooling,
        "normalize": recipe.normalize,
        "query_prefix": recipe.query_prefix,
        "passage_prefix": recipe.passage_prefix,
        "n_passages": len(passages),
        "n_queries": len(queries),
    }

    if recipe.paradigm == "dense":
        blocks = []
        dim = None
        for batch in _batched(inputs, recipe.batch_size):
            block = np.asarray(encoder.encode_dense(batch), dtype=np.float32)
            if block.ndim != 2 or block.shape[0] != len(batch):
                raise ExportError(f"encoder returned shape {block.shape} for {len(batch)} texts")
            if dim is None:
                dim = block.shape[1]
            elif block.shape[1] != dim:
                raise ExportError(
                    f"dimension mismatch across batches: {dim} then {block.shape[1]}"
                )
            blocks.append(block)
        matrix = np.vstack(blocks)
        if recipe.normalize:
            matrix = _unit_normalize(matrix)
        write_dense(ids, matrix, vector_path)
        manifest["dim"] = int(dim)
        result_dim = int(dim)

    elif recipe.paradigm == "token":
        records: dict[str, np.ndarray] = {}
        truncated: dict[str, int] = {}
        dim = None
        pos = 0
        for batch in _batched(inputs, recipe.batch_size):
            outputs = encoder.encode_tokens(batch)
            if len(outputs) != len(batch):
                raise ExportError("encoder returned wrong record count for a batch")
            for arr in outputs:
                arr = np.asarray(arr, dtype=np.float32)
                rid = ids[pos]
                if dim is None:
                    dim = arr.shape[1]
                elif arr.shape[1] != dim:
                    raise ExportError(
                        f"dimension mismatch across batches: {dim} then {arr.shape[1]}"
                    )
                if arr.shape[0] > recipe.max_tokens:
                    truncated[rid] = int(arr.shape[0])
                    arr = arr[: recipe.max_tokens]
                if recipe.normalize:
                    arr = _unit_normalize(arr)
                records[rid] = arr
                pos += 1
        write_token(records, int(dim), vector_path)
        manifest["dim"] = int(dim)
        manifest["truncated"] = dict(sorted(truncated.items()))
        result_dim = int(dim)

    else:
        entries: dict[str, dict[int, float]] = {}
        vocab_size = None
        pos = 0
        for batch in _batched(inputs, recipe.batch_size):
            weights, size = encoder.encode_sparse(batch)
            if len(weights) != len(batch):
                raise ExportError("encoder returned wrong record count for a batch")
            if vocab_size is None:
                vocab_size = size
            elif size != vocab_size:
                raise ExportError(
                    f"vocabulary size changed across batches: {vocab_size} then {size}"
                )
            for w in weights:
                entries[ids[pos]] = {int(i): float(v) for i, v in w.items()}
                pos += 1
        write_sparse(entries, int(vocab_size), vector_path)
        manifest["vocab_size"] = int(vocab_size)
        result_dim = None

    manifest_path = out_stem.parent / (out_stem.name + ".manifest.json")
    manifest_path.write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return ExportResult(
        vector_path=vector_path,
        manifest_path=manifest_path,
        count=len(ids),
        dim=result_dim,
    )
