"""Encoders behind one batch interface.

Two backends:

* ``hash:`` model ids give a deterministic bag-of-words hash encoder with
  no external assets. Words map to fixed unit vectors, token vectors are
  the per-word vectors, the dense vector is pooled from them (cls / mean /
  last_token), and the sparse encoding hashes words into a fixed
  vocabulary with occurrence-count weights. Useful for pipeline
  validation and as the test stand-in for a model library.
* any other model id loads through sentence-transformers on demand
  (dense and token paradigms; the snapshot's own pooling applies).
"""

from __future__ import annotations

import hashlib

import numpy as np

from .recipe import ModelRecipe


class EncoderError(RuntimeError):
    pass


class Encoder:
    """Batch text encoder; backends override the paradigms they support."""

    def encode_dense(self, texts: list[str]) -> np.ndarray:
        raise EncoderError(f"{type(self).__name__} does not produce dense vectors")

    def encode_tokens(self, texts: list[str]) -> list[np.ndarray]:
        raise EncoderError(f"{type(self).__name__} does not produce token vectors")

    def encode_sparse(self, texts: list[str]) -> tuple[list[dict[int, float]], int]:
        raise EncoderError(f"{type(self).__name__} does not produce sparse vectors")


def pool_tokens(tokens: np.ndarray, pooling: str) -> np.ndarray:
    """Reduce a (tokens, dim) matrix to one vector."""
    if pooling == "cls":
        return tokens[0]
    if pooling == "last_token":
        return tokens[-1]
    if pooling == "mean":
        return tokens.mean(axis=0)
    raise EncoderError(f"unknown pooling {pooling!r}")


class HashEncoder(Encoder):
    """Deterministic hash-feature encoder (no model assets).

    The same class stands in for a neural model library in tests: its
    outputs are reproducible functions of the input text alone.
    """

    def __init__(self, dim: int = 16, seed: int = 0, pooling: str = "mean",
                 vocab_size: int = 1024):
        if dim < 2:
            raise EncoderError("hash encoder needs dim >= 2")
        self.dim = dim
        self.seed = seed
        self.pooling = pooling
        self.vocab_size = vocab_size
        self._word_cache: dict[str, np.ndarray] = {}

    def _word_vector(self, word: str) -> np.ndarray:
        cached = self._word_cache.get(word)
        if cached is None:
            digest = hashlib.sha256(f"{self.seed}:{word}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            v = rng.standard_normal(self.dim)
            cached = v / np.sqrt(np.dot(v, v))
            self._word_cache[word] = cached
        return cached

    def _words(self, text: str) -> list[str]:
        return text.split() or [""]

    def encode_dense(self, texts: list[str]) -> np.ndarray:
        rows = [
            pool_tokens(np.stack([self._word_vector(w) for w in self._words(t)]),
                        self.pooling)
            for t in texts
        ]
        return np.stack(rows).astype(np.float32)

    def encode_tokens(self, texts: list[str]) -> list[np.ndarray]:
        return [
            np.stack([self._word_vector(w) for w in self._words(t)]).astype(np.float32)
            for t in texts
        ]

    def encode_sparse(self, texts: list[str]) -> tuple[list[dict[int, float]], int]:
        out = []
        for text in texts:
            weights: dict[int, float] = {}
            for word in self._words(text):
                idx = int.from_bytes(
                    hashlib.sha256(f"{self.seed}|{word}".encode("utf-8")).digest()[:4],
                    "little",
                ) % self.vocab_size
                weights[idx] = weights.get(idx, 0.0) + 1.0
            out.append(weights)
        return out, self.vocab_size


class SentenceTransformerEncoder(Encoder):
    """Neural backend; the model snapshot's own pooling configuration
    applies, so the recipe's pooling field is recorded rather than forced."""

    def __init__(self, model_id: str, batch_size: int = 32):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                "sentence-transformers is not installed; install the 'models' extra"
            ) from exc
        try:
            self.model = SentenceTransformer(model_id)
        except Exception as exc:
            raise EncoderError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model.eval()
        self.batch_size = batch_size

    def encode_dense(self, texts: list[str]) -> np.ndarray:
        return np.asarray(
            self.model.encode(
                texts,
                batch_size=self.batch_size,
                convert_to_numpy=True,
                normalize_embeddings=False,
                show_progress_bar=False,
            ),
            dtype=np.float32,
        )

    def encode_tokens(self, texts: list[str]) -> list[np.ndarray]:
        outputs = self.model.encode(
            texts,
            batch_size=self.batch_size,
            output_value="token_embeddings",
            show_progress_bar=False,
        )
        return [np.asarray(t, dtype=np.float32) for t in outputs]


def _parse_hash_params(spec: str) -> dict:
    params = {}
    if spec:
        for part in spec.split(","):
            key, _, value = part.partition("=")
            params[key.strip()] = int(value)
    return params


def load_encoder(recipe: ModelRecipe) -> Encoder:
    if recipe.model_id.startswith("hash:"):
        params = _parse_hash_params(recipe.model_id[len("hash:"):])
        return HashEncoder(
            dim=params.get("dim", 16),
            seed=params.get("seed", 0),
            pooling=recipe.pooling,
            vocab_size=params.get("vocab", 1024),
        )
    return SentenceTransformerEncoder(recipe.model_id, batch_size=recipe.batch_size)
