"""Tokenization for the lexical pipeline.

Two modes:

* ``fallback``: Unicode-whitespace split plus lowercase. No external
  assets; deterministic; intended for tests and smoke runs.
* ``subword``: driven by a JSON definition file holding a piece
  vocabulary and optional BPE merge rules, so a real subword scheme can be
  mirrored without bundling model assets.

Subword definition document:

    {
      "mode": "subword",
      "vocab": ["_the", "re", ...],          # pieces, or {"piece": id}
      "merges": [["t", "h"], ["th", "e"]],   # optional, BPE merge order
      "unk": "<unk>",                        # emitted for unmatchable input
      "word_boundary": "_",                  # prefix marking word starts
      "lowercase": true
    }

With ``merges`` present each word is split to characters and merged
greedily by merge rank; without it the word is segmented by longest match
against the vocabulary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from ..errors import ParseError

FALLBACK = "fallback"


@dataclass(frozen=True)
class Tokenizer:
    mode: str
    lowercase: bool = True
    vocab: dict[str, int] | None = None
    merge_ranks: dict[tuple[str, str], int] | None = None
    unk: str = "<unk>"
    word_boundary: str = ""
    source: str = FALLBACK  # definition path, or "fallback"

    def tokenize(self, text: str) -> list[str]:
        """Deterministic token sequence; empty text yields []."""
        if self.lowercase:
            text = text.lower()
        words = text.split()
        if self.mode == FALLBACK:
            return words
        out: list[str] = []
        for word in words:
            out.extend(self._segment(self.word_boundary + word))
        return out

    def token_ids(self, text: str) -> list[int]:
        """Vocabulary ids for subword mode; the unk id covers unknowns."""
        if self.mode == FALLBACK:
            raise ParseError("fallback tokenizer has no vocabulary ids")
        assert self.vocab is not None
        unk_id = self.vocab.get(self.unk, -1)
        return [self.vocab.get(tok, unk_id) for tok in self.tokenize(text)]

    def _segment(self, word: str) -> list[str]:
        if self.merge_ranks:
            return self._bpe(word)
        return self._longest_match(word)

    @cached_property
    def _max_piece_len(self) -> int:
        return max(map(len, self.vocab), default=1) if self.vocab else 1

    def _longest_match(self, word: str) -> list[str]:
        assert self.vocab is not None
        pieces: list[str] = []
        pos = 0
        max_len = self._max_piece_len
        while pos < len(word):
            for end in range(min(len(word), pos + max_len), pos, -1):
                piece = word[pos:end]
                if piece in self.vocab:
                    pieces.append(piece)
                    pos = end
                    break
            else:
                # no piece covers this character
                pieces.append(self.unk)
                pos += 1
        return pieces

    def _bpe(self, word: str) -> list[str]:
        assert self.vocab is not None and self.merge_ranks is not None
        parts = list(word)
        while len(parts) > 1:
            best_rank = None
            best_idx = -1
            for i in range(len(parts) - 1):
                rank = self.merge_ranks.get((parts[i], parts[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_idx = i
            if best_rank is None:
                break
            merged = parts[best_idx] + parts[best_idx + 1]
            # merge every occurrence of the winning pair, left to right
            pair = (parts[best_idx], parts[best_idx + 1])
            rebuilt: list[str] = []
            i = 0
            while i < len(parts):
                if i + 1 < len(parts) and (parts[i], parts[i + 1]) == pair:
                    rebuilt.append(merged)
                    i += 2
                else:
                    rebuilt.append(parts[i])
                    i += 1
            parts = rebuilt
        return [p if p in self.vocab else self.unk for p in parts]


def fallback_tokenizer() -> Tokenizer:
    return Tokenizer(mode=FALLBACK)


def load_tokenizer(spec: str | Path) -> Tokenizer:
    """Load a tokenizer from a definition path, or the literal "fallback"."""
    if isinstance(spec, str) and spec == FALLBACK:
        return fallback_tokenizer()
    path = Path(spec)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read tokenizer definition: {exc}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=path) from exc
    if not isinstance(doc, dict):
        raise ParseError("tokenizer definition must be a JSON object", path=path)

    mode = doc.get("mode", "subword")
    if mode == FALLBACK:
        return Tokenizer(mode=FALLBACK, lowercase=bool(doc.get("lowercase", True)))
    if mode != "subword":
        raise ParseError(f"unknown tokenizer mode {mode!r}", path=path)

    raw_vocab = doc.get("vocab")
    if isinstance(raw_vocab, list):
        vocab = {str(piece): i for i, piece in enumerate(raw_vocab)}
    elif isinstance(raw_vocab, dict):
        vocab = {str(piece): int(idx) for piece, idx in raw_vocab.items()}
    else:
        raise ParseError("tokenizer field 'vocab' must be a list or object", path=path)
    if not vocab:
        raise ParseError("tokenizer vocabulary is empty", path=path)

    merges = doc.get("merges") or []
    merge_ranks: dict[tuple[str, str], int] = {}
    for rank, pair in enumerate(merges):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ParseError(f"merge rule #{rank} must be a pair", path=path)
        merge_ranks[(str(pair[0]), str(pair[1]))] = rank

    unk = str(doc.get("unk", "<unk>"))
    return Tokenizer(
        mode="subword",
        lowercase=bool(doc.get("lowercase", True)),
        vocab=vocab,
        merge_ranks=merge_ranks or None,
        unk=unk,
        word_boundary=str(doc.get("word_boundary", "")),
        source=str(path),
    )
