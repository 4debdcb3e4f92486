"""Language-aware evaluation engine for multilingual retrieval."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ContentGroup,
    Corpus,
    Passage,
    Query,
    Violation,
    grade,
    normalize_lang,
    validate_corpus,
)

__all__ = [
    "ContentGroup",
    "Corpus",
    "Passage",
    "Query",
    "Violation",
    "__version__",
    "grade",
    "normalize_lang",
    "validate_corpus",
]
