"""Encoder-to-format bridge for the multilingual retrieval evaluation engine."""

__version__ = "0.1.0"

from .encoders import Encoder, HashEncoder, load_encoder
from .export import ExportResult, export, read_corpus_texts
from .recipe import ModelRecipe, load_recipe

__all__ = [
    "Encoder",
    "ExportResult",
    "HashEncoder",
    "ModelRecipe",
    "__version__",
    "export",
    "load_encoder",
    "load_recipe",
    "read_corpus_texts",
]
