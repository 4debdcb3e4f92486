"""Retrieval kernels: tokenization, BM25, dense/sparse/late-interaction."""

from .index import InvertedIndex, bm25_score, bm25_score_all, build_index, load_index, save_index
from .search import (
    Bm25Retriever,
    DenseRetriever,
    LateInteractionRetriever,
    Retriever,
    SparseRetriever,
    top_k,
)
from .stores import (
    DenseStore,
    SparseStore,
    TokenStore,
    dense_score,
    maxsim_score,
    mock_embed,
    sparse_score,
)
from .tokenizer import Tokenizer, fallback_tokenizer, load_tokenizer
from .vecio import (
    merge_dense,
    merge_sparse,
    merge_token,
    read_dense,
    read_sparse,
    read_token,
    write_dense,
    write_sparse,
    write_token,
)

__all__ = [
    "Bm25Retriever",
    "DenseRetriever",
    "DenseStore",
    "InvertedIndex",
    "LateInteractionRetriever",
    "Retriever",
    "SparseRetriever",
    "SparseStore",
    "TokenStore",
    "Tokenizer",
    "bm25_score",
    "bm25_score_all",
    "build_index",
    "dense_score",
    "fallback_tokenizer",
    "load_index",
    "load_tokenizer",
    "maxsim_score",
    "merge_dense",
    "merge_sparse",
    "merge_token",
    "mock_embed",
    "read_dense",
    "read_sparse",
    "read_token",
    "save_index",
    "sparse_score",
    "top_k",
    "write_dense",
    "write_sparse",
    "write_token",
]
