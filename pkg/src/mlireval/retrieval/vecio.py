"""Binary vector file formats (little-endian throughout).

Dense ("MLEV"):   magic | u32 version | u64 count | u32 dim | u8 dtype |
                  id table (count x [u16 len | utf-8 bytes]) |
                  count*dim float32, row major.
Token ("MLTV"):   magic | u32 version | u64 count | u32 dim | u8 dtype |
                  per record: id | u32 token_count | token_count*dim float32.
Sparse ("MLSV"):  magic | u32 version | u64 count | u32 vocab_size |
                  per record: id | u32 nnz | nnz x (u32 index | f32 weight).

dtype code 0 is float32; no other code is defined. Readers reject any
structural inconsistency (bad magic, truncation, trailing bytes, counts
that disagree with the payload).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .stores import DenseStore, SparseStore, TokenStore, normalize_rows

FORMAT_VERSION = 1
DTYPE_F32 = 0

MAGIC_DENSE = b"MLEV"
MAGIC_TOKEN = b"MLTV"
MAGIC_SPARSE = b"MLSV"


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file (needed {n} bytes at {self.pos})")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def read_id(self) -> str:
        (length,) = self.unpack("H")
        raw = self.take(length)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{self.path}: id at byte {self.pos} is not UTF-8") from exc

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes after payload"
            )


def _pack_id(rid: str) -> bytes:
    raw = rid.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FormatError(f"id too long to encode: {rid[:32]!r}...")
    return struct.pack("<H", len(raw)) + raw


def _check_header(r: _Reader, magic: bytes):
    found = r.take(4)
    if found != magic:
        raise FormatError(f"{r.path}: bad magic {found!r}, expected {magic!r}")
    (version,) = r.unpack("I")
    if version != FORMAT_VERSION:
        raise FormatError(f"{r.path}: unsupported format version {version}")


def write_dense(store: DenseStore, path: str | Path) -> None:
    mat = np.ascontiguousarray(store.matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC_DENSE)
        fh.write(struct.pack("<IQIB", FORMAT_VERSION, len(store.ids), store.dim, DTYPE_F32))
        for rid in store.ids:
            fh.write(_pack_id(rid))
        fh.write(mat.tobytes())


def read_dense(path: str | Path) -> DenseStore:
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    _check_header(r, MAGIC_DENSE)
    count, dim, dtype = r.unpack("QIB")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    if dim < 1:
        raise FormatError(f"{path}: dim must be >= 1")
    ids = tuple(r.read_id() for _ in range(count))
    payload = r.take(count * dim * 4)
    r.done()
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    return DenseStore(ids=ids, matrix=np.array(matrix))


def write_token(store: TokenStore, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC_TOKEN)
        fh.write(struct.pack("<IQIB", FORMAT_VERSION, len(store.vectors), store.dim, DTYPE_F32))
        for rid in store.vectors:
            arr = np.ascontiguousarray(store.vectors[rid], dtype="<f4")
            fh.write(_pack_id(rid))
            fh.write(struct.pack("<I", arr.shape[0]))
            fh.write(arr.tobytes())


def read_token(path: str | Path, normalize: bool = True) -> TokenStore:
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    _check_header(r, MAGIC_TOKEN)
    count, dim, dtype = r.unpack("QIB")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    vectors: dict[str, np.ndarray] = {}
    for _ in range(count):
        rid = r.read_id()
        if rid in vectors:
            raise FormatError(f"{path}: duplicate id {rid!r}")
        (tokens,) = r.unpack("I")
        if tokens < 1:
            raise FormatError(f"{path}: record {rid!r} has zero token vectors")
        payload = r.take(tokens * dim * 4)
        vectors[rid] = np.array(np.frombuffer(payload, dtype="<f4").reshape(tokens, dim))
    r.done()
    store = TokenStore(dim=dim, vectors=vectors)
    return normalize_rows(store) if normalize else store


def write_sparse(store: SparseStore, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC_SPARSE)
        fh.write(struct.pack("<IQI", FORMAT_VERSION, len(store.entries), store.vocab_size))
        for rid in store.entries:
            weights = store.entries[rid]
            fh.write(_pack_id(rid))
            fh.write(struct.pack("<I", len(weights)))
            for idx in sorted(weights):
                fh.write(struct.pack("<If", idx, weights[idx]))


def read_sparse(path: str | Path) -> SparseStore:
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    _check_header(r, MAGIC_SPARSE)
    count, vocab_size = r.unpack("QI")
    entries: dict[str, dict[int, float]] = {}
    for _ in range(count):
        rid = r.read_id()
        if rid in entries:
            raise FormatError(f"{path}: duplicate id {rid!r}")
        (nnz,) = r.unpack("I")
        weights: dict[int, float] = {}
        for _ in range(nnz):
            idx, w = r.unpack("If")
            if idx in weights:
                raise FormatError(f"{path}: record {rid!r} repeats index {idx}")
            weights[idx] = float(w)
        entries[rid] = weights
    r.done()
    return SparseStore(vocab_size=vocab_size, entries=entries)


def merge_dense(stores: list[DenseStore]) -> DenseStore:
    """Combine stores (e.g. a passage file and a query file) into one."""
    if not stores:
        raise FormatError("no dense stores to merge")
    if len(stores) == 1:
        return stores[0]
    dims = {s.dim for s in stores}
    if len(dims) != 1:
        raise FormatError(f"dense stores disagree on dim: {sorted(dims)}")
    ids: list[str] = []
    for s in stores:
        ids.extend(s.ids)
    return DenseStore(ids=tuple(ids), matrix=np.vstack([s.matrix for s in stores]))


def merge_token(stores: list[TokenStore]) -> TokenStore:
    if not stores:
        raise FormatError("no token stores to merge")
    if len(stores) == 1:
        return stores[0]
    dims = {s.dim for s in stores}
    if len(dims) != 1:
        raise FormatError(f"token stores disagree on dim: {sorted(dims)}")
    vectors: dict[str, np.ndarray] = {}
    for s in stores:
        for rid, arr in s.vectors.items():
            if rid in vectors:
                raise FormatError(f"duplicate id {rid!r} across token stores")
            vectors[rid] = arr
    merged = TokenStore(dim=stores[0].dim, vectors=vectors)
    merged.normalized_on_load = any(s.normalized_on_load for s in stores)
    return merged


def merge_sparse(stores: list[SparseStore]) -> SparseStore:
    if not stores:
        raise FormatError("no sparse stores to merge")
    if len(stores) == 1:
        return stores[0]
    sizes = {s.vocab_size for s in stores}
    if len(sizes) != 1:
        raise FormatError(f"sparse stores disagree on vocabulary size: {sorted(sizes)}")
    entries: dict[str, dict[int, float]] = {}
    for s in stores:
        for rid, weights in s.entries.items():
            if rid in entries:
                raise FormatError(f"duplicate id {rid!r} across sparse stores")
            entries[rid] = weights
    return SparseStore(vocab_size=stores[0].vocab_size, entries=entries)
