"""Writers for the engine's binary vector files (little-endian).

Layouts must match the evaluation engine bit for bit:

Dense ("MLEV"):  magic | u32 version | u64 count | u32 dim | u8 dtype(0=f32) |
                 count x [u16 len | utf-8 id] | count*dim f32 row-major.
Token ("MLTV"):  magic | u32 version | u64 count | u32 dim | u8 dtype |
                 per record: id | u32 token_count | token_count*dim f32.
Sparse ("MLSV"): magic | u32 version | u64 count | u32 vocab_size |
                 per record: id | u32 nnz | nnz x (u32 index | f32 weight).

Writers check header/payload consistency (dims, counts, finite weights)
before anything reaches disk.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DTYPE_F32 = 0


class FormatWriteError(ValueError):
    pass


def _pack_id(rid: str) -> bytes:
    raw = rid.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FormatWriteError(f"id too long: {rid[:32]!r}...")
    return struct.pack("<H", len(raw)) + raw


def _check_ids(ids: list[str]) -> None:
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise FormatWriteError(f"duplicate ids: {dupes[:3]}")


def write_dense(ids: list[str], matrix: np.ndarray, path: str | Path) -> None:
    _check_ids(ids)
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise FormatWriteError(
            f"matrix shape {matrix.shape} does not match {len(ids)} ids"
        )
    if not np.all(np.isfinite(matrix)):
        raise FormatWriteError("matrix contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(b"MLEV")
        fh.write(struct.pack("<IQIB", FORMAT_VERSION, len(ids), matrix.shape[1], DTYPE_F32))
        for rid in ids:
            fh.write(_pack_id(rid))
        fh.write(matrix.tobytes())


def write_token(records: dict[str, np.ndarray], dim: int, path: str | Path) -> None:
    _check_ids(list(records))
    for rid, arr in records.items():
        if arr.ndim != 2 or arr.shape[1] != dim:
            raise FormatWriteError(f"record {rid!r} has shape {arr.shape}, expected (*, {dim})")
        if arr.shape[0] < 1:
            raise FormatWriteError(f"record {rid!r} has no token vectors")
        if not np.all(np.isfinite(arr)):
            raise FormatWriteError(f"record {rid!r} contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(b"MLTV")
        fh.write(struct.pack("<IQIB", FORMAT_VERSION, len(records), dim, DTYPE_F32))
        for rid, arr in records.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(_pack_id(rid))
            fh.write(struct.pack("<I", arr.shape[0]))
            fh.write(arr.tobytes())


def write_sparse(records: dict[str, dict[int, float]], vocab_size: int,
                 path: str | Path) -> None:
    _check_ids(list(records))
    for rid, weights in records.items():
        for idx, w in weights.items():
            if not (0 <= idx < vocab_size):
                raise FormatWriteError(
                    f"record {rid!r}: index {idx} outside vocabulary {vocab_size}"
                )
            if not math.isfinite(w) or w < 0:
                raise FormatWriteError(f"record {rid!r}: bad weight {w!r} at {idx}")
    with open(path, "wb") as fh:
        fh.write(b"MLSV")
        fh.write(struct.pack("<IQI", FORMAT_VERSION, len(records), vocab_size))
        for rid, weights in records.items():
            fh.write(_pack_id(rid))
            fh.write(struct.pack("<I", len(weights)))
            for idx in sorted(weights):
                fh.write(struct.pack("<If", idx, weights[idx]))
