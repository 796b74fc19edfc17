"""Parameter checkpoints: magic RPNN1, little-endian, named tensors, CRC32."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..io_binary import BinReader, BinWriter

MAGIC = b"RPNN1"
_DTYPES = {0: np.float32, 1: np.float64}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    w = BinWriter(MAGIC)
    w.u8(1)  # version
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    w.u32(len(meta_bytes))
    w.raw(meta_bytes)
    w.u32(len(arrays))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype not in _DTYPE_CODES:
            raise DataError(f"unsupported checkpoint dtype {arr.dtype} for {name}")
        w.string(name)
        w.u8(_DTYPE_CODES[arr.dtype])
        w.u8(arr.ndim)
        for d in arr.shape:
            w.u32(d)
        w.raw(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    w.write(path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    r = BinReader.from_path(Path(path), MAGIC)
    version = r.u8()
    if version != 1:
        raise DataError(f"unsupported checkpoint version {version}")
    meta = json.loads(r.raw(r.u32()).decode())
    arrays: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.string()
        dtype = _DTYPES.get(r.u8())
        if dtype is None:
            raise DataError(f"unknown dtype code in {path}")
        ndim = r.u8()
        shape = tuple(r.u32() for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        raw = r.raw(count * np.dtype(dtype).itemsize)
        arrays[name] = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")) \
            .astype(dtype).reshape(shape)
    return arrays, meta
