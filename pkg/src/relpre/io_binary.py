"""Little-endian binary framing with a trailing CRC32, shared by all file formats."""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import DataError


class BinWriter:
    """Accumulates a little-endian byte stream; `finish` appends the CRC32."""

    def __init__(self, magic: bytes):
        self._buf = bytearray(magic)

    def u8(self, v: int):
        self._buf += struct.pack("<B", v)

    def u16(self, v: int):
        self._buf += struct.pack("<H", v)

    def u32(self, v: int):
        self._buf += struct.pack("<I", v)

    def u64(self, v: int):
        self._buf += struct.pack("<Q", v)

    def f32(self, v: float):
        self._buf += struct.pack("<f", v)

    def f64(self, v: float):
        self._buf += struct.pack("<d", v)

    def f64s(self, vs):
        self._buf += np.asarray(vs, dtype="<f8").tobytes()

    def raw(self, b: bytes):
        self._buf += b

    def string(self, s: str):
        data = s.encode("utf-8")
        if len(data) > 0xFFFF:
            raise DataError("string field too long")
        self.u16(len(data))
        self.raw(data)

    def finish(self) -> bytes:
        crc = zlib.crc32(bytes(self._buf)) & 0xFFFFFFFF
        return bytes(self._buf) + struct.pack("<I", crc)

    def write(self, path: str | Path):
        Path(path).write_bytes(self.finish())


class BinReader:
    """Validates magic and trailing CRC32, then yields typed fields in order."""

    def __init__(self, data: bytes, magic: bytes, source: str = "<bytes>"):
        if len(data) < len(magic) + 4:
            raise DataError(f"{source}: truncated file")
        body, crc_bytes = data[:-4], data[-4:]
        crc = struct.unpack("<I", crc_bytes)[0]
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise DataError(f"{source}: CRC32 mismatch")
        if not body.startswith(magic):
            raise DataError(f"{source}: bad magic, expected {magic!r}")
        self._data = body
        self._pos = len(magic)
        self._source = source

    @classmethod
    def from_path(cls, path: str | Path, magic: bytes) -> "BinReader":
        return cls(Path(path).read_bytes(), magic, source=str(path))

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise DataError(f"{self._source}: truncated record")
        out = self._data[self._pos:self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self._take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def f64s(self, n: int) -> np.ndarray:
        return np.frombuffer(self._take(8 * n), dtype="<f8").copy()

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def string(self) -> str:
        n = self.u16()
        return self._take(n).decode("utf-8")

    def at_end(self) -> bool:
        return self._pos == len(self._data)
