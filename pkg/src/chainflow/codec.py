"""Canonical binary encoding primitives.

Layout rules, fixed for cross-run reproducibility: integers are big-endian
fixed-width, byte strings and UTF-8 strings carry a 4-byte big-endian length
prefix, sequences carry a 4-byte element count. Field order always follows
the declared order of the containing type.
"""

from __future__ import annotations

import struct

from .errors import ChainFileError

U8 = struct.Struct(">B")
U32 = struct.Struct(">I")
U64 = struct.Struct(">Q")
I64 = struct.Struct(">q")


def enc_u8(value: int) -> bytes:
    return U8.pack(value)


def enc_u32(value: int) -> bytes:
    return U32.pack(value)


def enc_u64(value: int) -> bytes:
    return U64.pack(value)


def enc_i64(value: int) -> bytes:
    return I64.pack(value)


def enc_bytes(value: bytes) -> bytes:
    return U32.pack(len(value)) + value


def enc_str(value: str) -> bytes:
    return enc_bytes(value.encode("utf-8"))


class Reader:
    """Cursor over an encoded buffer; raises ChainFileError on overrun."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        end = self._pos + n
        if end > len(self._data):
            raise ChainFileError("unexpected end of record")
        chunk = self._data[self._pos:end]
        self._pos = end
        return chunk

    def u8(self) -> int:
        return U8.unpack(self._take(1))[0]

    def u32(self) -> int:
        return U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return U64.unpack(self._take(8))[0]

    def i64(self) -> int:
        return I64.unpack(self._take(8))[0]

    def bytes_(self) -> bytes:
        return self._take(self.u32())

    def str_(self) -> str:
        raw = self.bytes_()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ChainFileError(f"invalid UTF-8 in record: {exc}") from exc

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_end(self) -> None:
        if self.remaining() != 0:
            raise ChainFileError(f"{self.remaining()} trailing bytes in record")
