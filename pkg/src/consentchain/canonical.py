"""Canonical byte encoding shared by the ledger, call payloads, and state digests.

Rules: fixed-width integers are big-endian (u8/u32/u64), variable-length
byte strings are u32-length-prefixed, lists are u32-count-prefixed with
items encoded in order. Field order is part of each record's schema, so
two encoders that agree on the schema produce identical bytes.
"""

from __future__ import annotations

import struct


class CanonicalError(ValueError):
    """Malformed or truncated canonical bytes."""


def u8(value: int) -> bytes:
    if not 0 <= value <= 0xFF:
        raise CanonicalError(f"u8 out of range: {value}")
    return struct.pack(">B", value)


def u32(value: int) -> bytes:
    if not 0 <= value <= 0xFFFFFFFF:
        raise CanonicalError(f"u32 out of range: {value}")
    return struct.pack(">I", value)


def u64(value: int) -> bytes:
    if not 0 <= value <= 0xFFFFFFFFFFFFFFFF:
        raise CanonicalError(f"u64 out of range: {value}")
    return struct.pack(">Q", value)


def blob(data: bytes) -> bytes:
    """Length-prefixed byte string."""
    return u32(len(data)) + data


def text(value: str) -> bytes:
    """Length-prefixed UTF-8 string."""
    return blob(value.encode("utf-8"))


class Reader:
    """Sequential decoder over one canonical byte string."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise CanonicalError("truncated input")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return struct.unpack(">B", self._take(1))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def fixed(self, n: int) -> bytes:
        return self._take(n)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CanonicalError("invalid utf-8") from exc

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_end(self) -> None:
        if self.remaining:
            raise CanonicalError(f"{self.remaining} trailing bytes")
