"""Canonical fixed-field byte records.

Every transcript artifact (board entries, proofs, paper payloads) is built
from these helpers so that serialization is deterministic: same logical
value, same bytes, always. Variable-length fields carry a 4-byte big-endian
length prefix; fixed-width fields (group elements, scalars) carry none.
"""

from __future__ import annotations


def pack_u32(n: int) -> bytes:
    if not 0 <= n < 2**32:
        raise ValueError("u32 out of range")
    return n.to_bytes(4, "big")


def pack_bytes(b: bytes) -> bytes:
    return pack_u32(len(b)) + b


def pack_str(s: str) -> bytes:
    return pack_bytes(s.encode("utf-8"))


def pack_list(items, packer) -> bytes:
    out = [pack_u32(len(items))]
    out.extend(packer(it) for it in items)
    return b"".join(out)


class Reader:
    """Cursor over a canonical record; every read is bounds-checked."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated record")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return int.from_bytes(self._take(4), "big")

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def bytes_(self) -> bytes:
        return self._take(self.u32())

    def str_(self) -> str:
        return self.bytes_().decode("utf-8")

    def list_(self, item_reader) -> list:
        return [item_reader(self) for _ in range(self.u32())]

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ValueError("trailing bytes in record")
