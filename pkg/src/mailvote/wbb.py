"""Append-only public bulletin board.

Entries are (list-id, key, payload) triples bound into a single hash chain.
Anyone holding the board file can recompute the chain; anyone holding a head
value can detect rewrites of everything posted before it. Truncating the
tail of the file is the one edit a chain cannot see on its own, which is why
auditors compare against an independently remembered head (snapshot) and
voters check their own entries for presence.

Some lists enforce one-post-per-key (a voter registers once, one commitment
per ballot serial); the rest are free-append. Writer authorization is a
hook: the reference deployment is single-process, so the default accepts
every writer, but the check sits on the post path where a real deployment
would enforce signatures.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .codec import pack_bytes, pack_str

GENESIS = hashlib.sha256(b"mailvote-board-v1").digest()

SEAL_LIST = "meta"
SEAL_KEY = "sealed"

# lists where a key may appear at most once
UNIQUE_KEY_LISTS = frozenset({"roll", "registered", "commit", "params"})

_FORBIDDEN = set("|\r\n")


class BoardError(Exception):
    pass


class DuplicateKeyError(BoardError):
    pass


class SealedError(BoardError):
    pass


class ChainError(BoardError):
    """The stored chain does not match the entries."""

    def __init__(self, position: int, detail: str):
        self.position = position
        super().__init__(f"board line {position}: {detail}")


@dataclass(frozen=True)
class Entry:
    list_id: str
    key: str
    payload: bytes
    head: bytes  # chain head after this entry


def _extend(head: bytes, list_id: str, key: str, payload: bytes) -> bytes:
    h = hashlib.sha256()
    h.update(head)
    h.update(pack_str(list_id))
    h.update(pack_str(key))
    h.update(pack_bytes(payload))
    return h.digest()


def _check_label(text: str, what: str) -> None:
    if what == "list id" and not text:
        raise BoardError("empty list id")
    if _FORBIDDEN & set(text):
        raise BoardError(f"{what} may not contain '|' or line breaks")


class Board:
    def __init__(self, writer_auth=None):
        self.entries: list[Entry] = []
        self.head = GENESIS
        self._writer_auth = writer_auth
        self._seen: dict[str, set] = {}
        self._sealed = False

    @property
    def sealed(self) -> bool:
        return self._sealed

    def post(self, list_id: str, key: str, payload: bytes, writer: str = "") -> Entry:
        _check_label(list_id, "list id")
        _check_label(key, "key")
        if self._sealed:
            raise SealedError("board is sealed")
        if self._writer_auth is not None and not self._writer_auth(list_id, writer):
            raise BoardError(f"writer {writer!r} may not post to {list_id}")
        if list_id in UNIQUE_KEY_LISTS and key in self._seen.get(list_id, ()):
            raise DuplicateKeyError(f"{list_id} already holds key {key!r}")
        self.head = _extend(self.head, list_id, key, payload)
        entry = Entry(list_id, key, bytes(payload), self.head)
        self.entries.append(entry)
        self._seen.setdefault(list_id, set()).add(key)
        if list_id == SEAL_LIST and key == SEAL_KEY:
            self._sealed = True
        return entry

    def seal(self) -> Entry:
        """Close the board with a sentinel binding the final head."""
        if self._sealed:
            raise SealedError("board is already sealed")
        return self.post(SEAL_LIST, SEAL_KEY, self.head)

    def read(self, list_id: str) -> list[Entry]:
        return [e for e in self.entries if e.list_id == list_id]

    def get(self, list_id: str, key: str):
        for e in self.entries:
            if e.list_id == list_id and e.key == key:
                return e
        return None

    def has(self, list_id: str, key: str) -> bool:
        return key in self._seen.get(list_id, ())

    def __len__(self) -> int:
        return len(self.entries)

    def snapshot(self) -> str:
        return self.head.hex()

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for e in self.entries:
                fh.write(f"{e.list_id}|{e.key}|{e.payload.hex()}|{e.head.hex()}\n")

    @classmethod
    def load(cls, path, writer_auth=None) -> "Board":
        board = cls()
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.read().splitlines()
        for pos, line in enumerate(lines):
            parts = line.split("|")
            if len(parts) != 4:
                raise ChainError(pos, "malformed line")
            list_id, key, payload_hex, head_hex = parts
            try:
                payload = bytes.fromhex(payload_hex)
                stored = bytes.fromhex(head_hex)
            except ValueError:
                raise ChainError(pos, "bad hex field") from None
            try:
                board.post(list_id, key, payload)
            except SealedError:
                raise ChainError(pos, "entry after seal") from None
            except BoardError as exc:
                raise ChainError(pos, str(exc)) from None
            if board.head != stored:
                raise ChainError(pos, "hash chain mismatch")
        board._writer_auth = writer_auth
        return board
