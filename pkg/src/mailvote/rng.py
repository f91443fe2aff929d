"""Deterministic randomness with an OS-entropy production mode.

Seeded runs must replay byte-identically across platforms, so the generator
is a sha256 counter-mode DRBG rather than the stdlib Mersenne twister.
Unseeded generators key themselves from ``secrets``.
"""

from __future__ import annotations

import hashlib
import secrets


class Drbg:
    """sha256 counter-mode generator; crypto-strength when keyed from entropy."""

    def __init__(self, seed: bytes | int | str | None = None):
        if seed is None:
            key = secrets.token_bytes(32)
        elif isinstance(seed, int):
            key = seed.to_bytes(32, "big", signed=False)
        elif isinstance(seed, str):
            key = hashlib.sha256(seed.encode()).digest()
        else:
            key = hashlib.sha256(seed).digest()
        self._key = key
        self._counter = 0
        self._buf = b""

    def spawn(self, label: str) -> "Drbg":
        """Independent child stream; lets subsystems draw without interleaving."""
        child = Drbg(b"")
        child._key = hashlib.sha256(self._key + b"/" + label.encode()).digest()
        return child

    def take(self, n: int) -> bytes:
        while len(self._buf) < n:
            block = hashlib.sha256(
                self._key + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
            self._buf += block
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        nbytes = (bound.bit_length() + 7) // 8
        limit = (256**nbytes // bound) * bound
        while True:
            x = int.from_bytes(self.take(nbytes), "big")
            if x < limit:
                return x % bound

    def scalar(self, q: int, nonzero: bool = True) -> int:
        # secrets are drawn from [1, q-1]; public randomness may be 0
        while True:
            x = self.below(q)
            if x != 0 or not nonzero:
                return x

    def shuffle(self, items: list) -> None:
        # Fisher-Yates on the DRBG stream
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        perm = list(range(n))
        self.shuffle(perm)
        return perm
