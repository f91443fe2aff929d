"""Prime-order group arithmetic and the protocol's plaintext encodings.

The group G is realized as the order-q subgroup of Z_p* with p = 2q + 1 a
safe prime, so subgroup membership is the single check x^q == 1 (mod p).
Exponential ElGamal encrypts g^m, which keeps ciphertexts additively
homomorphic in the exponent; plaintext integers are only recoverable for
small domains, hence the vote-index and scalar-limb encodings below.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpz, powmod

DEFAULT_VOTE_BOUND = 2**20
LIMB_BITS = 16


class VoteDomainError(ValueError):
    """Decoded element is not g^v for any v in the vote domain."""


class EncodingError(ValueError):
    """Byte string is not a canonical element or scalar encoding."""


class GroupProfile:
    """Group constants plus canonical encodings and cached dlog tables."""

    def __init__(self, name: str, p: int, q: int, g: int, is_toy: bool = False):
        self.name = name
        self.p = mpz(p)
        self.q = mpz(q)
        self.g = mpz(g)
        self.is_toy = is_toy
        self.cofactor = (self.p - 1) // self.q
        if self.p != self.q * self.cofactor + 1:
            raise ValueError("q does not divide p-1")
        self.element_len = (self.p.bit_length() + 7) // 8
        self.scalar_len = (self.q.bit_length() + 7) // 8
        self.identity = mpz(1)
        self._baby_table: dict[int, dict] = {}
        self._limb_table: dict | None = None

    # -- arithmetic ---------------------------------------------------------

    def pow(self, base, exp) -> mpz:
        return powmod(base, exp, self.p)

    def gpow(self, exp) -> mpz:
        return powmod(self.g, exp, self.p)

    def mul(self, a, b) -> mpz:
        return a * b % self.p

    def div(self, a, b) -> mpz:
        return a * gmpy2.invert(b, self.p) % self.p

    def inv(self, a) -> mpz:
        return gmpy2.invert(a, self.p)

    def prod(self, items) -> mpz:
        acc = mpz(1)
        for x in items:
            acc = acc * x % self.p
        return acc

    def is_element(self, x) -> bool:
        x = mpz(x)
        return 1 <= x < self.p and powmod(x, self.q, self.p) == 1

    # -- canonical encodings ------------------------------------------------

    def element_bytes(self, x) -> bytes:
        return int(x).to_bytes(self.element_len, "big")

    def element_from_bytes(self, b: bytes) -> mpz:
        if len(b) != self.element_len:
            raise EncodingError("bad element length")
        x = mpz(int.from_bytes(b, "big"))
        if not self.is_element(x):
            raise EncodingError("not a group element")
        return x

    def scalar_bytes(self, s) -> bytes:
        return (int(s) % int(self.q)).to_bytes(self.scalar_len, "big")

    def scalar_from_bytes(self, b: bytes) -> mpz:
        if len(b) != self.scalar_len:
            raise EncodingError("bad scalar length")
        s = mpz(int.from_bytes(b, "big"))
        if s >= self.q:
            raise EncodingError("scalar out of range")
        return s

    def hash_to_element(self, *parts: bytes) -> mpz:
        """Derive a subgroup element nobody knows a dlog for.

        sha256 of the tagged input is mapped into Z_p and raised to the
        cofactor; counter bumps until the result is not the identity.
        """
        ctr = 0
        base = b"".join(len(p).to_bytes(4, "big") + p for p in parts)
        while True:
            digest = hashlib.sha256(
                b"mailvote-h2g" + base + ctr.to_bytes(4, "big")
            ).digest()
            # widen past p's size so the mod-p bias is negligible
            while 8 * len(digest) < self.p.bit_length() + 128:
                digest += hashlib.sha256(digest).digest()
            x = mpz(int.from_bytes(digest, "big")) % self.p
            el = powmod(x, self.cofactor, self.p)
            if el != 1:
                return el
            ctr += 1

    def random_scalar(self, rng, nonzero: bool = True) -> mpz:
        return mpz(rng.scalar(int(self.q), nonzero=nonzero))

    # -- small-exponent recovery --------------------------------------------

    def _babysteps(self, m: int) -> dict:
        table = self._baby_table.get(m)
        if table is None:
            table = {}
            cur = mpz(1)
            for j in range(m):
                table.setdefault(cur, j)
                cur = cur * self.g % self.p
            self._baby_table[m] = table
        return table

    def dlog(self, el, bound: int) -> int:
        """Baby-step giant-step discrete log of el base g over [0, bound)."""
        el = mpz(el)
        m = int(gmpy2.isqrt(bound)) + 1
        baby = self._babysteps(m)
        giant = powmod(gmpy2.invert(self.g, self.p), m, self.p)
        cur = el
        for i in range((bound + m - 1) // m + 1):
            j = baby.get(cur)
            if j is not None:
                v = i * m + j
                if v < bound:
                    return v
            cur = cur * giant % self.p
        raise VoteDomainError("element has no exponent in domain")


def mac_compute(q, slope, intercept, vote) -> mpz:
    """One-time authenticator for a vote: slope*vote + intercept mod q."""
    return (mpz(slope) * vote + intercept) % mpz(q)


# The default profile was produced by a deterministic upward search from
# sha256("mailvote-group-v1") for the first q with both q and 2q+1 prime;
# anyone can re-run the search and land on the same constants.
MAIN = GroupProfile(
    "main",
    p=0x1B9261FE113D7C8361550186E2B8859C89E34A4B5E84F7CA5EF7E44962F13344B,
    q=0xDC930FF089EBE41B0AA80C3715C42CE44F1A525AF427BE52F7BF224B17899A25,
    g=4,
)

# Tiny fields for brute-force oracles and the forgery-rate experiment only.
TOY11 = GroupProfile("toy11", p=23, q=11, g=2, is_toy=True)
TOY1009 = GroupProfile("toy1009", p=10091, q=1009, g=1024, is_toy=True)

PROFILES = {grp.name: grp for grp in (MAIN, TOY11, TOY1009)}


@dataclass(frozen=True)
class Ciphertext:
    """ElGamal pair (g^r, m * pk^r)."""

    c1: mpz
    c2: mpz

    def to_bytes(self, grp: GroupProfile) -> bytes:
        return grp.element_bytes(self.c1) + grp.element_bytes(self.c2)

    @classmethod
    def from_reader(cls, grp: GroupProfile, rd) -> "Ciphertext":
        c1 = grp.element_from_bytes(rd.raw(grp.element_len))
        c2 = grp.element_from_bytes(rd.raw(grp.element_len))
        return cls(c1, c2)


def encrypt(grp: GroupProfile, pk, m, r) -> Ciphertext:
    return Ciphertext(grp.gpow(r), mpz(m) * grp.pow(pk, r) % grp.p)


def decrypt(grp: GroupProfile, sk, c: Ciphertext) -> mpz:
    return grp.div(c.c2, grp.pow(c.c1, sk))


def rerandomize(grp: GroupProfile, pk, c: Ciphertext, r) -> Ciphertext:
    return Ciphertext(c.c1 * grp.gpow(r) % grp.p, c.c2 * grp.pow(pk, r) % grp.p)


def ct_mul(grp: GroupProfile, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return Ciphertext(a.c1 * b.c1 % grp.p, a.c2 * b.c2 % grp.p)


def ct_exp(grp: GroupProfile, c: Ciphertext, e) -> Ciphertext:
    return Ciphertext(grp.pow(c.c1, e), grp.pow(c.c2, e))


@dataclass(frozen=True)
class PedersenParams:
    """Commitment generators derived so nobody knows log_h1(h2)."""

    h1: mpz
    h2: mpz
    seed: bytes

    @classmethod
    def derive(cls, grp: GroupProfile, seed: bytes) -> "PedersenParams":
        h1 = grp.hash_to_element(seed, b"h1")
        h2 = grp.hash_to_element(seed, b"h2")
        return cls(h1, h2, seed)


def commit(grp: GroupProfile, pp: PedersenParams, value, blinding) -> mpz:
    return grp.pow(pp.h1, value) * grp.pow(pp.h2, blinding) % grp.p


def verify_opening(grp, pp, commitment, value, blinding) -> bool:
    return commit(grp, pp, value, blinding) == commitment


# -- vote / scalar / roll-index encodings ------------------------------------


def encode_vote(grp: GroupProfile, v: int):
    if v < 0:
        raise VoteDomainError("negative vote index")
    return grp.gpow(v)


def decode_vote(grp: GroupProfile, el, v_max: int = DEFAULT_VOTE_BOUND) -> int:
    return grp.dlog(el, v_max)


def scalar_to_limbs(grp: GroupProfile, s, width: int = LIMB_BITS) -> list[int]:
    """Split a scalar into fixed-count little-endian limbs of `width` bits."""
    count = (grp.q.bit_length() + width - 1) // width
    s = int(s)
    if not 0 <= s < grp.q:
        raise ValueError("scalar out of range")
    mask = (1 << width) - 1
    return [(s >> (width * i)) & mask for i in range(count)]


def limbs_to_scalar(grp: GroupProfile, limbs, width: int = LIMB_BITS) -> mpz:
    acc = 0
    for i, limb in enumerate(limbs):
        if not 0 <= limb < (1 << width):
            raise ValueError("limb out of range")
        acc |= int(limb) << (width * i)
    if acc >= grp.q:
        raise ValueError("limbs exceed scalar range")
    return mpz(acc)


def limb_count(grp: GroupProfile, width: int = LIMB_BITS) -> int:
    return (grp.q.bit_length() + width - 1) // width


def decode_limb(grp: GroupProfile, el, width: int = LIMB_BITS) -> int:
    """Table lookup of a limb exponent; table built once per profile."""
    if width != LIMB_BITS or grp.is_toy:
        return grp.dlog(el, 1 << width)
    if grp._limb_table is None:
        table = {}
        cur = mpz(1)
        for v in range(1 << width):
            table[cur] = v
            cur = cur * grp.g % grp.p
        grp._limb_table = table
    v = grp._limb_table.get(mpz(el))
    if v is None:
        raise VoteDomainError("element is not a limb encoding")
    return v
