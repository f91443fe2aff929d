"""k-of-n distributed key generation and verifiable threshold decryption.

Each trustee deals a random degree-(k-1) polynomial with committed
coefficients; shares are checked against the commitments and summed, so no
single party ever holds the joint secret. Decryption shares carry
Chaum-Pedersen proofs and combine through Lagrange interpolation in the
exponent.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2
from gmpy2 import mpz

from .codec import Reader, pack_list, pack_u32
from .groups import Ciphertext, GroupProfile
from .zkp import ChaumPedersen, cp_prove, cp_verify


class DkgAbort(Exception):
    """A dealer distributed a share inconsistent with its commitments."""

    def __init__(self, dealer_index: int):
        self.dealer_index = dealer_index
        super().__init__(f"dealer {dealer_index} failed its share check")


class InsufficientPartials(Exception):
    pass


class InvalidPartial(Exception):
    def __init__(self, trustee_indices):
        self.trustee_indices = list(trustee_indices)
        super().__init__(f"invalid decryption shares from trustees {self.trustee_indices}")


@dataclass(frozen=True)
class TrusteeKey:
    """A trustee's summed secret share; never posted anywhere public."""

    index: int
    secret: mpz


@dataclass(frozen=True)
class DealerOutput:
    dealer_index: int
    coeff_commits: tuple
    shares: tuple  # share for trustee i at position i-1


@dataclass(frozen=True)
class DkgTranscript:
    """Public record of the key ceremony; enough to re-derive pk and share keys."""

    n: int
    k: int
    dealer_commits: tuple  # n tuples of k elements each

    def public_key(self, grp: GroupProfile) -> mpz:
        return grp.prod(commits[0] for commits in self.dealer_commits)

    def share_key(self, grp: GroupProfile, index: int) -> mpz:
        """g^(trustee secret), recomputed from the dealt commitments."""
        acc = mpz(1)
        for commits in self.dealer_commits:
            acc = acc * _eval_commits(grp, commits, index) % grp.p
        return acc

    def share_keys(self, grp: GroupProfile) -> dict[int, mpz]:
        return {i: self.share_key(grp, i) for i in range(1, self.n + 1)}

    def to_bytes(self, grp: GroupProfile) -> bytes:
        body = pack_u32(self.n) + pack_u32(self.k)
        body += pack_list(
            self.dealer_commits,
            lambda commits: pack_list(commits, grp.element_bytes),
        )
        return body

    @classmethod
    def from_bytes(cls, grp: GroupProfile, data: bytes) -> "DkgTranscript":
        rd = Reader(data)
        n, k = rd.u32(), rd.u32()
        commits = rd.list_(
            lambda r: tuple(r.list_(lambda r2: grp.element_from_bytes(r2.raw(grp.element_len))))
        )
        rd.done()
        return cls(n, k, tuple(commits))


def _eval_commits(grp: GroupProfile, commits, x: int) -> mpz:
    # product of A_t^(x^t): the committed polynomial evaluated in the exponent
    acc = mpz(1)
    xe = mpz(1)
    for a_t in commits:
        acc = acc * grp.pow(a_t, xe) % grp.p
        xe = xe * x % grp.q
    return acc


def dkg_deal(grp: GroupProfile, n: int, k: int, dealer_index: int, rng) -> DealerOutput:
    coeffs = [grp.random_scalar(rng) for _ in range(k)]
    commits = tuple(grp.gpow(c) for c in coeffs)
    shares = []
    for i in range(1, n + 1):
        acc, xe = mpz(0), mpz(1)
        for c in coeffs:
            acc = (acc + c * xe) % grp.q
            xe = xe * i % grp.q
        shares.append(acc)
    return DealerOutput(dealer_index, commits, tuple(shares))


def dkg_assemble(grp: GroupProfile, n: int, k: int, deals) -> tuple[DkgTranscript, list[TrusteeKey]]:
    """Verify every dealt share against its commitments, then sum."""
    keys = []
    for i in range(1, n + 1):
        total = mpz(0)
        for deal in deals:
            share = deal.shares[i - 1]
            if grp.gpow(share) != _eval_commits(grp, deal.coeff_commits, i):
                raise DkgAbort(deal.dealer_index)
            total = (total + share) % grp.q
        keys.append(TrusteeKey(i, total))
    transcript = DkgTranscript(n, k, tuple(d.coeff_commits for d in deals))
    return transcript, keys


def dkg_run(grp: GroupProfile, n: int, k: int, rng) -> tuple[DkgTranscript, list[TrusteeKey]]:
    if not 1 <= k <= n:
        raise ValueError("threshold must satisfy 1 <= k <= n")
    deals = [dkg_deal(grp, n, k, j, rng) for j in range(1, n + 1)]
    return dkg_assemble(grp, n, k, deals)


@dataclass(frozen=True)
class PartialDecryption:
    trustee_index: int
    share_element: mpz  # c1^secret
    proof: ChaumPedersen

    def to_bytes(self, grp: GroupProfile) -> bytes:
        return (
            pack_u32(self.trustee_index)
            + grp.element_bytes(self.share_element)
            + self.proof.to_bytes(grp)
        )

    @classmethod
    def from_reader(cls, grp: GroupProfile, rd) -> "PartialDecryption":
        idx = rd.u32()
        el = grp.element_from_bytes(rd.raw(grp.element_len))
        proof = ChaumPedersen.from_reader(grp, rd)
        return cls(idx, el, proof)


def partial_decrypt(grp, key: TrusteeKey, c: Ciphertext, context: bytes, rng) -> PartialDecryption:
    share_el = grp.pow(c.c1, key.secret)
    share_key = grp.gpow(key.secret)
    proof = cp_prove(grp, grp.g, share_key, c.c1, share_el, key.secret, context, rng)
    return PartialDecryption(key.index, share_el, proof)


def partial_verify(grp, c: Ciphertext, partial: PartialDecryption, share_key, context: bytes) -> bool:
    return cp_verify(
        grp, grp.g, share_key, c.c1, partial.share_element, partial.proof, context
    )


def lagrange_at_zero(q, indices) -> dict[int, mpz]:
    q = mpz(q)
    coeffs = {}
    for i in indices:
        num, den = mpz(1), mpz(1)
        for j in indices:
            if j == i:
                continue
            num = num * j % q
            den = den * (j - i) % q
        coeffs[i] = num * gmpy2.invert(den, q) % q
    return coeffs


@dataclass(frozen=True)
class DecryptionBundle:
    """Self-contained, re-verifiable record of one threshold decryption."""

    partials: tuple
    plaintext: mpz

    def to_bytes(self, grp: GroupProfile) -> bytes:
        return pack_list(self.partials, lambda p: p.to_bytes(grp)) + grp.element_bytes(
            self.plaintext
        )

    @classmethod
    def from_reader(cls, grp: GroupProfile, rd) -> "DecryptionBundle":
        partials = tuple(rd.list_(lambda r: PartialDecryption.from_reader(grp, r)))
        pt = grp.element_from_bytes(rd.raw(grp.element_len))
        return cls(partials, pt)

    def verify(self, grp, c: Ciphertext, share_keys: dict, k: int, context: bytes) -> bool:
        indices = [p.trustee_index for p in self.partials]
        if len(set(indices)) != len(indices) or len(indices) < k:
            return False
        for p in self.partials:
            key = share_keys.get(p.trustee_index)
            if key is None or not partial_verify(grp, c, p, key, context):
                return False
        return _recombine(grp, c, self.partials) == self.plaintext


def _recombine(grp, c: Ciphertext, partials) -> mpz:
    lam = lagrange_at_zero(grp.q, [p.trustee_index for p in partials])
    mask = grp.prod(
        grp.pow(p.share_element, lam[p.trustee_index]) for p in partials
    )
    return grp.div(c.c2, mask)


def combine(grp, c: Ciphertext, partials, share_keys: dict, k: int, context: bytes):
    """Check the shares, interpolate in the exponent, return plaintext + bundle."""
    seen = {}
    for p in partials:
        seen.setdefault(p.trustee_index, p)
    distinct = sorted(seen.values(), key=lambda p: p.trustee_index)
    if len(distinct) < k:
        raise InsufficientPartials(f"need {k} distinct shares, have {len(distinct)}")
    bad = [
        p.trustee_index
        for p in distinct
        if not partial_verify(grp, c, p, share_keys[p.trustee_index], context)
    ]
    if bad:
        raise InvalidPartial(bad)
    plaintext = _recombine(grp, c, distinct)
    return plaintext, DecryptionBundle(tuple(distinct), plaintext)
