"""Non-interactive sigma protocols under strong Fiat-Shamir.

Every challenge hashes the complete statement (domain tag, caller context,
public key material, the values being proven about, and the prover's
announcements), so a proof cannot be replayed against a different statement
or in a different context.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from gmpy2 import mpz

from .groups import Ciphertext, GroupProfile


class FsTranscript:
    """Accumulates length-prefixed statement bytes; emits the challenge."""

    def __init__(self, grp: GroupProfile, domain_tag: bytes):
        self.grp = grp
        self._h = hashlib.sha256()
        self.absorb(domain_tag)

    def absorb(self, data: bytes) -> "FsTranscript":
        self._h.update(len(data).to_bytes(4, "big"))
        self._h.update(data)
        return self

    def absorb_element(self, x) -> "FsTranscript":
        return self.absorb(self.grp.element_bytes(x))

    def absorb_scalar(self, s) -> "FsTranscript":
        return self.absorb(self.grp.scalar_bytes(s))

    def absorb_ciphertext(self, c: Ciphertext) -> "FsTranscript":
        return self.absorb(c.to_bytes(self.grp))

    def challenge(self) -> mpz:
        return mpz(int.from_bytes(self._h.digest(), "big")) % self.grp.q

    def derive(self, label: bytes, index: int, bits: int) -> int:
        """Statement-bound PRF output; does not advance the transcript."""
        h = self._h.copy()
        h.update(label)
        h.update(index.to_bytes(8, "big"))
        return int.from_bytes(h.digest(), "big") >> (256 - bits)


@dataclass(frozen=True)
class PokCiphertext:
    """Knowledge of (m_exp, r) with c = (g^r, g^m_exp * pk^r)."""

    a1: mpz
    a2: mpz
    s_m: mpz
    s_r: mpz

    def to_bytes(self, grp: GroupProfile) -> bytes:
        return (
            grp.element_bytes(self.a1)
            + grp.element_bytes(self.a2)
            + grp.scalar_bytes(self.s_m)
            + grp.scalar_bytes(self.s_r)
        )

    @classmethod
    def from_reader(cls, grp: GroupProfile, rd) -> "PokCiphertext":
        a1 = grp.element_from_bytes(rd.raw(grp.element_len))
        a2 = grp.element_from_bytes(rd.raw(grp.element_len))
        s_m = grp.scalar_from_bytes(rd.raw(grp.scalar_len))
        s_r = grp.scalar_from_bytes(rd.raw(grp.scalar_len))
        return cls(a1, a2, s_m, s_r)


def _pok_challenge(grp, pk, c, a1, a2, context):
    tr = FsTranscript(grp, b"pok-ciphertext")
    tr.absorb(context)
    tr.absorb_element(pk).absorb_ciphertext(c)
    tr.absorb_element(a1).absorb_element(a2)
    return tr.challenge()


def pok_prove(grp, pk, c: Ciphertext, m_exp, r, context: bytes, rng) -> PokCiphertext:
    w_m = grp.random_scalar(rng)
    w_r = grp.random_scalar(rng)
    a1 = grp.gpow(w_r)
    a2 = grp.gpow(w_m) * grp.pow(pk, w_r) % grp.p
    ch = _pok_challenge(grp, pk, c, a1, a2, context)
    s_m = (w_m + ch * m_exp) % grp.q
    s_r = (w_r + ch * r) % grp.q
    return PokCiphertext(a1, a2, s_m, s_r)


def pok_verify(grp, pk, c: Ciphertext, proof: PokCiphertext, context: bytes) -> bool:
    if not (grp.is_element(proof.a1) and grp.is_element(proof.a2)):
        return False
    if not (0 <= proof.s_m < grp.q and 0 <= proof.s_r < grp.q):
        return False
    ch = _pok_challenge(grp, pk, c, proof.a1, proof.a2, context)
    if grp.gpow(proof.s_r) != proof.a1 * grp.pow(c.c1, ch) % grp.p:
        return False
    lhs = grp.gpow(proof.s_m) * grp.pow(pk, proof.s_r) % grp.p
    return lhs == proof.a2 * grp.pow(c.c2, ch) % grp.p


@dataclass(frozen=True)
class ChaumPedersen:
    """Equality of discrete logs: log_g1(y1) = log_g2(y2)."""

    t1: mpz
    t2: mpz
    s: mpz

    def to_bytes(self, grp: GroupProfile) -> bytes:
        return (
            grp.element_bytes(self.t1)
            + grp.element_bytes(self.t2)
            + grp.scalar_bytes(self.s)
        )

    @classmethod
    def from_reader(cls, grp: GroupProfile, rd) -> "ChaumPedersen":
        t1 = grp.element_from_bytes(rd.raw(grp.element_len))
        t2 = grp.element_from_bytes(rd.raw(grp.element_len))
        s = grp.scalar_from_bytes(rd.raw(grp.scalar_len))
        return cls(t1, t2, s)


def _cp_challenge(grp, g1, y1, g2, y2, t1, t2, context):
    tr = FsTranscript(grp, b"chaum-pedersen")
    tr.absorb(context)
    for x in (g1, y1, g2, y2, t1, t2):
        tr.absorb_element(x)
    return tr.challenge()


def cp_prove(grp, g1, y1, g2, y2, x, context: bytes, rng) -> ChaumPedersen:
    w = grp.random_scalar(rng)
    t1 = grp.pow(g1, w)
    t2 = grp.pow(g2, w)
    ch = _cp_challenge(grp, g1, y1, g2, y2, t1, t2, context)
    return ChaumPedersen(t1, t2, (w + ch * x) % grp.q)


def cp_verify(grp, g1, y1, g2, y2, proof: ChaumPedersen, context: bytes) -> bool:
    if not (grp.is_element(proof.t1) and grp.is_element(proof.t2)):
        return False
    if not 0 <= proof.s < grp.q:
        return False
    ch = _cp_challenge(grp, g1, y1, g2, y2, proof.t1, proof.t2, context)
    if grp.pow(g1, proof.s) != proof.t1 * grp.pow(y1, ch) % grp.p:
        return False
    return grp.pow(g2, proof.s) == proof.t2 * grp.pow(y2, ch) % grp.p


def enc_prove(grp, pk, c: Ciphertext, m_exp, r, context: bytes, rng) -> ChaumPedersen:
    """Proof that c encrypts the public g^m_exp with some randomness."""
    y2 = grp.div(c.c2, grp.gpow(m_exp))
    return cp_prove(grp, grp.g, c.c1, pk, y2, r, context, rng)


def enc_verify(grp, pk, c: Ciphertext, m_exp, proof, context: bytes) -> bool:
    y2 = grp.div(c.c2, grp.gpow(m_exp))
    return cp_verify(grp, grp.g, c.c1, pk, y2, proof, context)


def ct_quotient(grp, left: Ciphertext, right: Ciphertext) -> Ciphertext:
    """Componentwise quotient; encrypts the plaintext ratio."""
    return Ciphertext(grp.div(left.c1, right.c1), grp.div(left.c2, right.c2))


@dataclass(frozen=True)
class PepContribution:
    """One trustee's blinding of the ciphertext quotient."""

    trustee_index: int
    blinded: Ciphertext
    proof: ChaumPedersen

    def to_bytes(self, grp: GroupProfile) -> bytes:
        from .codec import pack_u32

        return (
            pack_u32(self.trustee_index)
            + self.blinded.to_bytes(grp)
            + self.proof.to_bytes(grp)
        )

    @classmethod
    def from_reader(cls, grp: GroupProfile, rd) -> "PepContribution":
        idx = rd.u32()
        blinded = Ciphertext.from_reader(grp, rd)
        proof = ChaumPedersen.from_reader(grp, rd)
        return cls(idx, blinded, proof)


def pep_blind(grp, c_diff: Ciphertext, z, context: bytes, rng, trustee_index: int = 0):
    """Raise the quotient to a secret exponent, proving both halves match."""
    blinded = Ciphertext(grp.pow(c_diff.c1, z), grp.pow(c_diff.c2, z))
    # the index rides along unsigned otherwise, so pin it in the transcript
    proof = cp_prove(
        grp, c_diff.c1, blinded.c1, c_diff.c2, blinded.c2, z,
        context + b"|t" + str(trustee_index).encode(), rng,
    )
    return PepContribution(trustee_index, blinded, proof)


def pep_contribution_ok(grp, c_diff, contrib: PepContribution, context: bytes) -> bool:
    return cp_verify(
        grp,
        c_diff.c1,
        contrib.blinded.c1,
        c_diff.c2,
        contrib.blinded.c2,
        contrib.proof,
        context + b"|t" + str(contrib.trustee_index).encode(),
    )
