"""Plaintext-equivalence judgements.

Two ciphertexts encrypt the same message iff their quotient encrypts the
identity. Every trustee raises the quotient to a fresh secret exponent
(with a proof), the contributions are multiplied, and the product is
threshold-decrypted: identity means equal, anything else is a blinded
non-identity ratio that reveals nothing about the plaintexts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codec import Reader, pack_list, pack_u32
from .groups import Ciphertext, GroupProfile, ct_mul
from .threshold import DecryptionBundle, combine, partial_decrypt
from .zkp import PepContribution, ct_quotient, pep_blind, pep_contribution_ok

VERDICT_EQUAL = "equal"
VERDICT_NOT_EQUAL = "not-equal"


class PepCorruption(Exception):
    """A contribution or its decryption failed verification; not a verdict."""

    def __init__(self, trustee_indices, detail: str):
        self.trustee_indices = list(trustee_indices)
        super().__init__(f"{detail} (trustees {self.trustee_indices})")


@dataclass(frozen=True)
class PepJudgement:
    contributions: tuple
    combined: Ciphertext
    bundle: DecryptionBundle
    verdict: str

    @property
    def equal(self) -> bool:
        return self.verdict == VERDICT_EQUAL

    def to_bytes(self, grp: GroupProfile) -> bytes:
        flag = b"\x01" if self.equal else b"\x00"
        return (
            pack_list(self.contributions, lambda c: c.to_bytes(grp))
            + self.combined.to_bytes(grp)
            + self.bundle.to_bytes(grp)
            + flag
        )

    @classmethod
    def from_bytes(cls, grp: GroupProfile, data: bytes) -> "PepJudgement":
        rd = Reader(data)
        contribs = tuple(rd.list_(lambda r: PepContribution.from_reader(grp, r)))
        combined = Ciphertext.from_reader(grp, rd)
        bundle = DecryptionBundle.from_reader(grp, rd)
        verdict = VERDICT_EQUAL if rd.raw(1) == b"\x01" else VERDICT_NOT_EQUAL
        rd.done()
        return cls(contribs, combined, bundle, verdict)


def pep_judge(
    grp,
    left: Ciphertext,
    right: Ciphertext,
    contributions,
    bundle: DecryptionBundle,
    share_keys: dict,
    k: int,
    context: bytes,
) -> PepJudgement:
    """Assemble and validate a judgement from trustee-produced pieces.

    Raises PepCorruption (naming trustees) rather than returning not-equal
    when a piece fails verification, so corruption is never mistaken for a
    plaintext mismatch.
    """
    c_diff = ct_quotient(grp, left, right)
    bad = [
        c.trustee_index
        for c in contributions
        if not pep_contribution_ok(grp, c_diff, c, context + b"/blind")
    ]
    if bad:
        raise PepCorruption(bad, "bad blinding proof")
    combined = contributions[0].blinded
    for c in contributions[1:]:
        combined = ct_mul(grp, combined, c.blinded)
    if not bundle.verify(grp, combined, share_keys, k, context + b"/decrypt"):
        raise PepCorruption(
            [p.trustee_index for p in bundle.partials], "bad decryption share"
        )
    verdict = VERDICT_EQUAL if bundle.plaintext == 1 else VERDICT_NOT_EQUAL
    return PepJudgement(tuple(contributions), combined, bundle, verdict)


def pep_run(
    grp,
    left: Ciphertext,
    right: Ciphertext,
    trustee_keys,
    share_keys: dict,
    k: int,
    context: bytes,
    rng,
) -> PepJudgement:
    """Honest-trustee convenience path: blind, combine, decrypt, judge."""
    c_diff = ct_quotient(grp, left, right)
    contributions = [
        pep_blind(grp, c_diff, grp.random_scalar(rng), context + b"/blind", rng, key.index)
        for key in trustee_keys
    ]
    combined = contributions[0].blinded
    for c in contributions[1:]:
        combined = ct_mul(grp, combined, c.blinded)
    partials = [
        partial_decrypt(grp, key, combined, context + b"/decrypt", rng)
        for key in trustee_keys[:k]
    ]
    _, bundle = combine(grp, combined, partials, share_keys, k, context + b"/decrypt")
    return pep_judge(grp, left, right, contributions, bundle, share_keys, k, context)


def pep_verify(
    grp,
    left: Ciphertext,
    right: Ciphertext,
    judgement: PepJudgement,
    share_keys: dict,
    k: int,
    context: bytes,
) -> tuple[bool, str]:
    """Public re-verification of a posted judgement."""
    if not judgement.contributions:
        return False, "no contributions"
    indices = [c.trustee_index for c in judgement.contributions]
    if len(set(indices)) != len(indices):
        return False, "duplicate contribution"
    c_diff = ct_quotient(grp, left, right)
    for c in judgement.contributions:
        if not pep_contribution_ok(grp, c_diff, c, context + b"/blind"):
            return False, f"corrupt contribution from trustee {c.trustee_index}"
    combined = judgement.contributions[0].blinded
    for c in judgement.contributions[1:]:
        combined = ct_mul(grp, combined, c.blinded)
    if combined != judgement.combined:
        return False, "combined quotient mismatch"
    if not judgement.bundle.verify(grp, combined, share_keys, k, context + b"/decrypt"):
        return False, "decryption bundle failed"
    if judgement.equal != (judgement.bundle.plaintext == 1):
        return False, "verdict inconsistent with decryption"
    return True, ""
