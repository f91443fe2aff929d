"""Adversary harness: scripted manipulations and what catches each one.

Each attack runs a small election with one corrupted step and reports what
the verification layers saw. The detection tests assert that no attack ever
alters an accepted vote silently: either the victim's own check fails, the
global audit fails, or the discrepancy count rises.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..groups import (
    commit as pedersen_commit,
    encode_vote,
    encrypt,
    limb_count,
    mac_compute,
    scalar_to_limbs,
)
from ..rng import Drbg
from ..zkp import pok_prove
from . import records as rec
from .channel import DELIVERED, MailPiece, PostalChannel
from .config import ElectionConfig
from .engine import (
    CastSubmission,
    PendingCast,
    cast,
    cast_begin,
    cast_finish,
    ctx_cast,
    ctx_limb,
    ec_commit,
    process_votes,
    setup,
    tally,
)
from .papers import IdentityPaper, VotePaper
from .verify import compute_discrepancy, global_verify, voter_verify


@dataclass
class AttackReport:
    name: str
    seed: int
    accepted: list
    victim_ok: bool
    victim_reason: str
    global_ok: bool
    global_failed: str | None
    epsilon: int
    altered: bool  # an accepted ballot disagrees with the voter's intent
    detected: bool
    detail: str


def _election(seed: int, name: str, roll, candidates=("ida", "juno")):
    rng = Drbg(f"attack-{name}-{seed}".encode())
    config = ElectionConfig(
        candidates=tuple(candidates),
        rule="choose-one",
        roll=tuple(roll),
        trustees=1,
        threshold=1,
        error_tolerance=1,
        mix_stages=1,
    )
    return rng, setup(config, rng)


def _mail(channel: PostalChannel, ctx, cast_result) -> None:
    channel.send(
        MailPiece(
            cast_result.view.voter_id,
            cast_result.vote_paper.payload(ctx.grp),
            cast_result.identity_paper.payload(),
        )
    )


def _altered(ctx, trustee_keys, intents: dict) -> bool:
    """True when any accepted vote decrypts away from the voter's intent.

    Single-trustee elections only: the one share is the full key.
    """
    grp = ctx.grp
    sk = trustee_keys[0].secret
    for entry in ctx.board.read(rec.LIST_ACCEPTED):
        _row, e_vote = rec.parse_accepted(grp, entry.payload)
        plain = grp.div(e_vote.c2, grp.pow(e_vote.c1, sk))
        if plain != encode_vote(grp, ctx.config.vote_index(intents[entry.key])):
            return True
    return False


def _report(name, seed, ctx, sr, victim_view, intents, detail) -> AttackReport:
    rep = global_verify(ctx.board)
    disc = compute_discrepancy(ctx.board)
    victim_ok, victim_reason = voter_verify(ctx.board, victim_view)
    accepted = [e.key for e in ctx.board.read(rec.LIST_ACCEPTED)]
    altered = _altered(ctx, sr.trustee_keys, intents)
    detected = (not altered) and (not victim_ok or not rep.ok or disc.epsilon >= 1)
    return AttackReport(
        name=name,
        seed=seed,
        accepted=accepted,
        victim_ok=victim_ok,
        victim_reason=victim_reason,
        global_ok=rep.ok,
        global_failed=rep.failed,
        epsilon=disc.epsilon,
        altered=altered,
        detected=detected,
        detail=detail,
    )


def run_ec_substitute(seed: int) -> AttackReport:
    """Corrupt commission swaps the committed ciphertexts at registration."""
    rng, sr = _election(seed, "ec-substitute", ("alice", "bob"))
    ctx = sr.context
    grp, pk = ctx.grp, ctx.pk

    pending = cast_begin(ctx, "alice", "ida", rng)
    cheat_index = ctx.config.vote_index("juno")
    e_vote = encrypt(grp, pk, encode_vote(grp, cheat_index), grp.random_scalar(rng))
    e_mac = encrypt(grp, pk, grp.gpow(grp.random_scalar(rng)), grp.random_scalar(rng))
    ctx.board.post(rec.LIST_COMMIT, "alice", rec.commit_payload(grp, e_mac, e_vote))
    victim = cast_finish(ctx, pending, rng)

    honest = cast(ctx, "bob", "juno", rng)
    channel = PostalChannel()
    _mail(channel, ctx, victim)
    _mail(channel, ctx, honest)
    channel.deliver_all()
    process_votes(ctx, channel.delivered(), sr.envelopes, rng)
    tally(ctx, sr.trustee_keys, rng)
    return _report(
        "ec-substitute", seed, ctx, sr, victim.view,
        {"alice": "ida", "bob": "juno"},
        "commission committed to a different vote than the device submitted",
    )


def run_mail_substitute(seed: int) -> AttackReport:
    """Postal adversary swaps the vote paper, keeping the parameter block."""
    rng, sr = _election(seed, "mail-substitute", ("alice", "bob"))
    ctx = sr.context

    victim = cast(ctx, "alice", "ida", rng)
    honest = cast(ctx, "bob", "juno", rng)
    channel = PostalChannel()
    _mail(channel, ctx, victim)
    _mail(channel, ctx, honest)

    cheat_index = ctx.config.vote_index("juno")
    forged_paper = VotePaper(
        ctx.election_hash, cheat_index, "juno",
        victim.vote_paper.param_cts, victim.vote_paper.proofs,
    )
    channel.substitute_vote_paper("alice", forged_paper.payload(ctx.grp))
    channel.deliver_all()
    process_votes(ctx, channel.delivered(), sr.envelopes, rng)
    tally(ctx, sr.trustee_keys, rng)
    return _report(
        "mail-substitute", seed, ctx, sr, victim.view,
        {"alice": "ida", "bob": "juno"},
        "vote paper rewritten in the mail; parameter block untouched",
    )


def run_client_bogus_openings(seed: int) -> AttackReport:
    """Cheating device commits to parameters its papers cannot open."""
    rng, sr = _election(seed, "client-bogus", ("alice", "bob"))
    ctx = sr.context
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash

    # hand-rolled cast for alice: commitments over shifted scalars
    a, b, r_a, r_b = (grp.random_scalar(rng) for _ in range(4))
    vote_index = ctx.config.vote_index("ida")
    mac = mac_compute(grp.q, a, b, vote_index)
    c_a = pedersen_commit(grp, ctx.pedersen, (a + 1) % grp.q, r_a)
    c_b = pedersen_commit(grp, ctx.pedersen, b, r_b)
    ctx.board.post(rec.LIST_REGISTERED, "alice", rec.registered_payload(grp, c_a, c_b))
    r_vote, r_mac = grp.random_scalar(rng), grp.random_scalar(rng)
    e_vote = encrypt(grp, pk, encode_vote(grp, vote_index), r_vote)
    e_mac = encrypt(grp, pk, grp.gpow(mac), r_mac)
    submission = CastSubmission(
        "alice", e_mac, e_vote,
        pok_prove(grp, pk, e_mac, mac, r_mac, ctx_cast(h, "alice", "mac"), rng),
        pok_prove(grp, pk, e_vote, vote_index, r_vote, ctx_cast(h, "alice", "vote"), rng),
    )
    entry, reason = ec_commit(ctx, submission, rng)
    assert entry is not None, reason
    pending = PendingCast(
        "alice", "ida", vote_index, mac, (a, b, r_a, r_b), r_vote, r_mac, submission
    )
    victim = cast_finish(ctx, pending, rng)

    honest = cast(ctx, "bob", "juno", rng)
    channel = PostalChannel()
    _mail(channel, ctx, victim)
    _mail(channel, ctx, honest)
    channel.deliver_all()
    process_votes(ctx, channel.delivered(), sr.envelopes, rng)
    tally(ctx, sr.trustee_keys, rng)
    return _report(
        "client-bogus-openings", seed, ctx, sr, victim.view,
        {"alice": "ida", "bob": "juno"},
        "registered commitments do not open to the mailed parameters",
    )


def run_duplicate_opening(seed: int) -> AttackReport:
    """A forged second ballot claims the victim's identity."""
    rng, sr = _election(seed, "duplicate", ("alice", "bob"))
    ctx = sr.context
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash

    victim = cast(ctx, "alice", "ida", rng)
    honest = cast(ctx, "bob", "juno", rng)
    channel = PostalChannel()
    _mail(channel, ctx, victim)
    _mail(channel, ctx, honest)
    channel.deliver_all()

    # forged paper pair: fresh parameters with honest-looking proofs, since
    # the parameter proofs are not tied to any identity by design
    count = limb_count(grp)
    forged_cts, forged_proofs = [], []
    for pos, secret in enumerate(grp.random_scalar(rng) for _ in range(4)):
        for limb_pos, limb in enumerate(scalar_to_limbs(grp, secret)):
            index = pos * count + limb_pos
            r = grp.random_scalar(rng)
            c = encrypt(grp, pk, grp.gpow(limb), r)
            forged_cts.append(c)
            forged_proofs.append(pok_prove(grp, pk, c, limb, r, ctx_limb(h, index), rng))
    forged_vote = VotePaper(
        h, ctx.config.vote_index("juno"), "juno", tuple(forged_cts), tuple(forged_proofs)
    )
    forged = MailPiece(
        "alice", forged_vote.payload(grp), IdentityPaper(h, "alice").payload(),
        state=DELIVERED,
    )
    pieces = list(channel.delivered()) + [forged]
    process_votes(ctx, pieces, sr.envelopes, rng)
    tally(ctx, sr.trustee_keys, rng)
    return _report(
        "duplicate-opening", seed, ctx, sr, victim.view,
        {"alice": "ida", "bob": "juno"},
        "two openings claim one identity; both are excluded",
    )


def run_fake_board_post(seed: int) -> AttackReport:
    """Board-level adversary registers a voter who never cast."""
    rng, sr = _election(seed, "fake-post", ("alice", "bob", "carol"))
    ctx = sr.context
    grp = ctx.grp

    victim = cast(ctx, "alice", "ida", rng)
    honest = cast(ctx, "bob", "juno", rng)
    # carol abstains; the attacker plants a registration in her name
    c_a = pedersen_commit(grp, ctx.pedersen, grp.random_scalar(rng), grp.random_scalar(rng))
    c_b = pedersen_commit(grp, ctx.pedersen, grp.random_scalar(rng), grp.random_scalar(rng))
    ctx.board.post(rec.LIST_REGISTERED, "carol", rec.registered_payload(grp, c_a, c_b))

    channel = PostalChannel()
    _mail(channel, ctx, victim)
    _mail(channel, ctx, honest)
    channel.deliver_all()
    process_votes(ctx, channel.delivered(), sr.envelopes, rng)
    tally(ctx, sr.trustee_keys, rng)
    return _report(
        "fake-board-post", seed, ctx, sr, victim.view,
        {"alice": "ida", "bob": "juno"},
        "registration without a ballot raises the discrepancy count",
    )


ATTACKS = {
    "ec-substitute": run_ec_substitute,
    "mail-substitute": run_mail_substitute,
    "client-bogus-openings": run_client_bogus_openings,
    "duplicate-opening": run_duplicate_opening,
    "fake-board-post": run_fake_board_post,
}
