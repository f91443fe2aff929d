"""Receipt-freeness: forge a casting transcript for any claimed vote.

A voter under pressure reveals a view. This module builds one for a claimed
selection that passes every check the pressurer can run locally, reusing the
true long-term secrets so the board's commitments still open correctly. Only
the vote-dependent fields change; comparing a true and a forged view field
by field shows exactly that set and nothing else.
"""

from __future__ import annotations

import dataclasses

from ..groups import (
    commit as pedersen_commit,
    encode_vote,
    encrypt,
    limb_count,
    mac_compute,
    scalar_to_limbs,
)
from ..zkp import pok_prove, pok_verify
from . import records as rec
from .config import ConfigError
from .engine import CastError, CastView, ctx_cast, ctx_limb
from .papers import IdentityPaper, PaperFormatError, VotePaper

# fields a forged view is allowed to differ in
VOTE_DEPENDENT_FIELDS = frozenset(
    {
        "selection",
        "vote-index",
        "mac",
        "vote-randomness",
        "mac-randomness",
        "e-vote",
        "e-mac",
        "pok-vote",
        "pok-mac",
        "vote-paper",
    }
)


def fake_view(ctx, view: CastView, claimed_selection: str, rng) -> CastView:
    """Rewrite a true view to claim a different selection.

    Keeps the MAC parameters and their limb encryptions (they open the
    posted commitments), recomputes the authenticator for the claimed vote,
    and re-proves the two cast encryptions with fresh randomness. The
    claimed papers reuse the true parameter block, so they read exactly
    like a paper printed for the claimed vote.
    """
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash
    try:
        vote_index = ctx.config.vote_index(claimed_selection)
    except ConfigError as exc:
        raise CastError(str(exc)) from None
    a, b = view.mac_slope, view.mac_intercept
    mac = mac_compute(grp.q, a, b, vote_index)
    r_vote = grp.random_scalar(rng)
    r_mac = grp.random_scalar(rng)
    e_vote = encrypt(grp, pk, encode_vote(grp, vote_index), r_vote)
    e_mac = encrypt(grp, pk, grp.gpow(mac), r_mac)
    pok_vote = pok_prove(
        grp, pk, e_vote, vote_index, r_vote, ctx_cast(h, view.voter_id, "vote"), rng
    )
    pok_mac = pok_prove(
        grp, pk, e_mac, mac, r_mac, ctx_cast(h, view.voter_id, "mac"), rng
    )
    paper = VotePaper(h, vote_index, claimed_selection, view.param_cts, view.param_proofs)
    return dataclasses.replace(
        view,
        selection=claimed_selection,
        vote_index=vote_index,
        mac=mac,
        vote_randomness=r_vote,
        mac_randomness=r_mac,
        e_vote=e_vote,
        e_mac=e_mac,
        pok_vote=pok_vote,
        pok_mac=pok_mac,
        vote_paper_payload=paper.payload(grp),
    )


def local_view_checks(ctx, view: CastView) -> list[tuple[str, bool]]:
    """Every consistency check someone holding a view can run themselves.

    Uses only the view, the public board, and public parameters; a forged
    view must pass all of them or the forgery is detectable.
    """
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash
    checks = []

    try:
        paper = VotePaper.parse(grp, view.vote_paper_payload)
        identity = IdentityPaper.parse(view.identity_paper_payload)
        grammar = (
            paper.election_hash == h
            and paper.vote_index == view.vote_index
            and paper.vote_string == view.selection
            and ctx.config.selections[paper.vote_index] == paper.vote_string
            and identity.election_hash == h
            and identity.voter_id == view.voter_id
        )
    except (PaperFormatError, IndexError):
        paper = None
        grammar = False
    checks.append(("paper-grammar", grammar))
    checks.append(
        (
            "paper-params-match",
            paper is not None
            and paper.param_cts == view.param_cts
            and paper.proofs == view.param_proofs,
        )
    )

    a, b = view.mac_slope, view.mac_intercept
    checks.append(("mac-relation", view.mac == mac_compute(grp.q, a, b, view.vote_index)))

    reg = ctx.board.get(rec.LIST_REGISTERED, view.voter_id)
    if reg is None:
        checks.append(("commitment-openings", False))
    else:
        c_a, c_b = rec.parse_registered(grp, reg.payload)
        checks.append(
            (
                "commitment-openings",
                pedersen_commit(grp, ctx.pedersen, a, view.slope_blinding) == c_a
                and pedersen_commit(grp, ctx.pedersen, b, view.intercept_blinding) == c_b,
            )
        )

    checks.append(
        (
            "vote-encryption",
            encrypt(grp, pk, encode_vote(grp, view.vote_index), view.vote_randomness)
            == view.e_vote,
        )
    )
    checks.append(
        (
            "mac-encryption",
            encrypt(grp, pk, grp.gpow(view.mac), view.mac_randomness) == view.e_mac,
        )
    )

    count = limb_count(grp)
    secrets = (a, b, view.slope_blinding, view.intercept_blinding)
    expected = [
        limb for secret in secrets for limb in scalar_to_limbs(grp, secret)
    ]
    params_ok = len(view.param_cts) == 4 * count == len(view.param_randomness)
    if params_ok:
        params_ok = all(
            encrypt(grp, pk, grp.gpow(limb), r) == c
            for limb, r, c in zip(expected, view.param_randomness, view.param_cts)
        )
    checks.append(("param-encryptions", params_ok))
    checks.append(
        (
            "param-proofs",
            len(view.param_proofs) == 4 * count
            and all(
                pok_verify(grp, pk, c, proof, ctx_limb(h, i))
                for i, (c, proof) in enumerate(zip(view.param_cts, view.param_proofs))
            ),
        )
    )
    checks.append(
        (
            "cast-proofs",
            pok_verify(grp, pk, view.e_vote, view.pok_vote, ctx_cast(h, view.voter_id, "vote"))
            and pok_verify(grp, pk, view.e_mac, view.pok_mac, ctx_cast(h, view.voter_id, "mac")),
        )
    )
    checks.append(
        ("accepted-listed", ctx.board.get(rec.LIST_ACCEPTED, view.voter_id) is not None)
    )
    return checks


def structural_compare(grp, left: CastView, right: CastView) -> list[str]:
    """Field names where two views differ; field order must agree."""
    lf, rf = left.fields(grp), right.fields(grp)
    if [n for n, _ in lf] != [n for n, _ in rf]:
        raise ValueError("views do not share a field layout")
    return [n for (n, lv), (_, rv) in zip(lf, rf) if lv != rv]
