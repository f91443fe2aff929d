"""Byte codecs for every bulletin-board payload.

The engine writes these and the auditor reads them back; keeping both
sides in one module is what makes `audit` independent of engine state.
List names are fixed here as constants so a list id appears in exactly
one place.
"""

from __future__ import annotations

from ..codec import Reader, pack_bytes, pack_list, pack_str, pack_u32
from ..groups import Ciphertext, GroupProfile, PedersenParams
from ..mixnet import MixProof
from ..pep import PepJudgement
from ..threshold import DecryptionBundle
from ..zkp import ChaumPedersen

LIST_PARAMS = "params"
LIST_ROLL = "roll"
LIST_REGISTERED = "registered"
LIST_COMMIT = "commit"
LIST_RECEIVED = "received"
LIST_REJECTED = "rejected"
LIST_REJECTED_OPEN = "rejected-open"
LIST_MIXED = "mixed"
LIST_OPENED = "opened"
LIST_PEP = "pep"
LIST_ACCEPTED = "accepted"
LIST_FINAL = "final"
LIST_TALLY = "tally"

KEY_CONFIG = "config"
KEY_DKG = "dkg"
KEY_PEDERSEN = "pedersen"

UNKNOWN_ID = 0xFFFFFFFF  # decrypted identity not on the roll


def pedersen_payload(grp: GroupProfile, pp: PedersenParams) -> bytes:
    return pack_bytes(pp.seed) + grp.element_bytes(pp.h1) + grp.element_bytes(pp.h2)


def parse_pedersen(grp: GroupProfile, data: bytes) -> PedersenParams:
    rd = Reader(data)
    seed = rd.bytes_()
    h1 = grp.element_from_bytes(rd.raw(grp.element_len))
    h2 = grp.element_from_bytes(rd.raw(grp.element_len))
    rd.done()
    return PedersenParams(h1, h2, seed)


def roll_payload(index: int) -> bytes:
    return pack_u32(index)


def parse_roll(data: bytes) -> int:
    rd = Reader(data)
    index = rd.u32()
    rd.done()
    return index


def registered_payload(grp, c_slope, c_intercept) -> bytes:
    return grp.element_bytes(c_slope) + grp.element_bytes(c_intercept)


def parse_registered(grp, data: bytes):
    rd = Reader(data)
    c_slope = grp.element_from_bytes(rd.raw(grp.element_len))
    c_intercept = grp.element_from_bytes(rd.raw(grp.element_len))
    rd.done()
    return c_slope, c_intercept


def commit_payload(grp, e_mac: Ciphertext, e_vote: Ciphertext) -> bytes:
    return e_mac.to_bytes(grp) + e_vote.to_bytes(grp)


def parse_commit(grp, data: bytes):
    rd = Reader(data)
    e_mac = Ciphertext.from_reader(grp, rd)
    e_vote = Ciphertext.from_reader(grp, rd)
    rd.done()
    return e_mac, e_vote


def received_payload(grp, vote_index: int, vote_string: str, e_id, limb_cts) -> bytes:
    return (
        pack_u32(vote_index)
        + pack_str(vote_string)
        + e_id.to_bytes(grp)
        + pack_list(limb_cts, lambda c: c.to_bytes(grp))
    )


def parse_received(grp, data: bytes):
    rd = Reader(data)
    vote_index = rd.u32()
    vote_string = rd.str_()
    e_id = Ciphertext.from_reader(grp, rd)
    limb_cts = rd.list_(lambda r: Ciphertext.from_reader(grp, r))
    rd.done()
    return vote_index, vote_string, e_id, limb_cts


def rejected_id_payload(voter_id: str, reason: str) -> bytes:
    return pack_str("id") + pack_str(voter_id) + pack_str(reason)


def rejected_ct_payload(grp, e_id: Ciphertext, reason: str) -> bytes:
    return pack_str("ct") + e_id.to_bytes(grp) + pack_str(reason)


def parse_rejected(grp, data: bytes):
    """Returns ('id', voter_id, reason) or ('ct', ciphertext, reason)."""
    rd = Reader(data)
    form = rd.str_()
    if form == "id":
        who = rd.str_()
    elif form == "ct":
        who = Ciphertext.from_reader(grp, rd)
    else:
        raise ValueError(f"unknown rejected form {form!r}")
    reason = rd.str_()
    rd.done()
    return form, who, reason


def rejected_open_payload(grp, index, bundle: DecryptionBundle) -> bytes:
    idx = UNKNOWN_ID if index is None else index
    return pack_u32(idx) + pack_bytes(bundle.to_bytes(grp))


def parse_rejected_open(grp, data: bytes):
    rd = Reader(data)
    idx = rd.u32()
    bundle = DecryptionBundle.from_reader(grp, Reader(rd.bytes_()))
    rd.done()
    return (None if idx == UNKNOWN_ID else idx), bundle


def _pack_rows(grp, rows) -> bytes:
    width = len(rows[0]) if rows else 0
    out = [pack_u32(len(rows)), pack_u32(width)]
    for row in rows:
        for cell in row:
            out.append(cell.to_bytes(grp))
    return b"".join(out)


def _read_rows(grp, rd: Reader):
    n, width = rd.u32(), rd.u32()
    return [
        tuple(Ciphertext.from_reader(grp, rd) for _ in range(width)) for _ in range(n)
    ]


def mix_input_payload(grp, row, enc_proof: ChaumPedersen) -> bytes:
    return _pack_rows(grp, [row]) + pack_bytes(enc_proof.to_bytes(grp))


def parse_mix_input(grp, data: bytes):
    rd = Reader(data)
    rows = _read_rows(grp, rd)
    if len(rows) != 1:
        raise ValueError("mix input entry holds exactly one row")
    proof = ChaumPedersen.from_reader(grp, Reader(rd.bytes_()))
    rd.done()
    return rows[0], proof


def stage_payload(grp, rows, proof: MixProof) -> bytes:
    return _pack_rows(grp, rows) + pack_bytes(proof.to_bytes(grp))


def parse_stage(grp, data: bytes):
    rd = Reader(data)
    rows = _read_rows(grp, rd)
    proof = MixProof.from_bytes(grp, rd.bytes_())
    rd.done()
    return rows, proof


def opened_payload(grp, params_ok: bool, scalars, id_index, bundles) -> bytes:
    idx = UNKNOWN_ID if id_index is None else id_index
    out = [pack_u32(1 if params_ok else 0)]
    out += [grp.scalar_bytes(s) for s in scalars]
    out.append(pack_u32(idx))
    out.append(pack_list(bundles, lambda b: pack_bytes(b.to_bytes(grp))))
    return b"".join(out)


def parse_opened(grp, data: bytes):
    rd = Reader(data)
    params_ok = bool(rd.u32())
    scalars = tuple(grp.scalar_from_bytes(rd.raw(grp.scalar_len)) for _ in range(4))
    idx = rd.u32()
    bundles = rd.list_(
        lambda r: DecryptionBundle.from_reader(grp, Reader(r.bytes_()))
    )
    rd.done()
    return params_ok, scalars, (None if idx == UNKNOWN_ID else idx), bundles


def pep_payload(grp, row_index: int, judgement: PepJudgement) -> bytes:
    return pack_u32(row_index) + pack_bytes(judgement.to_bytes(grp))


def parse_pep(grp, data: bytes):
    rd = Reader(data)
    row_index = rd.u32()
    judgement = PepJudgement.from_bytes(grp, rd.bytes_())
    rd.done()
    return row_index, judgement


def accepted_payload(grp, row_index: int, e_vote: Ciphertext) -> bytes:
    return pack_u32(row_index) + e_vote.to_bytes(grp)


def parse_accepted(grp, data: bytes):
    rd = Reader(data)
    row_index = rd.u32()
    e_vote = Ciphertext.from_reader(grp, rd)
    rd.done()
    return row_index, e_vote


def tally_payload(grp, vote_index: int, bundle: DecryptionBundle) -> bytes:
    return pack_u32(vote_index) + pack_bytes(bundle.to_bytes(grp))


def parse_tally(grp, data: bytes):
    rd = Reader(data)
    vote_index = rd.u32()
    bundle = DecryptionBundle.from_reader(grp, Reader(rd.bytes_()))
    rd.done()
    return vote_index, bundle
