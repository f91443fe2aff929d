"""Election engine: setup, casting, receiving, and tallying.

Every paragraph here appends facts to the bulletin board; the verify module
re-derives all of them from the board alone. The engine holds the only code
paths that touch secrets (trustee key shares, voter MAC parameters), and
nothing secret is ever posted.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..codec import Reader, pack_bytes, pack_str, pack_u32
from ..groups import (
    Ciphertext,
    GroupProfile,
    PROFILES,
    PedersenParams,
    commit as pedersen_commit,
    ct_exp,
    ct_mul,
    decode_limb,
    encode_vote,
    encrypt,
    limb_count,
    limbs_to_scalar,
    mac_compute,
    rerandomize,
    scalar_to_limbs,
)
from ..mixnet import shuffle as mix_shuffle, mix_verify
from ..pep import pep_run
from ..threshold import DkgTranscript, combine, dkg_run, partial_decrypt
from ..wbb import Board, DuplicateKeyError
from ..zkp import PokCiphertext, enc_prove, pok_prove, pok_verify
from . import records as rec
from .channel import DELIVERED, SUBSTITUTED
from .config import ConfigError, ElectionConfig
from .papers import DoubleEnvelope, IdentityPaper, PaperFormatError, VotePaper

# the four MAC parameters, in limb-encoding order
PARAM_FIELDS = ("mac_slope", "mac_intercept", "slope_blinding", "intercept_blinding")


class ProtocolError(Exception):
    pass


class SetupError(ProtocolError):
    pass


class CastError(ProtocolError):
    pass


class TallyError(ProtocolError):
    pass


# -- proof contexts, shared with the verify module -----------------------------


def ctx_cast(h: bytes, voter_id: str, which: str) -> bytes:
    return h + b"|cast-" + which.encode() + b"|" + voter_id.encode()


def ctx_limb(h: bytes, index: int) -> bytes:
    # deliberately voter-independent: by verification time the identity
    # paper is destroyed, so there is nothing to bind to
    return h + b"|eparams|" + str(index).encode()


def ctx_rejected(h: bytes, key: str) -> bytes:
    return h + b"|rejected|" + key.encode()


def ctx_mix_input(h: bytes, row: int) -> bytes:
    return h + b"|mix-input|" + str(row).encode()


def ctx_open(h: bytes, row: int, cell: str) -> bytes:
    return h + b"|open|" + f"{row}|{cell}".encode()


def ctx_pep(h: bytes, voter_id: str, which: str) -> bytes:
    return h + b"|pep-" + which.encode() + b"|" + voter_id.encode()


def ctx_tally(h: bytes, row: int) -> bytes:
    return h + b"|tally|" + str(row).encode()


# -- shared election state ------------------------------------------------------


@dataclass
class ElectionContext:
    grp: GroupProfile
    config: ElectionConfig
    board: Board
    pedersen: PedersenParams
    dkg: DkgTranscript
    election_hash: bytes

    @property
    def pk(self):
        return self.dkg.public_key(self.grp)

    def share_keys(self) -> dict:
        return self.dkg.share_keys(self.grp)

    def roll_element(self, index: int):
        return self.grp.gpow(index)

    @classmethod
    def from_board(cls, board: Board) -> "ElectionContext":
        entry = board.get(rec.LIST_PARAMS, rec.KEY_CONFIG)
        if entry is None:
            raise ProtocolError("board has no election configuration")
        config = ElectionConfig.from_bytes(entry.payload)
        grp = PROFILES[config.profile]
        dkg_entry = board.get(rec.LIST_PARAMS, rec.KEY_DKG)
        ped_entry = board.get(rec.LIST_PARAMS, rec.KEY_PEDERSEN)
        if dkg_entry is None or ped_entry is None:
            raise ProtocolError("board is missing key or commitment parameters")
        dkg = DkgTranscript.from_bytes(grp, dkg_entry.payload)
        pedersen = rec.parse_pedersen(grp, ped_entry.payload)
        return cls(grp, config, board, pedersen, dkg, config.election_hash())


@dataclass
class SetupResult:
    context: ElectionContext
    trustee_keys: list
    envelopes: dict  # voter id -> DoubleEnvelope


def setup(config: ElectionConfig, rng, writer_auth=None) -> SetupResult:
    grp = PROFILES[config.profile]
    board = Board(writer_auth)
    board.post(rec.LIST_PARAMS, rec.KEY_CONFIG, config.to_bytes())
    transcript, trustee_keys = dkg_run(grp, config.trustees, config.threshold, rng)
    board.post(rec.LIST_PARAMS, rec.KEY_DKG, transcript.to_bytes(grp))
    election_hash = config.election_hash()
    pedersen = PedersenParams.derive(grp, b"mailvote-pedersen-v1" + election_hash)
    board.post(rec.LIST_PARAMS, rec.KEY_PEDERSEN, rec.pedersen_payload(grp, pedersen))
    for index, voter_id in enumerate(config.roll):
        board.post(rec.LIST_ROLL, voter_id, rec.roll_payload(index))
    ctx = ElectionContext(grp, config, board, pedersen, transcript, election_hash)
    pk = ctx.pk
    envelopes = {}
    for index, voter_id in enumerate(config.roll):
        e_id = encrypt(grp, pk, grp.gpow(index), grp.random_scalar(rng))
        envelopes[voter_id] = DoubleEnvelope(voter_id, e_id)
    return SetupResult(ctx, trustee_keys, envelopes)


# -- casting --------------------------------------------------------------------


@dataclass(frozen=True)
class CastSubmission:
    """What the device sends to the election commission."""

    voter_id: str
    e_mac: Ciphertext
    e_vote: Ciphertext
    pok_mac: PokCiphertext
    pok_vote: PokCiphertext

    def to_bytes(self, grp) -> bytes:
        return (
            pack_str(self.voter_id)
            + self.e_mac.to_bytes(grp)
            + self.e_vote.to_bytes(grp)
            + self.pok_mac.to_bytes(grp)
            + self.pok_vote.to_bytes(grp)
        )

    @classmethod
    def from_bytes(cls, grp, data: bytes) -> "CastSubmission":
        rd = Reader(data)
        voter_id = rd.str_()
        e_mac = Ciphertext.from_reader(grp, rd)
        e_vote = Ciphertext.from_reader(grp, rd)
        pok_mac = PokCiphertext.from_reader(grp, rd)
        pok_vote = PokCiphertext.from_reader(grp, rd)
        rd.done()
        return cls(voter_id, e_mac, e_vote, pok_mac, pok_vote)


@dataclass
class CastView:
    """Everything the voter's device knows after casting.

    This is the voter's private transcript: it never reaches the board, and
    the receipt-freeness simulator rewrites exactly its vote-dependent
    fields. Field order matters because views are compared structurally.
    """

    voter_id: str
    selection: str
    vote_index: int
    mac: int
    mac_slope: int
    mac_intercept: int
    slope_blinding: int
    intercept_blinding: int
    vote_randomness: int
    mac_randomness: int
    e_vote: Ciphertext
    e_mac: Ciphertext
    pok_vote: PokCiphertext
    pok_mac: PokCiphertext
    param_cts: tuple
    param_randomness: tuple
    param_proofs: tuple
    vote_paper_payload: bytes
    identity_paper_payload: bytes

    def fields(self, grp) -> list[tuple[str, bytes]]:
        el, sc = grp.element_bytes, grp.scalar_bytes
        return [
            ("voter-id", self.voter_id.encode()),
            ("selection", self.selection.encode()),
            ("vote-index", pack_u32(self.vote_index)),
            ("mac", sc(self.mac)),
            ("mac-slope", sc(self.mac_slope)),
            ("mac-intercept", sc(self.mac_intercept)),
            ("slope-blinding", sc(self.slope_blinding)),
            ("intercept-blinding", sc(self.intercept_blinding)),
            ("vote-randomness", sc(self.vote_randomness)),
            ("mac-randomness", sc(self.mac_randomness)),
            ("e-vote", self.e_vote.to_bytes(grp)),
            ("e-mac", self.e_mac.to_bytes(grp)),
            ("pok-vote", self.pok_vote.to_bytes(grp)),
            ("pok-mac", self.pok_mac.to_bytes(grp)),
            ("param-cts", b"".join(c.to_bytes(grp) for c in self.param_cts)),
            ("param-randomness", b"".join(sc(r) for r in self.param_randomness)),
            ("param-proofs", b"".join(p.to_bytes(grp) for p in self.param_proofs)),
            ("vote-paper", self.vote_paper_payload),
            ("identity-paper", self.identity_paper_payload),
        ]

    def to_bytes(self, grp) -> bytes:
        out = []
        for name, value in self.fields(grp):
            out.append(pack_str(name) + pack_bytes(value))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, grp, data: bytes) -> "CastView":
        rd = Reader(data)
        raw: dict[str, bytes] = {}
        while rd.pos < len(data):
            name = rd.str_()
            raw[name] = rd.bytes_()

        def scalars(blob: bytes):
            r = Reader(blob)
            out = []
            while r.pos < len(blob):
                out.append(grp.scalar_from_bytes(r.raw(grp.scalar_len)))
            return tuple(out)

        def cts(blob: bytes):
            r = Reader(blob)
            out = []
            while r.pos < len(blob):
                out.append(Ciphertext.from_reader(grp, r))
            return tuple(out)

        def poks(blob: bytes):
            r = Reader(blob)
            out = []
            while r.pos < len(blob):
                out.append(PokCiphertext.from_reader(grp, r))
            return tuple(out)

        def one(blob, fn):
            (value,) = fn(blob)
            return value

        return cls(
            voter_id=raw["voter-id"].decode(),
            selection=raw["selection"].decode(),
            vote_index=Reader(raw["vote-index"]).u32(),
            mac=one(raw["mac"], scalars),
            mac_slope=one(raw["mac-slope"], scalars),
            mac_intercept=one(raw["mac-intercept"], scalars),
            slope_blinding=one(raw["slope-blinding"], scalars),
            intercept_blinding=one(raw["intercept-blinding"], scalars),
            vote_randomness=one(raw["vote-randomness"], scalars),
            mac_randomness=one(raw["mac-randomness"], scalars),
            e_vote=one(raw["e-vote"], cts),
            e_mac=one(raw["e-mac"], cts),
            pok_vote=one(raw["pok-vote"], poks),
            pok_mac=one(raw["pok-mac"], poks),
            param_cts=cts(raw["param-cts"]),
            param_randomness=scalars(raw["param-randomness"]),
            param_proofs=poks(raw["param-proofs"]),
            vote_paper_payload=raw["vote-paper"],
            identity_paper_payload=raw["identity-paper"],
        )


@dataclass
class PendingCast:
    voter_id: str
    selection: str
    vote_index: int
    mac: int
    secrets: tuple  # (a, b, r_a, r_b)
    vote_randomness: int
    mac_randomness: int
    submission: CastSubmission


@dataclass
class CastResult:
    view: CastView
    vote_paper: VotePaper
    identity_paper: IdentityPaper
    receipt: str  # the voter id, checked against the accepted list later


def cast_begin(ctx: ElectionContext, voter_id: str, selection: str, rng) -> PendingCast:
    """Device half one: sample secrets, register commitments, submit."""
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash
    try:
        ctx.config.roll_index(voter_id)
        vote_index = ctx.config.vote_index(selection)
    except ConfigError as exc:
        raise CastError(str(exc)) from None
    a, b, r_a, r_b = (grp.random_scalar(rng) for _ in range(4))
    mac = mac_compute(grp.q, a, b, vote_index)
    r_vote = grp.random_scalar(rng)
    r_mac = grp.random_scalar(rng)
    e_vote = encrypt(grp, pk, encode_vote(grp, vote_index), r_vote)
    e_mac = encrypt(grp, pk, grp.gpow(mac), r_mac)
    c_a = pedersen_commit(grp, ctx.pedersen, a, r_a)
    c_b = pedersen_commit(grp, ctx.pedersen, b, r_b)
    try:
        ctx.board.post(
            rec.LIST_REGISTERED, voter_id, rec.registered_payload(grp, c_a, c_b)
        )
    except DuplicateKeyError:
        raise CastError(f"{voter_id} is already registered") from None
    pok_mac = pok_prove(grp, pk, e_mac, mac, r_mac, ctx_cast(h, voter_id, "mac"), rng)
    pok_vote = pok_prove(
        grp, pk, e_vote, vote_index, r_vote, ctx_cast(h, voter_id, "vote"), rng
    )
    submission = CastSubmission(voter_id, e_mac, e_vote, pok_mac, pok_vote)
    return PendingCast(
        voter_id, selection, vote_index, mac, (a, b, r_a, r_b), r_vote, r_mac,
        submission,
    )


def ec_commit(ctx: ElectionContext, submission: CastSubmission, rng):
    """Commission half: check the submission, post the rerandomized pair.

    Returns (entry, "") on success or (None, reason); a bad submission is
    dropped, never posted.
    """
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash
    voter_id = submission.voter_id
    if not ctx.board.has(rec.LIST_ROLL, voter_id):
        return None, "not-on-roll"
    if ctx.board.has(rec.LIST_COMMIT, voter_id):
        return None, "duplicate"
    if not pok_verify(
        grp, pk, submission.e_mac, submission.pok_mac, ctx_cast(h, voter_id, "mac")
    ):
        return None, "bad-mac-proof"
    if not pok_verify(
        grp, pk, submission.e_vote, submission.pok_vote, ctx_cast(h, voter_id, "vote")
    ):
        return None, "bad-vote-proof"
    e_mac = rerandomize(grp, pk, submission.e_mac, grp.random_scalar(rng))
    e_vote = rerandomize(grp, pk, submission.e_vote, grp.random_scalar(rng))
    entry = ctx.board.post(
        rec.LIST_COMMIT, voter_id, rec.commit_payload(grp, e_mac, e_vote)
    )
    return entry, ""


def cast_finish(ctx: ElectionContext, pending: PendingCast, rng) -> CastResult:
    """Device half two: see the commitment appear, then print the papers."""
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash
    if not ctx.board.has(rec.LIST_COMMIT, pending.voter_id):
        raise CastError("commitment never appeared on the board")
    count = limb_count(grp)
    param_cts, param_rand, param_proofs = [], [], []
    for pos, secret in enumerate(pending.secrets):
        for limb_pos, limb in enumerate(scalar_to_limbs(grp, secret)):
            index = pos * count + limb_pos
            r = grp.random_scalar(rng)
            c = encrypt(grp, pk, grp.gpow(limb), r)
            param_cts.append(c)
            param_rand.append(r)
            param_proofs.append(pok_prove(grp, pk, c, limb, r, ctx_limb(h, index), rng))
    vote_paper = VotePaper(
        h, pending.vote_index, pending.selection, tuple(param_cts), tuple(param_proofs)
    )
    identity_paper = IdentityPaper(h, pending.voter_id)
    a, b, r_a, r_b = pending.secrets
    view = CastView(
        voter_id=pending.voter_id,
        selection=pending.selection,
        vote_index=pending.vote_index,
        mac=pending.mac,
        mac_slope=a,
        mac_intercept=b,
        slope_blinding=r_a,
        intercept_blinding=r_b,
        vote_randomness=pending.vote_randomness,
        mac_randomness=pending.mac_randomness,
        e_vote=pending.submission.e_vote,
        e_mac=pending.submission.e_mac,
        pok_vote=pending.submission.pok_vote,
        pok_mac=pending.submission.pok_mac,
        param_cts=tuple(param_cts),
        param_randomness=tuple(param_rand),
        param_proofs=tuple(param_proofs),
        vote_paper_payload=vote_paper.payload(grp),
        identity_paper_payload=identity_paper.payload(),
    )
    return CastResult(view, vote_paper, identity_paper, pending.voter_id)


def cast(ctx: ElectionContext, voter_id: str, selection: str, rng) -> CastResult:
    pending = cast_begin(ctx, voter_id, selection, rng)
    entry, reason = ec_commit(ctx, pending.submission, rng)
    if entry is None:
        raise CastError(f"commission refused the submission: {reason}")
    return cast_finish(ctx, pending, rng)


# -- receiving ------------------------------------------------------------------


@dataclass
class JoinedBallot:
    """A ballot after the identity paper is destroyed.

    Deliberately carries no voter id; only the encrypted identity from the
    double envelope survives the join.
    """

    vote_index: int
    vote_string: str
    encrypted_id: Ciphertext
    param_cts: tuple
    param_proofs: tuple


@dataclass
class ReceiveReport:
    received: int = 0
    rejected: list = field(default_factory=list)  # (who, reason)
    paper_tally: Counter = field(default_factory=Counter)
    log: list = field(default_factory=list)


def process_votes(ctx: ElectionContext, pieces, envelopes, rng) -> ReceiveReport:
    """Receiving desk: roll-check, join, destroy, shuffle, verify, post."""
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash
    report = ReceiveReport()
    expected_limbs = 4 * limb_count(grp)

    def reject_plain(voter_id: str, reason: str):
        key = f"x{len(ctx.board.read(rec.LIST_REJECTED))}"
        ctx.board.post(
            rec.LIST_REJECTED, key, rec.rejected_id_payload(voter_id, reason)
        )
        report.rejected.append((voter_id, reason))
        report.log.append(f"rejected {voter_id}: {reason}")

    joined = []
    for piece in pieces:
        if piece.state not in (DELIVERED, SUBSTITUTED):
            continue
        try:
            identity = IdentityPaper.parse(piece.identity_payload)
        except PaperFormatError:
            reject_plain(piece.outer_id, "unreadable-identity-paper")
            continue
        voter_id = identity.voter_id
        if identity.election_hash != h or voter_id != piece.outer_id:
            reject_plain(piece.outer_id, "identity-mismatch")
            continue
        if not ctx.board.has(rec.LIST_ROLL, voter_id):
            reject_plain(voter_id, "not-on-roll")
            continue
        try:
            paper = VotePaper.parse(grp, piece.vote_payload)
        except PaperFormatError:
            reject_plain(voter_id, "unreadable-ballot-paper")
            continue
        if paper.election_hash != h:
            reject_plain(voter_id, "wrong-election")
            continue
        if (
            paper.vote_index >= len(ctx.config.selections)
            or ctx.config.selections[paper.vote_index] != paper.vote_string
        ):
            reject_plain(voter_id, "invalid-vote")
            continue
        if len(paper.param_cts) != expected_limbs:
            reject_plain(voter_id, "malformed-parameters")
            continue
        envelope = envelopes.get(voter_id)
        if envelope is None:
            reject_plain(voter_id, "no-double-envelope")
            continue
        # the paper pile is counted here: these are the physically valid
        # ballots a manual recount would see
        report.paper_tally[paper.vote_string] += 1
        joined.append(
            JoinedBallot(
                paper.vote_index,
                paper.vote_string,
                envelope.encrypted_id,
                paper.param_cts,
                paper.proofs,
            )
        )
        report.log.append(f"joined ballot from {voter_id}; identity paper destroyed")

    order = rng.permutation(len(joined))
    for ballot in (joined[i] for i in order):
        ok = all(
            pok_verify(grp, pk, c, proof, ctx_limb(h, i))
            for i, (c, proof) in enumerate(zip(ballot.param_cts, ballot.param_proofs))
        )
        if not ok:
            key = f"x{len(ctx.board.read(rec.LIST_REJECTED))}"
            ctx.board.post(
                rec.LIST_REJECTED,
                key,
                rec.rejected_ct_payload(grp, ballot.encrypted_id, "bad-param-proof"),
            )
            report.rejected.append((None, "bad-param-proof"))
            report.log.append("rejected anonymous ballot: bad-param-proof")
            continue
        fresh = [
            rerandomize(grp, pk, c, grp.random_scalar(rng)) for c in ballot.param_cts
        ]
        key = f"b{report.received}"
        ctx.board.post(
            rec.LIST_RECEIVED,
            key,
            rec.received_payload(grp, ballot.vote_index, ballot.vote_string,
                                 ballot.encrypted_id, fresh),
        )
        report.received += 1
    return report


# -- tallying -------------------------------------------------------------------


@dataclass
class TallyReport:
    accepted: list = field(default_factory=list)  # voter ids
    skips: list = field(default_factory=list)  # (row index, voter id | None, reason)
    tally: Counter = field(default_factory=Counter)  # selection string -> count
    log: list = field(default_factory=list)


def _decrypt_cell(ctx, trustee_keys, share_keys, ct, context, rng):
    partials = [
        partial_decrypt(ctx.grp, key, ct, context, rng)
        for key in trustee_keys[: ctx.config.threshold]
    ]
    return combine(ctx.grp, ct, partials, share_keys, ctx.config.threshold, context)


def tally(ctx: ElectionContext, trustee_keys, rng, workers: int = 1) -> TallyReport:
    grp, pk, h = ctx.grp, ctx.pk, ctx.election_hash
    board, config = ctx.board, ctx.config
    share_keys = ctx.share_keys()
    k = config.threshold
    if len(trustee_keys) < k:
        raise TallyError(f"need at least {k} trustee keys")
    report = TallyReport()
    roll_lookup = {grp.gpow(i): i for i in range(len(config.roll))}

    # normalize ciphertext-form rejections so the join can exclude them
    rejected_indices = set()
    for entry in board.read(rec.LIST_REJECTED):
        form, who, _reason = rec.parse_rejected(grp, entry.payload)
        if form == "id":
            if board.has(rec.LIST_ROLL, who):
                rejected_indices.add(config.roll_index(who))
            continue
        context = ctx_rejected(h, entry.key)
        plaintext, bundle = _decrypt_cell(ctx, trustee_keys, share_keys, who, context, rng)
        index = roll_lookup.get(plaintext)
        board.post(
            rec.LIST_REJECTED_OPEN, entry.key, rec.rejected_open_payload(grp, index, bundle)
        )
        if index is not None:
            rejected_indices.add(index)

    # first mix: plaintext votes get fresh encryptions, then every row is
    # shuffled and rerandomized through the staged mixnet
    received = []
    for entry in board.read(rec.LIST_RECEIVED):
        received.append(rec.parse_received(grp, entry.payload))
    input_rows = []
    for i, (vote_index, _vs, e_id, limbs) in enumerate(received):
        r = grp.random_scalar(rng)
        vote_ct = encrypt(grp, pk, encode_vote(grp, vote_index), r)
        proof = enc_prove(grp, pk, vote_ct, vote_index, r, ctx_mix_input(h, i), rng)
        row = (vote_ct, e_id, *limbs)
        input_rows.append(row)
        board.post(rec.LIST_MIXED, f"input-{i}", rec.mix_input_payload(grp, row, proof))
    current = input_rows
    for stage in range(config.mix_stages):
        rows_out, proof = mix_shuffle(grp, pk, current, rng, workers)
        if not mix_verify(grp, pk, current, rows_out, proof, workers):
            raise TallyError(f"own mix stage {stage} failed verification")
        board.post(rec.LIST_MIXED, f"stage-{stage}", rec.stage_payload(grp, rows_out, proof))
        current = rows_out
    mixed_rows = current

    # open the mixed rows: limbs back to scalars, identities back to the roll
    n_limbs = limb_count(grp)
    opened = []
    for i, row in enumerate(mixed_rows):
        bundles = []
        scalars = []
        params_ok = True
        for pos in range(4):
            limbs = []
            for limb_pos in range(n_limbs):
                cell = row[2 + pos * n_limbs + limb_pos]
                context = ctx_open(h, i, str(pos * n_limbs + limb_pos))
                pt, bundle = _decrypt_cell(ctx, trustee_keys, share_keys, cell, context, rng)
                bundles.append(bundle)
                if params_ok:
                    try:
                        limbs.append(decode_limb(grp, pt))
                    except ValueError:
                        params_ok = False
            if params_ok:
                try:
                    scalars.append(limbs_to_scalar(grp, limbs))
                except ValueError:
                    params_ok = False
        if not params_ok:
            scalars = [0, 0, 0, 0]
        id_pt, id_bundle = _decrypt_cell(
            ctx, trustee_keys, share_keys, row[1], ctx_open(h, i, "id"), rng
        )
        bundles.append(id_bundle)
        id_index = roll_lookup.get(id_pt)
        board.post(
            rec.LIST_OPENED,
            f"row-{i}",
            rec.opened_payload(grp, params_ok, scalars, id_index, bundles),
        )
        opened.append((i, params_ok, scalars, id_index))

    # join openings to registered commitments; uniqueness is strict
    by_id: dict[int, list] = {}
    for row_index, params_ok, scalars, id_index in opened:
        if id_index is None:
            report.skips.append((row_index, None, "unknown-identity"))
            continue
        by_id.setdefault(id_index, []).append((row_index, params_ok, scalars))
    accepted_rows = []
    for id_index in sorted(by_id):
        rows = by_id[id_index]
        voter_id = config.roll[id_index]
        if len(rows) > 1:
            for row_index, _, _ in rows:
                report.skips.append((row_index, voter_id, "duplicate-identity"))
            report.log.append(f"{voter_id}: multiple openings, all excluded")
            continue
        row_index, params_ok, scalars = rows[0]
        if id_index in rejected_indices:
            report.skips.append((row_index, voter_id, "previously-rejected"))
            continue
        if not params_ok:
            report.skips.append((row_index, voter_id, "undecodable-parameters"))
            report.log.append(f"{voter_id}: parameter limbs do not decode")
            continue
        reg = board.get(rec.LIST_REGISTERED, voter_id)
        com = board.get(rec.LIST_COMMIT, voter_id)
        if reg is None or com is None:
            report.skips.append((row_index, voter_id, "not-registered"))
            continue
        c_a, c_b = rec.parse_registered(grp, reg.payload)
        a, b, r_a, r_b = scalars
        if (
            pedersen_commit(grp, ctx.pedersen, a, r_a) != c_a
            or pedersen_commit(grp, ctx.pedersen, b, r_b) != c_b
        ):
            report.skips.append((row_index, voter_id, "opening-mismatch"))
            report.log.append(f"{voter_id}: commitment openings do not match")
            continue
        accepted_rows.append((id_index, voter_id, row_index, scalars, com))

    # plaintext-equivalence checks tie the mixed ballot to the commitment
    accepted = []
    for _idx, voter_id, row_index, scalars, com in accepted_rows:
        a, b = scalars[0], scalars[1]
        e_mac_c, e_vote_c = rec.parse_commit(grp, com.payload)
        vote_cell = mixed_rows[row_index][0]
        judgement = pep_run(
            grp, vote_cell, e_vote_c, trustee_keys, share_keys, k,
            ctx_pep(h, voter_id, "vote"), rng,
        )
        board.post(
            rec.LIST_PEP, f"{voter_id}:vote", rec.pep_payload(grp, row_index, judgement)
        )
        if not judgement.equal:
            report.skips.append((row_index, voter_id, "vote-mismatch"))
            report.log.append(f"{voter_id}: mailed vote disagrees with commitment")
            continue
        expected_mac = ct_mul(
            grp, ct_exp(grp, e_vote_c, a), encrypt(grp, pk, grp.gpow(b), 0)
        )
        judgement = pep_run(
            grp, expected_mac, e_mac_c, trustee_keys, share_keys, k,
            ctx_pep(h, voter_id, "mac"), rng,
        )
        board.post(
            rec.LIST_PEP, f"{voter_id}:mac", rec.pep_payload(grp, row_index, judgement)
        )
        if not judgement.equal:
            report.skips.append((row_index, voter_id, "mac-mismatch"))
            report.log.append(f"{voter_id}: authenticator disagrees with commitment")
            continue
        board.post(
            rec.LIST_ACCEPTED, voter_id, rec.accepted_payload(grp, row_index, e_vote_c)
        )
        accepted.append((voter_id, e_vote_c))
        report.accepted.append(voter_id)

    # final mix over the accepted votes, then decrypt the tally
    final_rows = [(e_vote,) for _vid, e_vote in accepted]
    for stage in range(config.mix_stages):
        rows_out, proof = mix_shuffle(grp, pk, final_rows, rng, workers)
        if not mix_verify(grp, pk, final_rows, rows_out, proof, workers):
            raise TallyError(f"own final mix stage {stage} failed verification")
        board.post(rec.LIST_FINAL, f"stage-{stage}", rec.stage_payload(grp, rows_out, proof))
        final_rows = rows_out
    for i, row in enumerate(final_rows):
        pt, bundle = _decrypt_cell(ctx, trustee_keys, share_keys, row[0], ctx_tally(h, i), rng)
        try:
            vote_index = grp.dlog(pt, len(config.selections))
        except ValueError:
            raise TallyError(f"tally row {i} decrypts outside the ballot") from None
        board.post(rec.LIST_TALLY, f"t-{i}", rec.tally_payload(grp, vote_index, bundle))
        report.tally[config.selections[vote_index]] += 1
    board.seal()
    return report
