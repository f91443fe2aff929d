"""Verification: per-voter checks, the global audit, and the result rule.

Everything here reads only the bulletin board. The global audit re-derives
the tally's every claim: mix proofs, decryption bundles, equivalence
judgements, commitment openings, uniqueness, and list consistency, in a
fixed order so a failure names the first broken fact.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..groups import (
    commit as pedersen_commit,
    ct_exp,
    ct_mul,
    decode_limb,
    encrypt,
    limb_count,
    limbs_to_scalar,
    PedersenParams,
)
from ..mixnet import mix_verify
from ..pep import pep_verify
from ..wbb import Board
from ..zkp import enc_verify
from . import records as rec
from .engine import (
    ElectionContext,
    ProtocolError,
    ctx_limb,
    ctx_mix_input,
    ctx_open,
    ctx_pep,
    ctx_rejected,
    ctx_tally,
)
from .papers import IdentityPaper, PaperFormatError, VotePaper


class CheckFailure(Exception):
    pass


@dataclass
class VerifyReport:
    ok: bool
    failed: str | None
    detail: str
    checks: list


@dataclass
class DiscrepancyReport:
    epsilon: int
    registered_ids: frozenset
    received_ids: frozenset
    tally_ids: frozenset


@dataclass
class ElectionOutcome:
    paper_tally: dict
    board_tally: dict
    margin: float
    epsilon: int
    error_tolerance: int
    required_verifiers: float
    global_ok: bool
    verdict: dict | None
    reason: str

    def to_text(self) -> str:
        def fmt(tally: dict) -> str:
            if not tally:
                return "(empty)"
            return ", ".join(f"{sel}={n}" for sel, n in sorted(tally.items()))

        lines = [
            f"verdict: {'accepted' if self.verdict is not None else 'rejected'}",
            f"paper-outcome: {fmt(self.paper_tally)}",
            f"board-tally: {fmt(self.board_tally)}",
            f"discrepancy: {self.epsilon}",
            f"error-tolerance: {self.error_tolerance}",
            f"margin: {self.margin:g}",
            f"required-verifiers: {self.required_verifiers:g}",
            f"global-verify: {'pass' if self.global_ok else 'fail'}",
        ]
        if self.reason:
            lines.append(f"reason: {self.reason}")
        return "\n".join(lines) + "\n"


def voter_verify(board: Board, view) -> tuple[bool, str]:
    """The voter's own check: papers said what I meant, and I was accepted."""
    ctx = ElectionContext.from_board(board)
    try:
        paper = VotePaper.parse(ctx.grp, view.vote_paper_payload)
        identity = IdentityPaper.parse(view.identity_paper_payload)
    except PaperFormatError:
        return False, "paper-mismatch"
    if (
        paper.vote_string != view.selection
        or paper.vote_index != view.vote_index
        or paper.election_hash != ctx.election_hash
        or identity.voter_id != view.voter_id
        or identity.election_hash != ctx.election_hash
    ):
        return False, "paper-mismatch"
    if board.get(rec.LIST_ACCEPTED, view.voter_id) is None:
        return False, "not-accepted"
    return True, ""


class _Audit:
    """Holds parsed board state while the ordered checks run."""

    def __init__(self, board: Board, workers: int):
        self.board = board
        self.workers = workers

    # each check_* method raises CheckFailure; order is fixed below

    def check_parameters(self):
        try:
            self.ctx = ElectionContext.from_board(self.board)
        except (ProtocolError, ValueError) as exc:
            raise CheckFailure(f"parameters do not parse: {exc}") from None
        ctx = self.ctx
        self.grp, self.config, self.h = ctx.grp, ctx.config, ctx.election_hash
        self.pk = ctx.pk
        self.share_keys = ctx.share_keys()
        self.k = self.config.threshold
        if ctx.dkg.n != self.config.trustees or ctx.dkg.k != self.config.threshold:
            raise CheckFailure("key transcript disagrees with the configuration")
        expected = PedersenParams.derive(
            self.grp, b"mailvote-pedersen-v1" + self.h
        )
        if (expected.h1, expected.h2) != (ctx.pedersen.h1, ctx.pedersen.h2):
            raise CheckFailure("commitment generators are not the derived ones")
        roll_entries = self.board.read(rec.LIST_ROLL)
        if tuple(e.key for e in roll_entries) != tuple(self.config.roll):
            raise CheckFailure("roll does not match the configuration")
        for i, entry in enumerate(roll_entries):
            if rec.parse_roll(entry.payload) != i:
                raise CheckFailure(f"roll index for {entry.key} is wrong")

    def check_registration(self):
        self.registered = {}
        for entry in self.board.read(rec.LIST_REGISTERED):
            if not self.board.has(rec.LIST_ROLL, entry.key):
                raise CheckFailure(f"registered id {entry.key!r} is not on the roll")
            try:
                self.registered[entry.key] = rec.parse_registered(self.grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"registered entry {entry.key}: {exc}") from None
        self.commits = {}
        for entry in self.board.read(rec.LIST_COMMIT):
            if not self.board.has(rec.LIST_ROLL, entry.key):
                raise CheckFailure(f"commit id {entry.key!r} is not on the roll")
            try:
                self.commits[entry.key] = rec.parse_commit(self.grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"commit entry {entry.key}: {exc}") from None

    def check_received_format(self):
        self.received = []
        for entry in self.board.read(rec.LIST_RECEIVED):
            try:
                row = rec.parse_received(self.grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"received entry {entry.key}: {exc}") from None
            vote_index, vote_string, _e_id, limbs = row
            if vote_index >= len(self.config.selections):
                raise CheckFailure(f"received entry {entry.key}: vote index out of range")
            if self.config.selections[vote_index] != vote_string:
                raise CheckFailure(f"received entry {entry.key}: selection text mismatch")
            if len(limbs) != 4 * limb_count(self.grp):
                raise CheckFailure(f"received entry {entry.key}: wrong parameter count")
            self.received.append(row)

    def check_rejected(self):
        grp, h = self.grp, self.h
        opens = {e.key: e for e in self.board.read(rec.LIST_REJECTED_OPEN)}
        roll_elements = {grp.gpow(i): i for i in range(len(self.config.roll))}
        self.rejected_indices = set()
        self.rejected_synthetic = 0
        seen_ct_keys = set()
        for entry in self.board.read(rec.LIST_REJECTED):
            try:
                form, who, _reason = rec.parse_rejected(grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"rejected entry {entry.key}: {exc}") from None
            if form == "id":
                if self.board.has(rec.LIST_ROLL, who):
                    self.rejected_indices.add(self.config.roll_index(who))
                else:
                    self.rejected_synthetic += 1
                continue
            seen_ct_keys.add(entry.key)
            opened = opens.get(entry.key)
            if opened is None:
                raise CheckFailure(f"rejected entry {entry.key} was never opened")
            index, bundle = rec.parse_rejected_open(grp, opened.payload)
            if not bundle.verify(
                grp, who, self.share_keys, self.k, ctx_rejected(h, entry.key)
            ):
                raise CheckFailure(f"rejected entry {entry.key}: bad decryption bundle")
            if index is None:
                if bundle.plaintext in roll_elements:
                    raise CheckFailure(
                        f"rejected entry {entry.key}: identity wrongly marked unknown"
                    )
                self.rejected_synthetic += 1
            else:
                if index >= len(self.config.roll) or bundle.plaintext != grp.gpow(index):
                    raise CheckFailure(f"rejected entry {entry.key}: claimed identity wrong")
                self.rejected_indices.add(index)
        if set(opens) - seen_ct_keys:
            raise CheckFailure("rejected-open entry without a matching rejection")

    def check_mix_input(self):
        grp, pk, h = self.grp, self.pk, self.h
        entries = {e.key: e for e in self.board.read(rec.LIST_MIXED)}
        self.stage_entries = {}
        input_entries = {}
        for key, entry in entries.items():
            if key.startswith("input-"):
                input_entries[key] = entry
            elif key.startswith("stage-"):
                self.stage_entries[key] = entry
            else:
                raise CheckFailure(f"unexpected mix entry {key!r}")
        if len(input_entries) != len(self.received):
            raise CheckFailure("mix input count disagrees with received count")
        self.input_rows = []
        for i, (vote_index, _vs, e_id, limbs) in enumerate(self.received):
            entry = input_entries.get(f"input-{i}")
            if entry is None:
                raise CheckFailure(f"mix input row {i} is missing")
            try:
                row, proof = rec.parse_mix_input(grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"mix input row {i}: {exc}") from None
            if len(row) != 2 + len(limbs):
                raise CheckFailure(f"mix input row {i}: wrong width")
            if row[1] != e_id or list(row[2:]) != list(limbs):
                raise CheckFailure(f"mix input row {i} disagrees with the received entry")
            if not enc_verify(grp, pk, row[0], vote_index, proof, ctx_mix_input(h, i)):
                raise CheckFailure(f"mix input row {i}: vote encryption proof fails")
            self.input_rows.append(row)

    def check_mix_stages(self):
        grp, pk = self.grp, self.pk
        stages = self.config.mix_stages
        if set(self.stage_entries) != {f"stage-{s}" for s in range(stages)}:
            raise CheckFailure("mix stages present do not match the configuration")
        current = self.input_rows
        for s in range(stages):
            try:
                rows, proof = rec.parse_stage(grp, self.stage_entries[f"stage-{s}"].payload)
            except ValueError as exc:
                raise CheckFailure(f"mix stage {s}: {exc}") from None
            if not mix_verify(grp, pk, current, rows, proof, self.workers):
                raise CheckFailure(f"mix stage {s}: shuffle proof fails")
            current = rows
        self.mixed_rows = current

    def check_opened_rows(self):
        grp, h = self.grp, self.h
        entries = {e.key: e for e in self.board.read(rec.LIST_OPENED)}
        if len(entries) != len(self.mixed_rows):
            raise CheckFailure("opened row count disagrees with the mixed batch")
        n_limbs = limb_count(grp)
        roll_elements = {grp.gpow(i): i for i in range(len(self.config.roll))}
        self.opened = []
        for i, row in enumerate(self.mixed_rows):
            entry = entries.get(f"row-{i}")
            if entry is None:
                raise CheckFailure(f"opened row {i} is missing")
            try:
                params_ok, scalars, id_index, bundles = rec.parse_opened(grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"opened row {i}: {exc}") from None
            if len(bundles) != 4 * n_limbs + 1:
                raise CheckFailure(f"opened row {i}: wrong bundle count")
            for pos, bundle in enumerate(bundles[:-1]):
                context = ctx_open(h, i, str(pos))
                if not bundle.verify(grp, row[2 + pos], self.share_keys, self.k, context):
                    raise CheckFailure(f"opened row {i}: parameter bundle {pos} fails")
            id_bundle = bundles[-1]
            if not id_bundle.verify(
                grp, row[1], self.share_keys, self.k, ctx_open(h, i, "id")
            ):
                raise CheckFailure(f"opened row {i}: identity bundle fails")
            decoded = []
            decodable = True
            try:
                for pos in range(4):
                    limbs = [
                        decode_limb(grp, bundles[pos * n_limbs + j].plaintext)
                        for j in range(n_limbs)
                    ]
                    decoded.append(limbs_to_scalar(grp, limbs))
            except ValueError:
                decodable = False
            if params_ok:
                if not decodable or list(decoded) != list(scalars):
                    raise CheckFailure(f"opened row {i}: claimed scalars do not decode")
            elif decodable:
                raise CheckFailure(f"opened row {i}: wrongly marked undecodable")
            if id_index is None:
                if id_bundle.plaintext in roll_elements:
                    raise CheckFailure(f"opened row {i}: identity wrongly marked unknown")
            elif (
                id_index >= len(self.config.roll)
                or id_bundle.plaintext != grp.gpow(id_index)
            ):
                raise CheckFailure(f"opened row {i}: claimed identity wrong")
            self.opened.append((i, params_ok, scalars, id_index))

    def check_join(self):
        """Recompute which openings may proceed to the equivalence stage."""
        by_id: dict[int, list] = {}
        for row_index, params_ok, scalars, id_index in self.opened:
            if id_index is not None:
                by_id.setdefault(id_index, []).append((row_index, params_ok, scalars))
        self.pep_stage = {}  # voter id -> (row index, scalars)
        for id_index in sorted(by_id):
            rows = by_id[id_index]
            if len(rows) > 1 or id_index in self.rejected_indices:
                continue
            row_index, params_ok, scalars = rows[0]
            if not params_ok:
                continue
            voter_id = self.config.roll[id_index]
            reg = self.registered.get(voter_id)
            com = self.commits.get(voter_id)
            if reg is None or com is None:
                continue
            a, b, r_a, r_b = scalars
            if (
                pedersen_commit(self.grp, self.ctx.pedersen, a, r_a) != reg[0]
                or pedersen_commit(self.grp, self.ctx.pedersen, b, r_b) != reg[1]
            ):
                continue
            self.pep_stage[voter_id] = (row_index, scalars)

    def check_pep(self):
        grp, pk, h = self.grp, self.pk, self.h
        entries = {e.key: e for e in self.board.read(rec.LIST_PEP)}
        self.expected_accept = set()
        expected_keys = set()
        for voter_id, (row_index, scalars) in self.pep_stage.items():
            e_mac_c, e_vote_c = self.commits[voter_id]
            vote_key = f"{voter_id}:vote"
            expected_keys.add(vote_key)
            entry = entries.get(vote_key)
            if entry is None:
                raise CheckFailure(f"missing vote equivalence check for {voter_id}")
            claimed_row, judgement = rec.parse_pep(grp, entry.payload)
            if claimed_row != row_index:
                raise CheckFailure(f"vote equivalence for {voter_id} cites wrong row")
            left = self.mixed_rows[row_index][0]
            ok, why = pep_verify(
                grp, left, e_vote_c, judgement, self.share_keys, self.k,
                ctx_pep(h, voter_id, "vote"),
            )
            if not ok:
                raise CheckFailure(f"vote equivalence for {voter_id}: {why}")
            if not judgement.equal:
                continue
            mac_key = f"{voter_id}:mac"
            expected_keys.add(mac_key)
            entry = entries.get(mac_key)
            if entry is None:
                raise CheckFailure(f"missing authenticator check for {voter_id}")
            claimed_row, judgement = rec.parse_pep(grp, entry.payload)
            if claimed_row != row_index:
                raise CheckFailure(f"authenticator check for {voter_id} cites wrong row")
            a, b = scalars[0], scalars[1]
            left = ct_mul(grp, ct_exp(grp, e_vote_c, a), encrypt(grp, pk, grp.gpow(b), 0))
            ok, why = pep_verify(
                grp, left, e_mac_c, judgement, self.share_keys, self.k,
                ctx_pep(h, voter_id, "mac"),
            )
            if not ok:
                raise CheckFailure(f"authenticator check for {voter_id}: {why}")
            if judgement.equal:
                self.expected_accept.add(voter_id)
        if set(entries) != expected_keys:
            raise CheckFailure("equivalence checks posted do not match the join")

    def check_accepted(self):
        entries = self.board.read(rec.LIST_ACCEPTED)
        if {e.key for e in entries} != self.expected_accept:
            raise CheckFailure("accepted list disagrees with the recomputed decisions")
        self.accepted_rows = []
        for entry in entries:
            try:
                row_index, e_vote = rec.parse_accepted(self.grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"accepted entry {entry.key}: {exc}") from None
            if row_index != self.pep_stage[entry.key][0]:
                raise CheckFailure(f"accepted entry {entry.key} cites wrong row")
            if e_vote != self.commits[entry.key][1]:
                raise CheckFailure(f"accepted entry {entry.key} carries a foreign vote")
            self.accepted_rows.append((e_vote,))

    def check_final_mix(self):
        grp, pk = self.grp, self.pk
        entries = {e.key: e for e in self.board.read(rec.LIST_FINAL)}
        stages = self.config.mix_stages
        if set(entries) != {f"stage-{s}" for s in range(stages)}:
            raise CheckFailure("final mix stages do not match the configuration")
        current = self.accepted_rows
        for s in range(stages):
            try:
                rows, proof = rec.parse_stage(grp, entries[f"stage-{s}"].payload)
            except ValueError as exc:
                raise CheckFailure(f"final mix stage {s}: {exc}") from None
            if not mix_verify(grp, pk, current, rows, proof, self.workers):
                raise CheckFailure(f"final mix stage {s}: shuffle proof fails")
            current = rows
        self.final_rows = current

    def check_tally(self):
        grp, h = self.grp, self.h
        entries = {e.key: e for e in self.board.read(rec.LIST_TALLY)}
        if len(entries) != len(self.final_rows):
            raise CheckFailure("tally count disagrees with the final mix")
        self.board_tally = Counter()
        for i, row in enumerate(self.final_rows):
            entry = entries.get(f"t-{i}")
            if entry is None:
                raise CheckFailure(f"tally row {i} is missing")
            try:
                vote_index, bundle = rec.parse_tally(grp, entry.payload)
            except ValueError as exc:
                raise CheckFailure(f"tally row {i}: {exc}") from None
            if not bundle.verify(grp, row[0], self.share_keys, self.k, ctx_tally(h, i)):
                raise CheckFailure(f"tally row {i}: decryption bundle fails")
            if vote_index >= len(self.config.selections):
                raise CheckFailure(f"tally row {i}: vote index out of range")
            if bundle.plaintext != grp.gpow(vote_index):
                raise CheckFailure(f"tally row {i}: claimed vote wrong")
            self.board_tally[self.config.selections[vote_index]] += 1

    def check_membership(self):
        received_ids = {
            id_index for _i, _ok, _s, id_index in self.opened if id_index is not None
        }
        registered_ids = {self.config.roll_index(v) for v in self.registered}
        tally_ids = {self.config.roll_index(v) for v in self.expected_accept}
        if not tally_ids <= (registered_ids | received_ids):
            raise CheckFailure("a tallied identity was neither registered nor received")

    def check_sealed(self):
        if not self.board.sealed:
            raise CheckFailure("board was never sealed")


_CHECK_ORDER = (
    ("parameters", _Audit.check_parameters),
    ("registration", _Audit.check_registration),
    ("received-format", _Audit.check_received_format),
    ("rejected-consistency", _Audit.check_rejected),
    ("mix-input", _Audit.check_mix_input),
    ("mix-stages", _Audit.check_mix_stages),
    ("opened-rows", _Audit.check_opened_rows),
    ("join", _Audit.check_join),
    ("equivalence", _Audit.check_pep),
    ("accepted", _Audit.check_accepted),
    ("final-mix", _Audit.check_final_mix),
    ("tally", _Audit.check_tally),
    ("membership", _Audit.check_membership),
    ("sealed", _Audit.check_sealed),
)


def global_verify(board: Board, workers: int = 1) -> VerifyReport:
    audit = _Audit(board, workers)
    run = []
    for name, method in _CHECK_ORDER:
        run.append(name)
        try:
            method(audit)
        except CheckFailure as exc:
            return VerifyReport(False, name, str(exc), run)
    return VerifyReport(True, None, "", run)


def compute_discrepancy(board: Board) -> DiscrepancyReport:
    """Detected-error count: identities registered or received but not tallied."""
    ctx = ElectionContext.from_board(board)
    grp, config = ctx.grp, ctx.config
    registered = set()
    for entry in board.read(rec.LIST_REGISTERED):
        if board.has(rec.LIST_ROLL, entry.key):
            registered.add(config.roll_index(entry.key))
        else:
            registered.add(f"off-roll:{entry.key}")
    received = set()
    for entry in board.read(rec.LIST_OPENED):
        _ok, _scalars, id_index, _bundles = rec.parse_opened(grp, entry.payload)
        received.add(id_index if id_index is not None else f"unknown:{entry.key}")
    tally_ids = set()
    for entry in board.read(rec.LIST_ACCEPTED):
        tally_ids.add(config.roll_index(entry.key))
    epsilon = len(registered | received) - len(tally_ids)
    return DiscrepancyReport(
        epsilon, frozenset(registered), frozenset(received), frozenset(tally_ids)
    )


def _margin(config, paper_tally: dict) -> float:
    counts = sorted((paper_tally.get(s, 0) for s in config.selections), reverse=True)
    top = counts[0] if counts else 0
    runner_up = counts[1] if len(counts) > 1 else 0
    return (top - runner_up) / 2


def result(board: Board, paper_tally: dict, error_tolerance: int) -> ElectionOutcome:
    """Accept the paper outcome only if the board backs it up."""
    ctx = ElectionContext.from_board(board)
    report = global_verify(board)
    disc = compute_discrepancy(board)
    board_tally = Counter()
    for entry in board.read(rec.LIST_TALLY):
        vote_index, _bundle = rec.parse_tally(ctx.grp, entry.payload)
        if vote_index < len(ctx.config.selections):
            board_tally[ctx.config.selections[vote_index]] += 1
    margin = _margin(ctx.config, paper_tally)
    theta = len(ctx.config.roll) - (margin - error_tolerance)
    reason = ""
    if not report.ok:
        reason = f"global verification failed at {report.failed}: {report.detail}"
    elif disc.epsilon >= error_tolerance:
        reason = (
            f"{disc.epsilon} detected discrepancies, tolerance is {error_tolerance}"
        )
    verdict = dict(paper_tally) if not reason else None
    return ElectionOutcome(
        paper_tally=dict(paper_tally),
        board_tally=dict(board_tally),
        margin=margin,
        epsilon=disc.epsilon,
        error_tolerance=error_tolerance,
        required_verifiers=theta,
        global_ok=report.ok,
        verdict=verdict,
        reason=reason,
    )
