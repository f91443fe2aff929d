"""Command line for running, auditing, and benchmarking elections.

One binary, one run directory. The directory is self-describing: the board
file carries everything an auditor needs, and `audit`/`verify` read nothing
else. Mutating commands serialize on an advisory lock over the board file
and either succeed once or refuse a rerun; they never corrupt a directory.

Exit codes: 0 success or pass, 2 verification failure, 3 usage error,
4 board integrity failure.
"""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import os
import sys
import time
from collections import Counter
from pathlib import Path

from .codec import Reader, pack_list
from .groups import MAIN, encrypt
from .mixnet import mix_verify, shuffle as mix_shuffle
from .rng import Drbg
from .threshold import TrusteeKey
from .wbb import Board, BoardError, ChainError
from .protocol import (
    CastError,
    ConfigError,
    ElectionConfig,
    ElectionContext,
    ProtocolError,
    cast,
    global_verify,
    process_votes,
    result,
    setup,
    tally,
    voter_verify,
)
from .protocol.channel import DELIVERED, IN_TRANSIT, LOST, MailPiece, SUBSTITUTED
from .protocol.engine import CastView
from .protocol.papers import DoubleEnvelope, PaperFormatError, VotePaper

EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_USAGE = 3
EXIT_INTEGRITY = 4

_PIECE_STATES = (IN_TRANSIT, LOST, SUBSTITUTED)


class UsageError(Exception):
    pass


class IntegrityError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; usage failures are 3 here
    def error(self, message):
        raise UsageError(message)


class RunDir:
    """Fixed layout under one root; every command addresses files through this."""

    def __init__(self, root):
        self.root = Path(root)
        self.board = self.root / "board.txt"
        self.config = self.root / "config.txt"
        self.trustee_dir = self.root / "trustees"
        self.envelopes = self.root / "ec" / "envelopes.bin"
        self.mailbox = self.root / "mailbox"
        self.papers = self.root / "papers"
        self.views = self.root / "voters"
        self.papercount = self.root / "papercount.txt"
        self.outcome = self.root / "outcome.txt"

    def require(self) -> "RunDir":
        if not self.board.is_file():
            raise UsageError(f"{self.root} is not a run directory (no board file)")
        return self

    def ballot_paper(self, voter: str) -> Path:
        return self.papers / f"{voter}-ballot.txt"

    def identity_paper(self, voter: str) -> Path:
        return self.papers / f"{voter}-identity.txt"

    def view(self, voter: str) -> Path:
        return self.views / f"{voter}.view"

    def piece(self, voter: str) -> Path:
        return self.mailbox / f"{voter}.piece"

    def trustee_key(self, index: int) -> Path:
        return self.trustee_dir / f"trustee-{index}.key"


@contextlib.contextmanager
def board_lock(rd: RunDir):
    """Blocking advisory lock; concurrent commands on one rundir serialize."""
    with open(rd.board, "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        yield


def load_board(path) -> Board:
    try:
        return Board.load(path)
    except (BoardError, ValueError) as exc:
        raise IntegrityError(f"{path}: {exc}") from None
    except OSError as exc:
        raise UsageError(str(exc)) from None


def load_context(board: Board) -> ElectionContext:
    try:
        return ElectionContext.from_board(board)
    except (ProtocolError, ValueError) as exc:
        raise UsageError(f"board does not describe an election: {exc}") from None


def stream(args, *labels: str) -> Drbg:
    """Deterministic per-command randomness when --seed is given."""
    seed = args.seed
    if seed is None:
        seed = int.from_bytes(os.urandom(8), "big")
    tag = "|".join(labels)
    return Drbg(f"mailvote-cli|{tag}|{seed}".encode())


# -- setup ------------------------------------------------------------------------


def cmd_setup(args) -> int:
    rd = RunDir(args.rundir)
    if rd.root.exists() and any(rd.root.iterdir()):
        raise UsageError(f"{rd.root} already exists and is not empty; refusing")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(str(exc)) from None
    config = ElectionConfig.from_text(text)
    sr = setup(config, stream(args, "setup"))
    grp = sr.context.grp

    rd.root.mkdir(parents=True, exist_ok=True)
    for sub in (rd.trustee_dir, rd.envelopes.parent, rd.mailbox, rd.papers, rd.views):
        sub.mkdir(parents=True)
    rd.config.write_text(text, encoding="utf-8")
    for key in sr.trustee_keys:
        rd.trustee_key(key.index).write_text(f"{key.index} {int(key.secret):x}\n")
    envelopes = sorted(sr.envelopes.values(), key=lambda e: e.voter_id)
    rd.envelopes.write_bytes(pack_list(envelopes, lambda e: e.to_bytes(grp)))
    sr.context.board.save(rd.board)
    print(f"election initialized: {len(config.roll)} voters on the roll, "
          f"{config.trustees} trustees (threshold {config.threshold})")
    print(f"board head {sr.context.board.snapshot()[:16]}")
    return EXIT_PASS


def load_trustee_keys(rd: RunDir) -> list[TrusteeKey]:
    keys = []
    for path in sorted(rd.trustee_dir.glob("trustee-*.key")):
        index_text, _, secret_hex = path.read_text().strip().partition(" ")
        keys.append(TrusteeKey(int(index_text), int(secret_hex, 16)))
    if not keys:
        raise UsageError(f"no trustee keys under {rd.trustee_dir}")
    return sorted(keys, key=lambda k: k.index)


def load_envelopes(rd: RunDir, grp) -> dict:
    if not rd.envelopes.is_file():
        raise UsageError(f"missing {rd.envelopes}")
    rdr = Reader(rd.envelopes.read_bytes())
    envelopes = rdr.list_(lambda r: DoubleEnvelope.from_reader(grp, r))
    rdr.done()
    return {e.voter_id: e for e in envelopes}


# -- voting and the mail ------------------------------------------------------------


def cmd_vote(args) -> int:
    rd = RunDir(args.rundir).require()
    if rd.view(args.voter).exists():
        raise UsageError(f"{args.voter} already has a cast transcript; refusing")
    with board_lock(rd):
        board = load_board(rd.board)
        ctx = load_context(board)
        try:
            cr = cast(ctx, args.voter, args.selection, stream(args, "vote", args.voter))
        except BoardError as exc:
            raise UsageError(str(exc)) from None
        rd.ballot_paper(args.voter).write_bytes(cr.vote_paper.payload(ctx.grp))
        rd.identity_paper(args.voter).write_bytes(cr.identity_paper.payload())
        rd.view(args.voter).write_bytes(cr.view.to_bytes(ctx.grp))
        board.save(rd.board)
    print(f"{args.voter} cast a ballot for {args.selection!r}")
    print(f"papers under {rd.papers}, private transcript {rd.view(args.voter)}")
    return EXIT_PASS


def cmd_mail(args) -> int:
    rd = RunDir(args.rundir).require()
    voter = args.voter
    piece_path = rd.piece(voter)
    if piece_path.exists():
        raise UsageError(f"{voter}'s envelope is already in the mail; refusing")
    try:
        vote_payload = rd.ballot_paper(voter).read_bytes()
        identity_payload = rd.identity_paper(voter).read_bytes()
    except OSError:
        raise UsageError(f"{voter} has no printed papers; run vote first") from None

    state = IN_TRANSIT
    if args.lose:
        state = LOST
    elif args.substitute is not None:
        board = load_board(rd.board)
        ctx = load_context(board)
        try:
            index = ctx.config.vote_index(args.substitute)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        paper = VotePaper.parse(ctx.grp, vote_payload)
        forged = VotePaper(paper.election_hash, index, args.substitute,
                           paper.param_cts, paper.proofs)
        vote_payload = forged.payload(ctx.grp)
        state = SUBSTITUTED

    piece_path.write_bytes(
        voter.encode() + b"\n" + state.encode() + b"\n" + vote_payload + identity_payload
    )
    print(f"{voter}'s envelope: {state}")
    return EXIT_PASS


def read_piece(path: Path) -> MailPiece:
    lines = path.read_bytes().split(b"\n")
    if len(lines) < 4:
        raise IntegrityError(f"{path}: not a mail piece")
    outer, state = lines[0].decode(), lines[1].decode()
    if state not in _PIECE_STATES:
        raise IntegrityError(f"{path}: unknown state {state!r}")
    vote_payload = lines[2] + b"\n"
    identity_payload = lines[3] + b"\n"
    if state == IN_TRANSIT:
        state = DELIVERED
    return MailPiece(outer, vote_payload, identity_payload, state)


def cmd_receive(args) -> int:
    rd = RunDir(args.rundir).require()
    if rd.papercount.exists():
        raise UsageError("mail already processed for this election; refusing")
    with board_lock(rd):
        board = load_board(rd.board)
        ctx = load_context(board)
        envelopes = load_envelopes(rd, ctx.grp)
        pieces = [read_piece(p) for p in sorted(rd.mailbox.glob("*.piece"))]
        report = process_votes(ctx, pieces, envelopes, stream(args, "receive"))
        lines = [f"{sel}|{n}" for sel, n in sorted(report.paper_tally.items())]
        rd.papercount.write_text("\n".join(lines) + ("\n" if lines else ""))
        board.save(rd.board)
    print(f"received {report.received} ballots, rejected {len(report.rejected)}")
    for who, reason in report.rejected:
        print(f"  rejected {who or '(anonymous)'}: {reason}")
    print(f"paper count written to {rd.papercount}")
    return EXIT_PASS


# -- tallying and reporting ----------------------------------------------------------


def cmd_tally(args) -> int:
    rd = RunDir(args.rundir).require()
    with board_lock(rd):
        board = load_board(rd.board)
        if board.sealed:
            raise UsageError("board is already sealed; tally is done")
        ctx = load_context(board)
        keys = load_trustee_keys(rd)
        try:
            report = tally(ctx, keys, stream(args, "tally"), workers=args.workers)
        except ProtocolError as exc:
            raise IntegrityError(str(exc)) from None
        board.save(rd.board)
    print(f"accepted {len(report.accepted)} ballots")
    for row_index, voter, reason in report.skips:
        who = voter or f"row {row_index}"
        print(f"  excluded {who}: {reason}")
    for sel, n in sorted(report.tally.items()):
        print(f"  {sel}: {n}")
    print(f"board sealed at {board.snapshot()[:16]}")
    return EXIT_PASS


def cmd_verify(args) -> int:
    rd = RunDir(args.rundir).require()
    if args.voter is None and args.view is None:
        raise UsageError("verify needs --voter or --view")
    board = load_board(rd.board)
    ctx = load_context(board)
    view_path = Path(args.view) if args.view else rd.view(args.voter)
    try:
        view = CastView.from_bytes(ctx.grp, view_path.read_bytes())
    except OSError as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise IntegrityError(f"{view_path}: {exc}") from None
    ok, reason = voter_verify(board, view)
    if ok:
        print(f"{view.voter_id}: ballot accepted and papers consistent")
        return EXIT_PASS
    print(f"{view.voter_id}: verification failed ({reason})")
    return EXIT_FAIL


def cmd_audit(args) -> int:
    path = Path(args.board) if args.board else RunDir(args.rundir).require().board
    board = load_board(path)
    report = global_verify(board, workers=args.workers)
    for name in report.checks[:-1] if not report.ok else report.checks:
        print(f"ok   {name}")
    if report.ok:
        print(f"audit passed: {len(report.checks)} checks, head {board.snapshot()[:16]}")
        return EXIT_PASS
    print(f"FAIL {report.failed}: {report.detail}")
    return EXIT_FAIL


def read_paper_outcome(path: Path) -> dict:
    tally: Counter = Counter()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(str(exc)) from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sel, sep, count = line.rpartition("|")
        if not sep or not count.isdigit():
            raise UsageError(f"{path}:{lineno}: expected 'selection|count'")
        tally[sel] += int(count)
    return dict(tally)


def cmd_result(args) -> int:
    rd = RunDir(args.rundir).require()
    board = load_board(rd.board)
    ctx = load_context(board)
    paper_path = Path(args.paper_outcome) if args.paper_outcome else rd.papercount
    paper = read_paper_outcome(paper_path)
    tolerance = args.d if args.d is not None else ctx.config.error_tolerance
    if tolerance < 0:
        raise UsageError("tolerance must be >= 0")
    outcome = result(board, paper, tolerance)
    rd.outcome.write_text(outcome.to_text())
    sys.stdout.write(outcome.to_text())
    return EXIT_PASS if outcome.verdict is not None else EXIT_FAIL


# -- benchmarks ----------------------------------------------------------------------


def cmd_bench_shuffle(args) -> int:
    if args.rows < 0 or args.width < 1:
        raise UsageError("need --rows >= 0 and --width >= 1")
    grp = MAIN
    rng = stream(args, "bench", str(args.rows), str(args.width))
    sk = grp.random_scalar(rng)
    pk = grp.gpow(sk)
    rows = [
        tuple(
            encrypt(grp, pk, grp.gpow(rng.below(64)), grp.random_scalar(rng))
            for _ in range(args.width)
        )
        for _ in range(args.rows)
    ]
    t0 = time.perf_counter()
    rows_out, proof = mix_shuffle(grp, pk, rows, rng, workers=args.threads)
    t1 = time.perf_counter()
    ok = mix_verify(grp, pk, rows, rows_out, proof, workers=args.threads)
    t2 = time.perf_counter()
    print(f"rows {args.rows}  width {args.width}  threads {args.threads}")
    print(f"prove  {t1 - t0:8.3f} s")
    print(f"verify {t2 - t1:8.3f} s")
    if not ok:
        print("verification FAILED")
        return EXIT_FAIL
    return EXIT_PASS


# -- wiring --------------------------------------------------------------------------


def build_parser() -> Parser:
    parser = Parser(prog="mailvote",
                    description="run, audit, and benchmark a paper-backed election")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None,
                       help="deterministic randomness; reruns are byte-identical")

    p = sub.add_parser("setup", help="initialize a run directory from a config file")
    p.add_argument("config")
    p.add_argument("rundir")
    add_seed(p)
    p.set_defaults(fn=cmd_setup)

    p = sub.add_parser("vote", help="cast a ballot and print the paper payloads")
    p.add_argument("rundir")
    p.add_argument("--voter", required=True)
    p.add_argument("--selection", required=True)
    add_seed(p)
    p.set_defaults(fn=cmd_vote)

    p = sub.add_parser("mail", help="put a voter's envelope in the post")
    p.add_argument("rundir")
    p.add_argument("--voter", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--lose", action="store_true", help="the envelope never arrives")
    group.add_argument("--substitute", metavar="SELECTION",
                       help="adversary swaps the ballot paper in transit")
    p.set_defaults(fn=cmd_mail)

    p = sub.add_parser("receive", help="open delivered envelopes and post ballots")
    p.add_argument("rundir")
    add_seed(p)
    p.set_defaults(fn=cmd_receive)

    p = sub.add_parser("tally", help="mix, open, check, and count; seals the board")
    p.add_argument("rundir")
    p.add_argument("--workers", type=int, default=1)
    add_seed(p)
    p.set_defaults(fn=cmd_tally)

    p = sub.add_parser("verify", help="check one voter's ballot against the board")
    p.add_argument("rundir")
    p.add_argument("--voter")
    p.add_argument("--view", help="path to a saved cast transcript")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("audit", help="re-verify the whole board")
    p.add_argument("rundir", nargs="?")
    p.add_argument("--board", help="audit a bare board file instead of a rundir")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("result", help="accept or reject the paper outcome")
    p.add_argument("rundir")
    p.add_argument("--paper-outcome", help="selection|count file (default: papercount.txt)")
    p.add_argument("--d", type=int, default=None,
                   help="error tolerance (default: from the config)")
    p.set_defaults(fn=cmd_result)

    p = sub.add_parser("bench", help="performance measurements")
    bench_sub = p.add_subparsers(dest="what", required=True)
    b = bench_sub.add_parser("shuffle", help="prove and verify one mix over random rows")
    b.add_argument("--rows", type=int, required=True)
    b.add_argument("--width", type=int, default=6)
    b.add_argument("--threads", type=int, default=1)
    add_seed(b)
    b.set_defaults(fn=cmd_bench_shuffle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "audit" and args.rundir is None and args.board is None:
            raise UsageError("audit needs a rundir or --board")
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CastError, PaperFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except ChainError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())
