"""Universally verifiable shuffles of ciphertext rows.

A batch is N rows of W ciphertexts each. One mix stage rerandomizes every
cell and applies a single secret permutation to whole rows. The argument is
commitment-consistent: the prover commits to the permutation with one
Pedersen-style commitment per row against fixed derived generators, chains
statement-bound challenges through those commitments, and answers with
responses that tie every output column to the same permutation. Verification
cost is linear in N; the per-row challenges are 128-bit, which is why
verifying is measurably cheaper than proving.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass

from gmpy2 import mpz

from .codec import Reader, pack_u32
from .groups import Ciphertext, GroupProfile, encrypt
from .zkp import FsTranscript

CHALLENGE_BITS = 128
_PARALLEL_FLOOR = 512  # below this many rows a pool costs more than it saves


class MixError(ValueError):
    pass


class MixStageError(Exception):
    """A stage of a chained mix failed verification."""

    def __init__(self, stage: int):
        self.stage = stage
        super().__init__(f"mix stage {stage} failed verification")


def mix_generators(grp: GroupProfile, count: int):
    """Chain base plus `count` row generators, derived nothing-up-my-sleeve."""
    cache = getattr(grp, "_mix_gens", None)
    if cache is None:
        cache = []
        grp._mix_gens = cache
    while len(cache) < count + 1:
        cache.append(
            grp.hash_to_element(b"mix-generator", len(cache).to_bytes(8, "big"))
        )
    return cache[0], cache[1 : count + 1]


@dataclass(frozen=True)
class MixProof:
    width: int
    n: int
    perm_commits: tuple
    chain: tuple
    t1: mpz
    t2: mpz
    t3: mpz
    t4: tuple  # (t41, t42) per column
    t_hat: tuple
    s1: mpz
    s2: mpz
    s3: mpz
    s4: tuple  # per column
    s_hat: tuple
    s_tilde: tuple

    def to_bytes(self, grp: GroupProfile) -> bytes:
        el, sc = grp.element_bytes, grp.scalar_bytes
        out = [pack_u32(self.width), pack_u32(self.n)]
        out += [el(x) for x in self.perm_commits]
        out += [el(x) for x in self.chain]
        out += [el(self.t1), el(self.t2), el(self.t3)]
        out += [el(a) + el(b) for a, b in self.t4]
        out += [el(x) for x in self.t_hat]
        out += [sc(self.s1), sc(self.s2), sc(self.s3)]
        out += [sc(x) for x in self.s4]
        out += [sc(x) for x in self.s_hat]
        out += [sc(x) for x in self.s_tilde]
        return b"".join(out)

    @classmethod
    def from_bytes(cls, grp: GroupProfile, data: bytes) -> "MixProof":
        rd = Reader(data)
        width, n = rd.u32(), rd.u32()
        el = lambda: grp.element_from_bytes(rd.raw(grp.element_len))
        sc = lambda: grp.scalar_from_bytes(rd.raw(grp.scalar_len))
        perm_commits = tuple(el() for _ in range(n))
        chain = tuple(el() for _ in range(n))
        t1, t2, t3 = el(), el(), el()
        t4 = tuple((el(), el()) for _ in range(width))
        t_hat = tuple(el() for _ in range(n))
        s1, s2, s3 = sc(), sc(), sc()
        s4 = tuple(sc() for _ in range(width))
        s_hat = tuple(sc() for _ in range(n))
        s_tilde = tuple(sc() for _ in range(n))
        rd.done()
        return cls(
            width, n, perm_commits, chain, t1, t2, t3, t4, t_hat,
            s1, s2, s3, s4, s_hat, s_tilde,
        )


def _row_width(rows) -> int:
    if not rows:
        return 0
    width = len(rows[0])
    if width == 0 or any(len(r) != width for r in rows):
        raise MixError("rows must share one nonzero width")
    return width


def _statement(grp, pk, width, n, h0, hs, rows_in, rows_out, perm_commits) -> FsTranscript:
    tr = FsTranscript(grp, b"mix-shuffle")
    tr.absorb(grp.name.encode())
    tr.absorb_element(pk)
    tr.absorb(pack_u32(width) + pack_u32(n))
    tr.absorb_element(h0)
    for h in hs:
        tr.absorb_element(h)
    for rows in (rows_in, rows_out):
        for row in rows:
            for cell in row:
                tr.absorb_ciphertext(cell)
    for cj in perm_commits:
        tr.absorb_element(cj)
    return tr


def _row_challenges(tr: FsTranscript, n: int):
    out = []
    for j in range(n):
        u = tr.derive(b"row-challenge", j, CHALLENGE_BITS)
        out.append(mpz(u if u else 1))
    return out


# -- worker-pool plumbing (fork start method; globals snapshot into children) --

_TASK: dict = {}


def _chunks(n: int, workers: int):
    size = (n + workers - 1) // workers
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _run_parallel(fn, n: int, workers: int):
    if workers <= 1 or n < _PARALLEL_FLOOR:
        return [fn((0, n))]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers) as pool:
        return pool.map(fn, _chunks(n, workers))


def _w_rerandomize(bounds):
    grp = _TASK["grp"]
    pk, picked, rnd = _TASK["pk"], _TASK["picked"], _TASK["rnd"]
    p, g = grp.p, grp.g
    out = []
    for i in range(*bounds):
        row = []
        for col, cell in enumerate(picked[i]):
            r = rnd[i][col]
            row.append(
                Ciphertext(cell.c1 * grp.pow(g, r) % p, cell.c2 * grp.pow(pk, r) % p)
            )
        out.append(tuple(row))
    return out


def _w_powprod(bounds):
    grp = _TASK["grp"]
    bases, exps = _TASK["bases"], _TASK["exps"]
    p = grp.p
    acc = mpz(1)
    for i in range(*bounds):
        acc = acc * grp.pow(bases[i], exps[i]) % p
    return acc


def _w_chain_equations(bounds):
    grp = _TASK["grp"]
    chain, t_hat, s_hat, s_tilde, ch, h0 = (
        _TASK["chain"], _TASK["t_hat"], _TASK["s_hat"], _TASK["s_tilde"],
        _TASK["ch"], _TASK["h0"],
    )
    p = grp.p
    for i in range(*bounds):
        prev = chain[i - 1] if i else h0
        lhs = grp.gpow(s_hat[i]) * grp.pow(prev, s_tilde[i]) % p
        if lhs != t_hat[i] * grp.pow(chain[i], ch) % p:
            return False
    return True


def _powprod(grp, bases, exps, workers=1) -> mpz:
    """Product of bases[i]^exps[i]; the mix's workhorse."""
    _TASK.update(grp=grp, bases=bases, exps=exps)
    parts = _run_parallel(_w_powprod, len(bases), workers)
    return grp.prod(parts)


# -- proving -------------------------------------------------------------------


def mix_prove(grp, pk, rows_in, perm, rerand, rng, workers: int = 1):
    """Shuffle rows_in by perm with fresh cell randomness and prove it.

    rows_out[i] = rerandomize(rows_in[perm^-1(i)]); rerand is indexed by
    output position then column and must be nonzero everywhere.
    """
    n = len(rows_in)
    width = _row_width(rows_in)
    if sorted(perm) != list(range(n)):
        raise MixError("perm is not a bijection on the batch")
    if len(rerand) != n or any(len(r) != width for r in rerand):
        raise MixError("rerandomization shape mismatch")
    if any(not 0 < r < grp.q for row in rerand for r in row):
        raise MixError("rerandomization must be nonzero")

    # pi maps output position to input position
    pi = [0] * n
    for j, target in enumerate(perm):
        pi[target] = j
    q, p = grp.q, grp.p
    h0, hs = mix_generators(grp, n)

    picked = [rows_in[pi[i]] for i in range(n)]
    _TASK.update(grp=grp, pk=pk, picked=picked, rnd=rerand)
    rows_out = [row for part in _run_parallel(_w_rerandomize, n, workers) for row in part]

    # commit to the permutation: input row j carries the generator of its slot
    sigma = perm
    r_commit = [grp.random_scalar(rng) for _ in range(n)]
    perm_commits = [grp.gpow(r_commit[j]) * hs[sigma[j]] % p for j in range(n)]

    tr = _statement(grp, pk, width, n, h0, hs, rows_in, rows_out, perm_commits)
    u = _row_challenges(tr, n)
    u_out = [u[pi[i]] for i in range(n)]

    # challenge chain through the committed permutation
    r_hat = [grp.random_scalar(rng) for _ in range(n)]
    chain = []
    prev = h0
    for i in range(n):
        prev = grp.gpow(r_hat[i]) * grp.pow(prev, u_out[i]) % p
        chain.append(prev)

    w1, w2, w3 = (grp.random_scalar(rng) for _ in range(3))
    w4 = [grp.random_scalar(rng) for _ in range(width)]
    w_hat = [grp.random_scalar(rng) for _ in range(n)]
    w_tilde = [grp.random_scalar(rng) for _ in range(n)]

    t1 = grp.gpow(w1)
    t2 = grp.gpow(w2)
    t3 = grp.gpow(w3) * _powprod(grp, hs, w_tilde, workers) % p
    t4 = []
    for col in range(width):
        c1s = [row[col].c1 for row in rows_out]
        c2s = [row[col].c2 for row in rows_out]
        t41 = grp.gpow((q - w4[col]) % q) * _powprod(grp, c1s, w_tilde, workers) % p
        t42 = grp.pow(pk, (q - w4[col]) % q) * _powprod(grp, c2s, w_tilde, workers) % p
        t4.append((t41, t42))
    t_hat = []
    for i in range(n):
        prev = chain[i - 1] if i else h0
        t_hat.append(grp.gpow(w_hat[i]) * grp.pow(prev, w_tilde[i]) % p)

    for x in chain:
        tr.absorb_element(x)
    tr.absorb_element(t1).absorb_element(t2).absorb_element(t3)
    for t41, t42 in t4:
        tr.absorb_element(t41).absorb_element(t42)
    for x in t_hat:
        tr.absorb_element(x)
    ch = tr.challenge()

    r_bar = sum(r_commit) % q
    # v[i] = product of the output challenges after position i
    v = [mpz(1)] * n
    for i in range(n - 2, -1, -1):
        v[i] = v[i + 1] * u_out[i + 1] % q
    r_hat_acc = sum(r_hat[i] * v[i] for i in range(n)) % q
    r_prime = sum(r_commit[j] * u[j] for j in range(n)) % q

    s1 = (w1 + ch * r_bar) % q
    s2 = (w2 + ch * r_hat_acc) % q
    s3 = (w3 + ch * r_prime) % q
    s4 = []
    for col in range(width):
        r_tilde_col = sum(rerand[i][col] * u_out[i] for i in range(n)) % q
        s4.append((w4[col] + ch * r_tilde_col) % q)
    s_hat = [(w_hat[i] + ch * r_hat[i]) % q for i in range(n)]
    s_tilde = [(w_tilde[i] + ch * u_out[i]) % q for i in range(n)]

    proof = MixProof(
        width, n, tuple(perm_commits), tuple(chain), t1, t2, t3, tuple(t4),
        tuple(t_hat), s1, s2, s3, tuple(s4), tuple(s_hat), tuple(s_tilde),
    )
    return rows_out, proof


def mix_verify(grp, pk, rows_in, rows_out, proof: MixProof, workers: int = 1) -> bool:
    n = len(rows_in)
    if len(rows_out) != n or proof.n != n:
        return False
    try:
        width = _row_width(rows_in)
        if rows_out and _row_width(rows_out) != width:
            return False
    except MixError:
        return False
    if proof.width != width:
        return False
    shapes = (
        len(proof.perm_commits), len(proof.chain), len(proof.t_hat),
        len(proof.s_hat), len(proof.s_tilde),
    )
    if shapes != (n,) * 5 or len(proof.t4) != width or len(proof.s4) != width:
        return False

    q, p = grp.q, grp.p
    h0, hs = mix_generators(grp, n)
    tr = _statement(grp, pk, width, n, h0, hs, rows_in, rows_out, proof.perm_commits)
    u = _row_challenges(tr, n)
    for x in proof.chain:
        tr.absorb_element(x)
    tr.absorb_element(proof.t1).absorb_element(proof.t2).absorb_element(proof.t3)
    for t41, t42 in proof.t4:
        tr.absorb_element(t41).absorb_element(t42)
    for x in proof.t_hat:
        tr.absorb_element(x)
    ch = tr.challenge()

    u_prod = mpz(1)
    for x in u:
        u_prod = u_prod * x % q
    c_bar = grp.div(grp.prod(proof.perm_commits), grp.prod(hs))
    if grp.gpow(proof.s1) != proof.t1 * grp.pow(c_bar, ch) % p:
        return False
    last = proof.chain[-1] if n else h0
    c_hat = grp.div(last, grp.pow(h0, u_prod))
    if grp.gpow(proof.s2) != proof.t2 * grp.pow(c_hat, ch) % p:
        return False
    c_tilde = _powprod(grp, proof.perm_commits, u, workers)
    lhs = grp.gpow(proof.s3) * _powprod(grp, hs, proof.s_tilde, workers) % p
    if lhs != proof.t3 * grp.pow(c_tilde, ch) % p:
        return False
    for col in range(width):
        in1 = [row[col].c1 for row in rows_in]
        in2 = [row[col].c2 for row in rows_in]
        out1 = [row[col].c1 for row in rows_out]
        out2 = [row[col].c2 for row in rows_out]
        a1 = _powprod(grp, in1, u, workers)
        a2 = _powprod(grp, in2, u, workers)
        neg = (q - proof.s4[col]) % q
        lhs1 = grp.gpow(neg) * _powprod(grp, out1, proof.s_tilde, workers) % p
        if lhs1 != proof.t4[col][0] * grp.pow(a1, ch) % p:
            return False
        lhs2 = grp.pow(pk, neg) * _powprod(grp, out2, proof.s_tilde, workers) % p
        if lhs2 != proof.t4[col][1] * grp.pow(a2, ch) % p:
            return False
    _TASK.update(
        grp=grp, chain=proof.chain, t_hat=proof.t_hat, s_hat=proof.s_hat,
        s_tilde=proof.s_tilde, ch=ch, h0=h0,
    )
    return all(_run_parallel(_w_chain_equations, n, workers))


def shuffle(grp, pk, rows, rng, workers: int = 1):
    """One honest mix stage: fresh permutation and randomness from rng."""
    n = len(rows)
    width = _row_width(rows)
    perm = rng.permutation(n)
    rerand = [[grp.random_scalar(rng) for _ in range(width)] for _ in range(n)]
    return mix_prove(grp, pk, rows, perm, rerand, rng, workers)


def mix_chain(grp, pk, rows, stages: int, rng, workers: int = 1):
    """Sequential mix stages, each verified before the next one runs."""
    if stages < 1:
        raise MixError("need at least one mix stage")
    current = list(rows)
    records = []
    for stage in range(stages):
        rows_out, proof = shuffle(grp, pk, current, rng, workers)
        if not mix_verify(grp, pk, current, rows_out, proof, workers):
            raise MixStageError(stage)
        records.append((rows_out, proof))
        current = rows_out
    return current, records


def encrypt_plaintext_rows(grp, pk, rows, rng):
    """Replace plaintext group-element cells with fresh encryptions.

    Ciphertext cells pass through untouched; anything else must be a valid
    group element (already-encoded vote or identity index).
    """
    out = []
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, Ciphertext):
                cells.append(cell)
            else:
                if not grp.is_element(cell):
                    raise MixError("plaintext cell is not encodable")
                cells.append(encrypt(grp, pk, cell, grp.random_scalar(rng)))
        out.append(tuple(cells))
    return out
