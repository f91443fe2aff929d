"""Shuffle argument tests.

The independent oracle here is decryption: a test-only secret key opens
every cell before and after a mix, and the multiset of plaintext rows must
be preserved while the ciphertext bytes all change.
"""

import pytest

import mailvote.mixnet as mixnet
from mailvote.groups import Ciphertext, encrypt
from mailvote.mixnet import (
    MixError,
    MixProof,
    MixStageError,
    encrypt_plaintext_rows,
    mix_chain,
    mix_generators,
    mix_prove,
    mix_verify,
    shuffle,
)
from mailvote.rng import Drbg

SK = 123457  # test-only decryption key, never used by the package itself


def _keys(grp):
    return SK % grp.q, grp.gpow(SK % grp.q)


def _decrypt_row(grp, sk, row):
    return tuple(grp.div(c.c2, grp.pow(c.c1, sk)) for c in row)


def _batch(grp, pk, rng, n, width):
    rows = []
    for i in range(n):
        row = tuple(
            encrypt(grp, pk, grp.gpow(1 + i * width + col), grp.random_scalar(rng))
            for col in range(width)
        )
        rows.append(row)
    return rows


def test_shuffle_preserves_plaintext_multiset(main_grp):
    grp = main_grp
    sk, pk = _keys(grp)
    rng = Drbg(b"mix-multiset")
    rows = _batch(grp, pk, rng, 5, 2)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    assert mix_verify(grp, pk, rows, rows_out, proof)
    before = sorted(_decrypt_row(grp, sk, r) for r in rows)
    after = sorted(_decrypt_row(grp, sk, r) for r in rows_out)
    assert before == after
    # every cell got fresh randomness
    assert not set(c.c1 for r in rows for c in r) & set(
        c.c1 for r in rows_out for c in r
    )


def test_single_row_batch(main_grp):
    grp = main_grp
    sk, pk = _keys(grp)
    rng = Drbg(b"mix-single")
    rows = _batch(grp, pk, rng, 1, 3)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    assert mix_verify(grp, pk, rows, rows_out, proof)
    assert _decrypt_row(grp, sk, rows_out[0]) == _decrypt_row(grp, sk, rows[0])


def test_empty_batch_is_vacuous(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rows_out, proof = mix_prove(grp, pk, [], [], [], Drbg(b"mix-empty"))
    assert rows_out == []
    assert proof.n == 0
    assert mix_verify(grp, pk, [], [], proof)
    extra = encrypt(grp, pk, grp.gpow(1), 7)
    assert not mix_verify(grp, pk, [], [(extra,)], proof)


def test_honest_shuffles_always_verify(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    for trial in range(100):
        rng = Drbg(b"mix-honest-%d" % trial)
        rows = _batch(grp, pk, rng, 3, 2)
        rows_out, proof = shuffle(grp, pk, rows, rng)
        assert mix_verify(grp, pk, rows, rows_out, proof), f"trial {trial}"


def test_zero_randomness_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-zero-r")
    rows = _batch(grp, pk, rng, 3, 1)
    rerand = [[grp.random_scalar(rng)] for _ in range(3)]
    rerand[1][0] = 0
    with pytest.raises(MixError):
        mix_prove(grp, pk, rows, [2, 0, 1], rerand, rng)


def test_non_bijection_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-bad-perm")
    rows = _batch(grp, pk, rng, 3, 1)
    rerand = [[grp.random_scalar(rng)] for _ in range(3)]
    with pytest.raises(MixError):
        mix_prove(grp, pk, rows, [0, 0, 2], rerand, rng)


def test_ragged_rows_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-ragged")
    rows = _batch(grp, pk, rng, 3, 2)
    rows[1] = rows[1][:1]
    with pytest.raises(MixError):
        shuffle(grp, pk, rows, rng)


def test_rerand_shape_mismatch_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-shape")
    rows = _batch(grp, pk, rng, 3, 2)
    rerand = [[grp.random_scalar(rng)] for _ in range(3)]  # width 1, rows are 2
    with pytest.raises(MixError):
        mix_prove(grp, pk, rows, [1, 2, 0], rerand, rng)


def test_swapped_output_rows_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-swap")
    rows = _batch(grp, pk, rng, 4, 2)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    tampered = list(rows_out)
    tampered[0], tampered[1] = tampered[1], tampered[0]
    assert not mix_verify(grp, pk, rows, tampered, proof)


def test_substituted_cell_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-subst")
    rows = _batch(grp, pk, rng, 4, 2)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    fake = encrypt(grp, pk, grp.gpow(999), grp.random_scalar(rng))
    tampered = list(rows_out)
    tampered[2] = (tampered[2][0], fake)
    assert not mix_verify(grp, pk, rows, tampered, proof)


def test_duplicated_output_row_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-dup")
    rows = _batch(grp, pk, rng, 4, 1)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    tampered = list(rows_out)
    tampered[3] = tampered[0]
    assert not mix_verify(grp, pk, rows, tampered, proof)


def test_proof_not_transferable_to_other_statement(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-bind")
    rows_a = _batch(grp, pk, rng, 3, 1)
    rows_b = _batch(grp, pk, rng, 3, 1)
    out_a, proof = shuffle(grp, pk, rows_a, rng)
    assert not mix_verify(grp, pk, rows_b, out_a, proof)
    other_pk = grp.gpow(777)
    assert not mix_verify(grp, other_pk, rows_a, out_a, proof)


def test_proof_byte_mutations_rejected(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-mutate")
    rows = _batch(grp, pk, rng, 3, 2)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    blob = bytearray(proof.to_bytes(grp))
    for pos in range(0, len(blob), 97):
        mutated = bytearray(blob)
        mutated[pos] ^= 0x01
        try:
            bad = MixProof.from_bytes(grp, bytes(mutated))
        except ValueError:
            continue  # malformed encoding counts as a rejection
        assert not mix_verify(grp, pk, rows, rows_out, bad), f"byte {pos}"


def test_proof_serialization_roundtrip(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-serde")
    rows = _batch(grp, pk, rng, 3, 2)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    blob = proof.to_bytes(grp)
    again = MixProof.from_bytes(grp, blob)
    assert again == proof
    assert mix_verify(grp, pk, rows, rows_out, again)
    with pytest.raises(ValueError):
        MixProof.from_bytes(grp, blob + b"\x00")


def test_proof_bytes_deterministic(main_grp):
    grp = main_grp
    _, pk = _keys(grp)

    def run():
        rng = Drbg(b"mix-det")
        rows = _batch(grp, pk, rng, 4, 2)
        rows_out, proof = shuffle(grp, pk, rows, rng)
        return proof.to_bytes(grp)

    assert run() == run()


def test_chain_two_stages(main_grp):
    grp = main_grp
    sk, pk = _keys(grp)
    rng = Drbg(b"mix-chain")
    rows = _batch(grp, pk, rng, 4, 2)
    final, records = mix_chain(grp, pk, rows, 2, rng)
    assert len(records) == 2
    assert final is records[-1][0]
    current = rows
    for rows_out, proof in records:
        assert mix_verify(grp, pk, current, rows_out, proof)
        current = rows_out
    before = sorted(_decrypt_row(grp, sk, r) for r in rows)
    after = sorted(_decrypt_row(grp, sk, r) for r in final)
    assert before == after


def test_chain_tampered_record_fails_reverification(main_grp):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-chain-tamper")
    rows = _batch(grp, pk, rng, 3, 1)
    _, records = mix_chain(grp, pk, rows, 2, rng)
    stage1, proof1 = records[1]
    tampered = list(stage1)
    tampered[0], tampered[1] = tampered[1], tampered[0]
    assert not mix_verify(grp, pk, records[0][0], tampered, proof1)


def test_chain_abort_names_failing_stage(main_grp, monkeypatch):
    grp = main_grp
    _, pk = _keys(grp)
    rng = Drbg(b"mix-chain-abort")
    rows = _batch(grp, pk, rng, 3, 1)
    calls = []

    def flaky(*args, **kwargs):
        calls.append(1)
        return len(calls) < 2

    monkeypatch.setattr(mixnet, "mix_verify", flaky)
    with pytest.raises(MixStageError) as exc:
        mix_chain(grp, pk, rows, 3, rng)
    assert exc.value.stage == 1


def test_workers_match_serial(main_grp, monkeypatch):
    grp = main_grp
    _, pk = _keys(grp)
    monkeypatch.setattr(mixnet, "_PARALLEL_FLOOR", 1)

    def run(workers):
        rng = Drbg(b"mix-workers")
        rows = _batch(grp, pk, rng, 8, 2)
        rows_out, proof = shuffle(grp, pk, rows, rng, workers=workers)
        assert mix_verify(grp, pk, rows, rows_out, proof, workers=workers)
        return proof.to_bytes(grp)

    assert run(1) == run(2)


def test_generators_are_cached_and_extend(main_grp):
    h0_a, hs_a = mix_generators(main_grp, 3)
    h0_b, hs_b = mix_generators(main_grp, 6)
    assert h0_a == h0_b
    assert hs_b[:3] == hs_a
    assert len(set([h0_a] + hs_b)) == 7  # all distinct
    assert all(main_grp.is_element(h) for h in hs_b)


def test_encrypt_plaintext_rows(main_grp):
    grp = main_grp
    sk, pk = _keys(grp)
    rng = Drbg(b"mix-encrow")
    existing = encrypt(grp, pk, grp.gpow(5), grp.random_scalar(rng))
    rows = [(grp.gpow(9), existing)]
    out = encrypt_plaintext_rows(grp, pk, rows, rng)
    assert out[0][1] is existing
    assert isinstance(out[0][0], Ciphertext)
    assert grp.div(out[0][0].c2, grp.pow(out[0][0].c1, sk)) == grp.gpow(9)
    with pytest.raises(MixError):
        encrypt_plaintext_rows(grp, pk, [(0,)], rng)


def test_toy_group_shuffle(toy1009):
    grp = toy1009
    sk = 55 % grp.q
    pk = grp.gpow(sk)
    rng = Drbg(b"mix-toy")
    rows = _batch(grp, pk, rng, 6, 1)
    rows_out, proof = shuffle(grp, pk, rows, rng)
    assert mix_verify(grp, pk, rows, rows_out, proof)
    before = sorted(_decrypt_row(grp, sk, r) for r in rows)
    after = sorted(_decrypt_row(grp, sk, r) for r in rows_out)
    assert before == after
