"""Sigma-protocol completeness, soundness fuzz, and statement binding."""

import pytest

from mailvote.codec import Reader
from mailvote.groups import (
    TOY1009,
    Ciphertext,
    EncodingError,
    encrypt,
    rerandomize,
)
from mailvote.pep import (
    PepCorruption,
    PepJudgement,
    pep_judge,
    pep_run,
    pep_verify,
)
from mailvote.rng import Drbg
from mailvote.threshold import dkg_run
from mailvote.zkp import (
    FsTranscript,
    PokCiphertext,
    cp_prove,
    cp_verify,
    ct_quotient,
    enc_prove,
    enc_verify,
    pok_prove,
    pok_verify,
)

CTX = b"test-context"


@pytest.fixture
def keypair(main_grp, rng):
    sk = main_grp.random_scalar(rng)
    return sk, main_grp.gpow(sk)


def test_transcript_determinism(main_grp):
    a = FsTranscript(main_grp, b"tag").absorb(b"x").absorb(b"y").challenge()
    b = FsTranscript(main_grp, b"tag").absorb(b"x").absorb(b"y").challenge()
    assert a == b
    c = FsTranscript(main_grp, b"tag").absorb(b"xy").challenge()
    d = FsTranscript(main_grp, b"tag2").absorb(b"x").absorb(b"y").challenge()
    assert len({a, c, d}) == 3  # length-prefixing separates xy from x,y


def test_transcript_derive_is_stable(main_grp):
    tr = FsTranscript(main_grp, b"tag").absorb(b"stmt")
    u1 = tr.derive(b"u", 1, 128)
    assert tr.derive(b"u", 1, 128) == u1
    assert tr.derive(b"u", 2, 128) != u1
    assert u1 < 2**128


def test_pok_completeness(main_grp, rng, keypair):
    _, pk = keypair
    for _ in range(100):
        m, r = main_grp.random_scalar(rng), main_grp.random_scalar(rng)
        c = encrypt(main_grp, pk, main_grp.gpow(m), r)
        proof = pok_prove(main_grp, pk, c, m, r, CTX, rng)
        assert pok_verify(main_grp, pk, c, proof, CTX)


def test_pok_rejects_mutations(main_grp, rng, keypair):
    grp = main_grp
    _, pk = keypair
    m, r = grp.random_scalar(rng), grp.random_scalar(rng)
    c = encrypt(grp, pk, grp.gpow(m), r)
    proof = pok_prove(grp, pk, c, m, r, CTX, rng)
    mutants = [
        PokCiphertext(grp.mul(proof.a1, grp.g), proof.a2, proof.s_m, proof.s_r),
        PokCiphertext(proof.a1, grp.mul(proof.a2, grp.g), proof.s_m, proof.s_r),
        PokCiphertext(proof.a1, proof.a2, (proof.s_m + 1) % grp.q, proof.s_r),
        PokCiphertext(proof.a1, proof.a2, proof.s_m, (proof.s_r + 1) % grp.q),
    ]
    for bad in mutants:
        assert not pok_verify(grp, pk, c, bad, CTX)
    # single byte flips across the serialized form
    blob = bytearray(proof.to_bytes(grp))
    for pos in range(0, len(blob), 7):
        mutated = bytearray(blob)
        mutated[pos] ^= 0x01
        try:
            parsed = PokCiphertext.from_reader(grp, Reader(bytes(mutated)))
        except EncodingError:
            continue
        assert not pok_verify(grp, pk, c, parsed, CTX)


def test_pok_statement_and_context_binding(main_grp, rng, keypair):
    _, pk = keypair
    m, r = 5, 77
    c = encrypt(main_grp, pk, main_grp.gpow(m), r)
    proof = pok_prove(main_grp, pk, c, m, r, CTX, rng)
    assert not pok_verify(main_grp, pk, rerandomize(main_grp, pk, c, 1), proof, CTX)
    assert not pok_verify(main_grp, pk, c, proof, b"other-context")


def test_cp_degenerate_zero_exponent(main_grp, rng):
    proof = cp_prove(main_grp, main_grp.g, 1, main_grp.gpow(3), 1, 0, CTX, rng)
    assert cp_verify(main_grp, main_grp.g, 1, main_grp.gpow(3), 1, proof, CTX)


def test_cp_honest_and_tampered(main_grp, rng):
    grp = main_grp
    for _ in range(100):
        x = grp.random_scalar(rng)
        g2 = grp.gpow(grp.random_scalar(rng))
        y1, y2 = grp.gpow(x), grp.pow(g2, x)
        proof = cp_prove(grp, grp.g, y1, g2, y2, x, CTX, rng)
        assert cp_verify(grp, grp.g, y1, g2, y2, proof, CTX)
        assert not cp_verify(grp, grp.g, y1, g2, grp.mul(y2, g2), proof, CTX)


def test_enc_proof(main_grp, rng, keypair):
    _, pk = keypair
    c = encrypt(main_grp, pk, main_grp.gpow(9), 123)
    proof = enc_prove(main_grp, pk, c, 9, 123, CTX, rng)
    assert enc_verify(main_grp, pk, c, 9, proof, CTX)
    assert not enc_verify(main_grp, pk, c, 8, proof, CTX)


# -- plaintext equivalence ------------------------------------------------------


def _toy_setup(seed=7):
    rng = Drbg(seed)
    grp = TOY1009
    transcript, keys = dkg_run(grp, 1, 1, rng)
    pk = transcript.public_key(grp)
    return grp, rng, transcript, keys, pk


def test_pep_equal_on_rerandomization():
    grp, rng, transcript, keys, pk = _toy_setup()
    share_keys = transcript.share_keys(grp)
    c1 = encrypt(grp, pk, grp.gpow(4), 11)
    c2 = rerandomize(grp, pk, c1, 200)
    j = pep_run(grp, c1, c2, keys, share_keys, 1, CTX, rng)
    assert j.equal
    ok, why = pep_verify(grp, c1, c2, j, share_keys, 1, CTX)
    assert ok, why


def test_pep_not_equal_for_shifted_plaintext():
    grp, rng, transcript, keys, pk = _toy_setup()
    share_keys = transcript.share_keys(grp)
    c1 = encrypt(grp, pk, grp.gpow(4), 11)
    for _ in range(100):
        c2 = encrypt(grp, pk, grp.gpow(5), grp.random_scalar(rng))
        j = pep_run(grp, c1, c2, keys, share_keys, 1, CTX, rng)
        assert not j.equal
        ok, _ = pep_verify(grp, c1, c2, j, share_keys, 1, CTX)
        assert ok


def test_pep_combined_exponent_is_sum_of_blinds():
    # three trustees blind with known z_i; the combined quotient must be
    # c_diff^(sum z_i), checked directly on the toy group
    rng = Drbg(3)
    grp = TOY1009
    transcript, keys = dkg_run(grp, 3, 2, rng)
    pk = transcript.public_key(grp)
    share_keys = transcript.share_keys(grp)
    c1 = encrypt(grp, pk, grp.gpow(9), 5)
    c2 = encrypt(grp, pk, grp.gpow(2), 8)
    j = pep_run(grp, c1, c2, keys, share_keys, 2, CTX, rng)
    c_diff = ct_quotient(grp, c1, c2)
    z_sum = 0
    for contrib in j.contributions:
        z = next(
            z for z in range(int(grp.q)) if grp.pow(c_diff.c1, z) == contrib.blinded.c1
        )
        z_sum += z
    assert j.combined.c1 == grp.pow(c_diff.c1, z_sum % grp.q)
    assert j.combined.c2 == grp.pow(c_diff.c2, z_sum % grp.q)


def test_pep_corrupt_contribution_is_not_a_verdict():
    grp, rng, transcript, keys, pk = _toy_setup()
    share_keys = transcript.share_keys(grp)
    c1 = encrypt(grp, pk, grp.gpow(4), 11)
    c2 = rerandomize(grp, pk, c1, 17)
    j = pep_run(grp, c1, c2, keys, share_keys, 1, CTX, rng)
    forged = j.contributions[0]
    forged = type(forged)(
        forged.trustee_index,
        Ciphertext(grp.mul(forged.blinded.c1, grp.g), forged.blinded.c2),
        forged.proof,
    )
    with pytest.raises(PepCorruption):
        pep_judge(grp, c1, c2, [forged], j.bundle, share_keys, 1, CTX)
    ok, why = pep_verify(grp, c1, c2, PepJudgement((forged,), j.combined, j.bundle, j.verdict), share_keys, 1, CTX)
    assert not ok and "corrupt contribution" in why


def test_pep_exhaustive_small_message_space():
    grp, rng, transcript, keys, pk = _toy_setup(seed=9)
    share_keys = transcript.share_keys(grp)
    for i in range(4):
        for jdx in range(4):
            ci = encrypt(grp, pk, grp.gpow(i), grp.random_scalar(rng))
            cj = encrypt(grp, pk, grp.gpow(jdx), grp.random_scalar(rng))
            judgement = pep_run(grp, ci, cj, keys, share_keys, 1, CTX, rng)
            assert judgement.equal == (i == jdx)


def test_pep_judgement_serialization_roundtrip():
    grp, rng, transcript, keys, pk = _toy_setup(seed=21)
    share_keys = transcript.share_keys(grp)
    c1 = encrypt(grp, pk, grp.gpow(4), 11)
    c2 = encrypt(grp, pk, grp.gpow(6), 3)
    j = pep_run(grp, c1, c2, keys, share_keys, 1, CTX, rng)
    j2 = PepJudgement.from_bytes(grp, j.to_bytes(grp))
    assert j2 == j
    ok, _ = pep_verify(grp, c1, c2, j2, share_keys, 1, CTX)
    assert ok
