"""Printed paper artifacts and the identity double envelope.

Paper 1 carries the ballot: the human-readable selection next to the
encrypted MAC parameters and their knowledge proofs, all on one line so a
scanner (or a test) recovers exactly what was printed. Paper 2 is just the
voter's identity. The double envelope pairs a plaintext identity on the
outside with an encrypted identity inside; it is prepared during setup and
is the one artifact whose honesty the receiving step must trust for
privacy (never for integrity).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..codec import Reader, pack_str
from ..groups import Ciphertext, GroupProfile
from ..zkp import PokCiphertext

MAGIC_VOTE = "POSTMARK1"
MAGIC_IDENTITY = "POSTMARK2"


class PaperFormatError(ValueError):
    pass


def _split(payload: bytes, magic: str, parts: int) -> list[str]:
    try:
        text = payload.decode("ascii")
    except UnicodeDecodeError:
        raise PaperFormatError("payload is not ascii") from None
    if text.endswith("\n"):
        text = text[:-1]
    fields = text.split("|")
    if len(fields) != parts or fields[0] != magic:
        raise PaperFormatError(f"not a {magic} payload")
    return fields


@dataclass(frozen=True)
class VotePaper:
    election_hash: bytes
    vote_index: int
    vote_string: str
    param_cts: tuple
    proofs: tuple

    def payload(self, grp: GroupProfile) -> bytes:
        cts = b"".join(c.to_bytes(grp) for c in self.param_cts)
        pfs = b"".join(p.to_bytes(grp) for p in self.proofs)
        line = "|".join(
            (
                MAGIC_VOTE,
                self.election_hash.hex(),
                str(self.vote_index),
                self.vote_string,
                cts.hex(),
                pfs.hex(),
            )
        )
        return line.encode("ascii") + b"\n"

    @classmethod
    def parse(cls, grp: GroupProfile, payload: bytes) -> "VotePaper":
        fields = _split(payload, MAGIC_VOTE, 6)
        try:
            election_hash = bytes.fromhex(fields[1])
            vote_index = int(fields[2])
            ct_blob = bytes.fromhex(fields[4])
            proof_blob = bytes.fromhex(fields[5])
        except ValueError:
            raise PaperFormatError("bad numeric or hex field") from None
        if vote_index < 0 or len(election_hash) != 32:
            raise PaperFormatError("bad election hash or vote index")
        try:
            rd = Reader(ct_blob)
            cts = []
            while rd.pos < len(ct_blob):
                cts.append(Ciphertext.from_reader(grp, rd))
            rd = Reader(proof_blob)
            proofs = []
            while rd.pos < len(proof_blob):
                proofs.append(PokCiphertext.from_reader(grp, rd))
        except ValueError as exc:
            raise PaperFormatError(f"bad ciphertext or proof encoding: {exc}") from None
        if len(cts) != len(proofs) or not cts:
            raise PaperFormatError("ciphertext and proof counts differ")
        return cls(election_hash, vote_index, fields[3], tuple(cts), tuple(proofs))


@dataclass(frozen=True)
class IdentityPaper:
    election_hash: bytes
    voter_id: str

    def payload(self) -> bytes:
        line = "|".join((MAGIC_IDENTITY, self.election_hash.hex(), self.voter_id))
        return line.encode("ascii") + b"\n"

    @classmethod
    def parse(cls, payload: bytes) -> "IdentityPaper":
        fields = _split(payload, MAGIC_IDENTITY, 3)
        try:
            election_hash = bytes.fromhex(fields[1])
        except ValueError:
            raise PaperFormatError("bad election hash") from None
        if len(election_hash) != 32 or not fields[2]:
            raise PaperFormatError("bad election hash or voter id")
        return cls(election_hash, fields[2])


@dataclass(frozen=True)
class DoubleEnvelope:
    voter_id: str  # outer, plaintext
    encrypted_id: Ciphertext  # inner

    def to_bytes(self, grp: GroupProfile) -> bytes:
        return pack_str(self.voter_id) + self.encrypted_id.to_bytes(grp)

    @classmethod
    def from_reader(cls, grp: GroupProfile, rd: Reader) -> "DoubleEnvelope":
        voter_id = rd.str_()
        encrypted_id = Ciphertext.from_reader(grp, rd)
        return cls(voter_id, encrypted_id)
