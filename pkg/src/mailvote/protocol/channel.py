"""Simulated postal channel between voters and the receiving desk.

A mail piece holds the two paper payloads plus the outer identity of the
envelope. The channel is where the adversary of the postal threat model
lives: pieces can be lost or have their ballot paper swapped in transit.
Every transition is logged so tests can assert exactly what happened.
"""

from __future__ import annotations

from dataclasses import dataclass, field

IN_TRANSIT = "in-transit"
DELIVERED = "delivered"
LOST = "lost"
SUBSTITUTED = "substituted"


class ChannelError(ValueError):
    pass


@dataclass
class MailPiece:
    outer_id: str  # name on the envelope, matched against the roll
    vote_payload: bytes  # ballot paper, inner envelope
    identity_payload: bytes  # identity paper, loose
    state: str = IN_TRANSIT


@dataclass
class PostalChannel:
    pieces: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    def send(self, piece: MailPiece) -> MailPiece:
        if piece.outer_id in self.pieces:
            raise ChannelError(f"{piece.outer_id} already has mail in the channel")
        self.pieces[piece.outer_id] = piece
        self.log.append(f"{piece.outer_id}: mailed")
        return piece

    def _get(self, outer_id: str) -> MailPiece:
        piece = self.pieces.get(outer_id)
        if piece is None:
            raise ChannelError(f"no mail from {outer_id}")
        if piece.state == LOST:
            raise ChannelError(f"mail from {outer_id} was already lost")
        return piece

    def deliver(self, outer_id: str) -> MailPiece:
        piece = self._get(outer_id)
        if piece.state == IN_TRANSIT:
            piece.state = DELIVERED
        self.log.append(f"{outer_id}: delivered")
        return piece

    def lose(self, outer_id: str) -> MailPiece:
        piece = self._get(outer_id)
        if piece.state == DELIVERED:
            raise ChannelError(f"mail from {outer_id} already delivered")
        piece.state = LOST
        self.log.append(f"{outer_id}: lost")
        return piece

    def substitute_vote_paper(self, outer_id: str, new_payload: bytes) -> MailPiece:
        """Adversarial swap of the ballot paper while in transit."""
        piece = self._get(outer_id)
        piece.vote_payload = new_payload
        piece.state = SUBSTITUTED
        self.log.append(f"{outer_id}: ballot paper substituted")
        return piece

    def deliver_all(self) -> list[MailPiece]:
        out = []
        for outer_id, piece in self.pieces.items():
            if piece.state in (IN_TRANSIT, SUBSTITUTED):
                out.append(self.deliver(outer_id))
            elif piece.state == DELIVERED:
                out.append(piece)
        return out

    def delivered(self) -> list[MailPiece]:
        return [
            p for p in self.pieces.values() if p.state in (DELIVERED, SUBSTITUTED)
        ]
