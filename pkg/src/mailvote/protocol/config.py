"""Election configuration and the selection-string vocabulary.

The allowed-selection list is derived from the candidates and the ballot
rule; a vote index is a position in that list, and everything downstream
(encoding, tally decoding, paper payloads) speaks indices. The canonical
byte form of the config is hashed into every proof context, so two runs
agree on contexts exactly when they agree on the election.
"""

from __future__ import annotations

import hashlib
import itertools
import re
from dataclasses import dataclass, field

from ..codec import Reader, pack_list, pack_str, pack_u32
from ..groups import DEFAULT_VOTE_BOUND, PROFILES

RULES = ("choose-one", "ranked")

_NAME = re.compile(r"[A-Za-z0-9_.-]+")


class ConfigError(ValueError):
    pass


def _selections(rule: str, candidates: list[str]) -> list[str]:
    if rule == "choose-one":
        return list(candidates)
    if rule == "ranked":
        out = []
        for perm in itertools.permutations(candidates):
            out.append(",".join(f"{i + 1}:{c}" for i, c in enumerate(perm)))
        return out
    raise ConfigError(f"unknown ballot rule {rule!r}")


@dataclass
class ElectionConfig:
    candidates: tuple[str, ...]
    rule: str
    roll: tuple[str, ...]
    trustees: int
    threshold: int
    error_tolerance: int  # detected discrepancies tolerated by policy
    mix_stages: int = 2
    profile: str = "main"
    allow_toy: bool = False
    selections: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        self.candidates = tuple(self.candidates)
        self.roll = tuple(self.roll)
        if not self.candidates:
            raise ConfigError("no candidates")
        for name in self.candidates:
            if not _NAME.fullmatch(name):
                raise ConfigError(f"bad candidate name {name!r}")
        if len(set(self.candidates)) != len(self.candidates):
            raise ConfigError("duplicate candidate")
        if self.rule not in RULES:
            raise ConfigError(f"unknown ballot rule {self.rule!r}")
        if not self.roll:
            raise ConfigError("empty voter roll")
        for vid in self.roll:
            if not _NAME.fullmatch(vid):
                raise ConfigError(f"bad voter id {vid!r}")
        if len(set(self.roll)) != len(self.roll):
            raise ConfigError("duplicate voter id on roll")
        if not 1 <= self.threshold <= self.trustees:
            raise ConfigError("need 1 <= threshold <= trustees")
        if self.error_tolerance < 1:
            raise ConfigError("error tolerance must be >= 1")
        if self.mix_stages < 1:
            raise ConfigError("need at least one mix stage")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown group profile {self.profile!r}")
        if PROFILES[self.profile].is_toy and not self.allow_toy:
            raise ConfigError("toy group profiles need allow_toy")
        self.selections = tuple(_selections(self.rule, self.candidates))
        if len(self.selections) >= DEFAULT_VOTE_BOUND:
            raise ConfigError("selection list exceeds the decodable vote domain")

    def vote_index(self, selection: str) -> int:
        try:
            return self.selections.index(selection)
        except ValueError:
            raise ConfigError(f"selection {selection!r} is not on the ballot") from None

    def roll_index(self, voter_id: str) -> int:
        try:
            return self.roll.index(voter_id)
        except ValueError:
            raise ConfigError(f"voter {voter_id!r} is not on the roll") from None

    def to_bytes(self) -> bytes:
        return b"".join(
            (
                pack_str(self.profile),
                pack_str(self.rule),
                pack_list(self.candidates, pack_str),
                pack_list(self.roll, pack_str),
                pack_u32(self.trustees),
                pack_u32(self.threshold),
                pack_u32(self.error_tolerance),
                pack_u32(self.mix_stages),
                pack_u32(1 if self.allow_toy else 0),
            )
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "ElectionConfig":
        rd = Reader(data)
        profile = rd.str_()
        rule = rd.str_()
        candidates = rd.list_(lambda r: r.str_())
        roll = rd.list_(lambda r: r.str_())
        n, k, d, stages, toy = (rd.u32() for _ in range(5))
        rd.done()
        return cls(candidates, rule, roll, n, k, d, stages, profile, bool(toy))

    def election_hash(self) -> bytes:
        return hashlib.sha256(b"mailvote-election-v1" + self.to_bytes()).digest()

    # -- human-editable key/value file ---------------------------------------

    def to_text(self) -> str:
        lines = [
            f"candidates = {', '.join(self.candidates)}",
            f"rule = {self.rule}",
            f"roll = {', '.join(self.roll)}",
            f"trustees = {self.trustees}, {self.threshold}",
            f"error-tolerance = {self.error_tolerance}",
            f"mix-stages = {self.mix_stages}",
            f"profile = {self.profile}",
        ]
        if self.allow_toy:
            lines.append("allow-toy = yes")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ElectionConfig":
        fields: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in fields:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            fields[key] = value
        for required in ("candidates", "rule", "roll", "trustees"):
            if required not in fields:
                raise ConfigError(f"missing key {required!r}")

        def split(value: str) -> list[str]:
            return [part.strip() for part in value.split(",") if part.strip()]

        trustees = split(fields["trustees"])
        if len(trustees) != 2:
            raise ConfigError("trustees takes 'n, k'")
        try:
            n, k = int(trustees[0]), int(trustees[1])
            d = int(fields.get("error-tolerance", "1"))
            stages = int(fields.get("mix-stages", "2"))
        except ValueError as exc:
            raise ConfigError(f"bad integer field: {exc}") from None
        return cls(
            candidates=split(fields["candidates"]),
            rule=fields["rule"],
            roll=split(fields["roll"]),
            trustees=n,
            threshold=k,
            error_tolerance=d,
            mix_stages=stages,
            profile=fields.get("profile", "main"),
            allow_toy=fields.get("allow-toy", "no").lower() in ("yes", "true", "1"),
        )
