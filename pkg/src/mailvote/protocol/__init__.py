"""Election protocol: six algorithms over a shared bulletin board.

Submodules split by role surface: config parsing, board record codecs,
paper artifacts, the simulated postal channel, the engine that runs
setup/cast/receive/tally/verify, the receipt-freeness view simulator,
and the adversary harness used by the detection tests.
"""

from .config import ConfigError, ElectionConfig
from .engine import (
    CastError,
    ElectionContext,
    ProtocolError,
    SetupError,
    TallyError,
    cast,
    process_votes,
    setup,
    tally,
)
from .papers import IdentityPaper, PaperFormatError, VotePaper
from .verify import (
    ElectionOutcome,
    VerifyReport,
    compute_discrepancy,
    global_verify,
    result,
    voter_verify,
)

__all__ = [
    "CastError",
    "ConfigError",
    "ElectionConfig",
    "ElectionContext",
    "ElectionOutcome",
    "IdentityPaper",
    "PaperFormatError",
    "ProtocolError",
    "SetupError",
    "TallyError",
    "VerifyReport",
    "VotePaper",
    "cast",
    "compute_discrepancy",
    "global_verify",
    "process_votes",
    "result",
    "setup",
    "tally",
    "voter_verify",
]
