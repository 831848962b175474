"""Threshold cryptosystems on top of stake-weighted BFT consensus.

Core pieces: a Feldman-verifiable threshold evaluation (:mod:`btcsim.tc`),
stake-to-weight rounding (:mod:`btcsim.rounding`), a two-phase consensus state
machine (:mod:`btcsim.consensus`), the slow, tight and fast output protocols
(:mod:`btcsim.protocols`) and a deterministic simulator (:mod:`btcsim.sim`).
"""

from .consensus import ConsensusConfig, ConsensusMachine
from .protocols import PathConfig, deal
from .rounding import WeightProfile, feasible_interval, round_dual, round_weights, verify_profile
from .sim import ExecutionTrace, SimSetup, run
from .tc import BOT, EvalInput, ThresholdParams, comb, evaluate, peval, pver, share_gen

__version__ = "0.1.0"

__all__ = [
    "BOT",
    "ConsensusConfig",
    "ConsensusMachine",
    "EvalInput",
    "ExecutionTrace",
    "PathConfig",
    "SimSetup",
    "ThresholdParams",
    "WeightProfile",
    "comb",
    "deal",
    "evaluate",
    "feasible_interval",
    "peval",
    "pver",
    "round_dual",
    "round_weights",
    "run",
    "share_gen",
    "verify_profile",
]
