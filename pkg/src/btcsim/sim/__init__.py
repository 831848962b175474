"""Discrete-event simulation of consensus with threshold output."""

from .adversary import AdversaryPolicy, Behavior, DeliveryRule
from .engine import ExecutionTrace, SimSetup, World, run, value_label
from .ledger import FlowLedger
from .network import (
    GEO_ONE_WAY_QUANTILES_MS,
    DelayModel,
    LinkMatrixDelay,
    QuantileTable,
    SampledDelay,
    UniformDelay,
    ms,
    per_sender_matrix,
    sample_link_matrix,
)

__all__ = [
    "AdversaryPolicy",
    "Behavior",
    "DelayModel",
    "DeliveryRule",
    "ExecutionTrace",
    "FlowLedger",
    "GEO_ONE_WAY_QUANTILES_MS",
    "LinkMatrixDelay",
    "QuantileTable",
    "SampledDelay",
    "SimSetup",
    "UniformDelay",
    "World",
    "ms",
    "per_sender_matrix",
    "run",
    "sample_link_matrix",
    "value_label",
]
