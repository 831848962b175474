"""Scenario files: schema, loading, overrides and conversion to a runnable setup.

A scenario is a JSON document. Durations are given in milliseconds and turned
into integer microseconds for the simulator. Threshold entries accept an
integer stake, one of the keywords ``"t_fin"``, ``"n"``, ``"t+1"``, ``"n-t"``,
or a fraction of total stake ``{"frac": 0.66, "round": "floor"}``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import jsonschema

from .consensus import ConsensusConfig
from .protocols import PathConfig
from .rounding import WeightProfile, round_dual, round_weights
from .sim.adversary import AdversaryPolicy, Behavior, DeliveryRule
from .sim.engine import ExecutionTrace, SimSetup, run
from .sim.network import (
    GEO_ONE_WAY_QUANTILES_MS,
    LinkMatrixDelay,
    QuantileTable,
    SampledDelay,
    UniformDelay,
    ms,
    per_sender_matrix,
    sample_link_matrix,
)
from .sim.witness import witness_setup

__all__ = [
    "CANNED",
    "ConfigError",
    "SCENARIO_SCHEMA",
    "apply_overrides",
    "build_setup",
    "canned_names",
    "expand_sweep",
    "load_config",
    "resolve_threshold",
    "run_config",
    "validate_config",
    "weight_profile",
]


class ConfigError(ValueError):
    """The scenario document is malformed or inconsistent."""


_threshold = {
    "oneOf": [
        {"type": "integer", "minimum": 1},
        {"enum": ["t_fin", "n", "t+1", "n-t"]},
        {
            "type": "object",
            "properties": {
                "frac": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "round": {"enum": ["ceil", "floor"]},
            },
            "required": ["frac"],
            "additionalProperties": False,
        },
    ]
}
_pair = {"type": "array", "items": _threshold, "minItems": 2, "maxItems": 2}
_ids = {"type": "array", "items": {"type": "integer", "minimum": 0}}

SCENARIO_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "btcsim scenario",
    "type": "object",
    "required": ["name", "protocol", "parties", "delay", "rounds"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "protocol": {"enum": ["slow", "tight", "fast"]},
        "parties": {
            "type": "object",
            "oneOf": [{"required": ["stakes"]}, {"required": ["equal"]}],
            "properties": {
                "stakes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "equal": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "fault_bound": {"type": "integer", "minimum": 0},
        "t_fin": {"type": "integer", "minimum": 1},
        "thresholds": {
            "type": "object",
            "properties": {"slow": _pair, "fast": _pair},
            "additionalProperties": False,
        },
        "weights": {
            "oneOf": [
                {"const": "stake"},
                {
                    "type": "object",
                    "properties": {
                        "rounding": {
                            "type": "object",
                            "properties": {
                                "scale_hint": {"type": ["string", "number"]},
                                "target_total_weight": {"type": "integer", "minimum": 1},
                            },
                            "additionalProperties": False,
                        }
                    },
                    "required": ["rounding"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {
                        "explicit": {
                            "type": "object",
                            "properties": {
                                "weights": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                "w_slow": {"type": "integer", "minimum": 1},
                                "w_fast": {"type": "integer", "minimum": 1},
                            },
                            "required": ["weights", "w_slow"],
                            "additionalProperties": False,
                        }
                    },
                    "required": ["explicit"],
                    "additionalProperties": False,
                },
            ]
        },
        "delay": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["uniform", "per_link", "per_sender", "sampled"]},
                "delta_ms": {"type": "number", "minimum": 0},
                "matrix_ms": {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0}}},
                "delays_ms": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "quantiles_ms": {
                    "oneOf": [
                        {"const": "geo"},
                        {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                    ]
                },
                "mode": {"enum": ["per_message", "per_link"]},
                "symmetric": {"type": "boolean"},
                "self_delay_ms": {"type": "number", "minimum": 0},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "delta_bound_ms": {"type": "number", "minimum": 0},
        "gst_ms": {"type": "number", "minimum": 0},
        "round_timeout_ms": {"type": "number", "exclusiveMinimum": 0},
        "rounds": {"type": "integer", "minimum": 0},
        "horizon_ms": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
        "adversary": {
            "type": "object",
            "properties": {
                "corrupt": _ids,
                "behaviors": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["kind"],
                            "properties": {
                                "kind": {"enum": ["crash_at", "withhold", "selective_send", "equivocate", "early_reveal", "invalid_shares"]},
                                "time_ms": {"type": "number", "minimum": 0},
                                "path": {"enum": ["fast", "slow", "all"]},
                                "targets": _ids,
                                "rounds": _ids,
                            },
                            "additionalProperties": False,
                        },
                    },
                },
                "schedule": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["delay_ms"],
                        "properties": {
                            "delay_ms": {"type": "number", "minimum": 0},
                            "kind": {"type": "string"},
                            "senders": _ids,
                            "recipients": _ids,
                            "rounds": _ids,
                        },
                        "additionalProperties": False,
                    },
                },
                "witness": {
                    "type": "object",
                    "properties": {
                        "round": {"type": "integer", "minimum": 0},
                        "delta_ms": {"type": "number", "exclusiveMinimum": 0},
                        "eps_ms": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "trace": {"enum": ["none", "events", "full"]},
        "assertions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["check"],
                "properties": {
                    "check": {
                        "enum": [
                            "latency_zero",
                            "latency_equals",
                            "latency_at_most",
                            "grt_equals_gft",
                            "grt_not_before_gft",
                            "grt_after_gft",
                            "agreement",
                            "all_rounds_output",
                            "no_violations",
                            "fast_share_at_least",
                        ]
                    },
                    "ms": {"type": "number"},
                    "round": {"type": "integer"},
                    "fraction": {"type": "number"},
                    "protocols": {"type": "array", "items": {"enum": ["slow", "tight", "fast"]}},
                },
                "additionalProperties": False,
            },
        },
        "sweep": {
            "type": "object",
            "properties": {
                "seeds": {
                    "type": "object",
                    "properties": {"start": {"type": "integer"}, "count": {"type": "integer", "minimum": 1}},
                    "required": ["count"],
                    "additionalProperties": False,
                },
                "grid": {"type": "array", "items": {"type": "object"}},
            },
            "additionalProperties": False,
        },
        "report": {"type": "object"},
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)


def validate_config(cfg: dict) -> dict:
    errors = sorted(_VALIDATOR.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}")
    return cfg


# -- canned scenarios -----------------------------------------------------------

CANNED = (
    "optimistic-uniform",
    "geo-heterogeneous",
    "crash-t",
    "selective-send",
    "impossibility-witness",
    "mainnet-thresholds",
)


def canned_names() -> tuple[str, ...]:
    return CANNED


def _canned_text(name: str) -> str:
    return resources.files("btcsim").joinpath("scenarios", f"{name}.json").read_text()


def load_config(source: str | Path | dict) -> dict:
    """Load a scenario from a dict, a file path or a canned scenario name."""
    if isinstance(source, dict):
        cfg = copy.deepcopy(source)
    else:
        p = Path(source)
        if p.exists():
            text = p.read_text()
        elif str(source) in CANNED:
            text = _canned_text(str(source))
        else:
            raise ConfigError(f"no scenario file or canned scenario named {source!r}")
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    return validate_config(cfg)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides: Iterable[str | tuple[str, Any]]) -> dict:
    """Set dotted keys, e.g. ``delay.delta_ms=50`` or ``protocol=slow``.

    Values are parsed as JSON when possible and kept as strings otherwise.
    """
    out = copy.deepcopy(cfg)
    for item in overrides:
        if isinstance(item, tuple):
            key, value = item
        else:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, raw = item.split("=", 1)
            value = _parse_value(raw)
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = node[part] = {}
            node = nxt
        node[parts[-1]] = value
    return validate_config(out)


# -- building ----------------------------------------------------------------------


# Mainnet-style fractions of total stake.
DEFAULT_SLOW = [{"frac": 0.5}, {"frac": 0.66}]
DEFAULT_FAST = ["t_fin", {"frac": 0.83}]


def resolve_threshold(spec: Any, n: int, t: int, t_fin: int) -> int:
    if isinstance(spec, int):
        return spec
    if spec == "t_fin":
        return t_fin
    if spec == "n":
        return n
    if spec == "t+1":
        return t + 1
    if spec == "n-t":
        return n - t
    if isinstance(spec, dict):
        x = Fraction(str(spec["frac"])) * n
        return math.floor(x) if spec.get("round", "ceil") == "floor" else math.ceil(x)
    raise ConfigError(f"cannot resolve threshold {spec!r}")


def _stakes(cfg: dict) -> tuple[int, ...]:
    parties = cfg["parties"]
    if "stakes" in parties:
        return tuple(parties["stakes"])
    return (1,) * parties["equal"]


def consensus_config(cfg: dict) -> ConsensusConfig:
    try:
        return ConsensusConfig(
            _stakes(cfg),
            cfg.get("fault_bound"),
            cfg.get("t_fin"),
            ms(cfg.get("round_timeout_ms", 1000)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _pairs(cfg: dict, cc: ConsensusConfig) -> tuple[tuple[int, int], tuple[int, int]]:
    n, t, t_fin = cc.total_stake, cc.fault_bound, cc.t_fin
    th = cfg.get("thresholds", {})
    slow = th.get("slow", DEFAULT_SLOW)
    fast = th.get("fast", DEFAULT_FAST)
    return (
        tuple(resolve_threshold(x, n, t, t_fin) for x in slow),
        tuple(resolve_threshold(x, n, t, t_fin) for x in fast),
    )


def weight_profile(cfg: dict, cc: ConsensusConfig | None = None) -> WeightProfile | None:
    """The rounding profile a scenario asks for, or ``None`` for stake weights."""
    cc = cc or consensus_config(cfg)
    spec = cfg.get("weights", "stake")
    if spec == "stake":
        return None
    slow, fast = _pairs(cfg, cc)
    if "explicit" in spec:
        e = spec["explicit"]
        return WeightProfile(tuple(e["weights"]), e["w_slow"], e.get("w_fast"), stake_pairs=(slow, fast))
    r = spec["rounding"]
    if "scale_hint" in r:
        alpha = Fraction(str(r["scale_hint"]))
    elif "target_total_weight" in r:
        alpha = Fraction(r["target_total_weight"], cc.total_stake)
    else:
        alpha = None
    try:
        if cfg["protocol"] == "fast":
            return round_dual(cc.party_stakes, *slow, *fast, scale_hint=alpha)
        return round_weights(cc.party_stakes, *slow, scale_hint=alpha)
    except ValueError as exc:
        raise ConfigError(f"rounding failed: {exc}") from exc


def path_config(cfg: dict, cc: ConsensusConfig | None = None) -> PathConfig:
    cc = cc or consensus_config(cfg)
    proto = cfg["protocol"]
    try:
        if proto == "tight":
            return PathConfig.tight(cc)
        slow, fast = _pairs(cfg, cc)
        prof = weight_profile(cfg, cc)
        if proto == "slow":
            return PathConfig.slow(cc, *slow, prof)
        return PathConfig.fast(cc, slow, fast, prof)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _delay_model(spec: dict, n: int, seed: int):
    kind = spec["kind"]
    if kind == "uniform":
        return UniformDelay(ms(spec.get("delta_ms", 100)), n)
    if kind == "per_link":
        m = spec["matrix_ms"]
        if len(m) != n:
            raise ConfigError("delay matrix size does not match the party count")
        return LinkMatrixDelay([[ms(x) for x in row] for row in m])
    if kind == "per_sender":
        d = spec["delays_ms"]
        if len(d) != n:
            raise ConfigError("per-sender delays do not match the party count")
        return LinkMatrixDelay(per_sender_matrix([ms(x) for x in d]))
    q = spec.get("quantiles_ms", "geo")
    points = GEO_ONE_WAY_QUANTILES_MS if q == "geo" else tuple(tuple(p) for p in q)
    try:
        table = QuantileTable(tuple((float(p), float(v)) for p, v in points))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    dseed = spec.get("seed", seed)
    if spec.get("mode", "per_link") == "per_link":
        m = sample_link_matrix(n, table, dseed, symmetric=spec.get("symmetric", True))
        for i in range(n):
            m[i][i] = ms(spec.get("self_delay_ms", 0))
        return LinkMatrixDelay(m)
    return SampledDelay(table, dseed)


def _adversary(spec: dict | None) -> AdversaryPolicy:
    if not spec:
        return AdversaryPolicy()
    behaviors = {}
    for p, items in spec.get("behaviors", {}).items():
        bs = []
        for b in items:
            bs.append(
                Behavior(
                    kind=b["kind"],
                    time=ms(b.get("time_ms", 0)),
                    path=b.get("path", "all"),
                    targets=frozenset(b.get("targets", ())),
                    rounds=frozenset(b["rounds"]) if "rounds" in b else None,
                )
            )
        behaviors[int(p)] = bs
    rules = [
        DeliveryRule(
            delay=ms(r["delay_ms"]),
            kind=r.get("kind"),
            senders=frozenset(r["senders"]) if "senders" in r else None,
            recipients=frozenset(r["recipients"]) if "recipients" in r else None,
            rounds=frozenset(r["rounds"]) if "rounds" in r else None,
        )
        for r in spec.get("schedule", [])
    ]
    try:
        return AdversaryPolicy.build(spec.get("corrupt", []), behaviors, rules)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_setup(cfg: dict, *, seed: int | None = None, trace: str | None = None) -> SimSetup:
    """Turn a validated scenario into a :class:`SimSetup`."""
    cc = consensus_config(cfg)
    path = path_config(cfg, cc)
    seed = cfg.get("seed", 0) if seed is None else seed
    n = cc.n_parties
    delay = _delay_model(cfg["delay"], n, seed)
    adv_spec = cfg.get("adversary") or {}
    try:
        setup = SimSetup(
            consensus=cc,
            path=path,
            delay=delay,
            n_rounds=cfg["rounds"],
            delta_bound=ms(cfg["delta_bound_ms"]) if "delta_bound_ms" in cfg else None,
            gst=ms(cfg.get("gst_ms", 0)),
            adversary=_adversary(adv_spec),
            seed=seed,
            horizon=ms(cfg["horizon_ms"]) if "horizon_ms" in cfg else None,
            trace_level=trace or cfg.get("trace", "events"),
            name=cfg["name"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    w = adv_spec.get("witness")
    if w is not None:
        try:
            setup, _ = witness_setup(
                setup,
                target_round=w.get("round", 1),
                delta=ms(w["delta_ms"]) if "delta_ms" in w else None,
                eps=ms(w["eps_ms"]) if "eps_ms" in w else None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return setup


def expand_sweep(cfg: dict, seed: int | None = None) -> list[tuple[dict, int]]:
    """All (config, seed) runs a scenario describes. A CLI seed disables seed sweeps."""
    sweep = cfg.get("sweep") or {}
    grid = sweep.get("grid") or [{}]
    if seed is not None:
        seeds = [seed]
    elif "seeds" in sweep:
        s = sweep["seeds"]
        seeds = list(range(s.get("start", 0), s.get("start", 0) + s["count"]))
    else:
        seeds = [cfg.get("seed", 0)]
    runs = []
    for point in grid:
        sub = apply_overrides(cfg, list(point.items())) if point else cfg
        runs.extend((sub, sd) for sd in seeds)
    return runs


@dataclass
class AssertionResult:
    check: str
    passed: bool
    detail: str


def check_assertions(cfg: dict, trace: ExecutionTrace) -> list[AssertionResult]:
    from .report import check_assertion

    out = []
    for a in cfg.get("assertions", []):
        protos = a.get("protocols")
        if protos is not None and trace.protocol not in protos:
            continue
        ok, detail = check_assertion(a, trace)
        out.append(AssertionResult(a["check"], ok, detail))
    return out


def run_config(cfg: dict, *, seed: int | None = None, trace: str | None = None) -> list[tuple[dict, ExecutionTrace]]:
    return [(sub, run(build_setup(sub, seed=sd, trace=trace))) for sub, sd in expand_sweep(cfg, seed)]


__all__ += ["AssertionResult", "check_assertions", "consensus_config", "path_config"]
