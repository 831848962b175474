"""Latency reports, scenario assertions and human-readable round timelines.

All times come from simulated clocks, so identical runs give identical bytes.
"""

from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .protocols import outputs_agree
from .sim.engine import ExecutionTrace
from .sim.network import ms

__all__ = [
    "LatencyReport",
    "MAINNET_REFERENCE_MS",
    "RoundRow",
    "check_assertion",
    "compare_paths",
    "explain_trace",
    "format_ms",
    "render_table",
]

# Measured averages of the production deployment (slow path, fast path). Shown
# next to simulated ratios as context only.
MAINNET_REFERENCE_MS = {"slow": 85.5, "fast": 24.7}


def format_ms(us: int | float | None) -> str:
    return "-" if us is None else f"{us / 1000:.3f}"


@dataclass(frozen=True)
class RoundRow:
    round: int
    value: str
    gft_us: int | None
    grt_us: int | None
    latency_us: int | None
    paths: tuple[str, ...]

    @property
    def grt_minus_gft_us(self) -> int | None:
        if self.gft_us is None or self.grt_us is None:
            return None
        return self.grt_us - self.gft_us


@dataclass
class LatencyReport:
    """Per-round overhead ``L_r`` (max over honest parties) with aggregates."""

    name: str
    protocol: str
    seed: int
    rows: list[RoundRow]
    path_mix: dict[str, int]
    party_mean_us: float | None
    violations: list[str] = field(default_factory=list)

    @classmethod
    def from_trace(cls, trace: ExecutionTrace) -> LatencyReport:
        rows = [
            RoundRow(
                d["round"], d["value"], d["gft_us"], d["grt_us"], d["latency_us"], tuple(d["paths"])
            )
            for d in trace.summary_rows()
        ]
        mix: Counter = Counter()
        per_round: dict[int, list[int]] = {}
        for p in trace.honest:
            for o in trace.outputs[p]:
                mix[o.path] += 1
                per_round.setdefault(o.round, []).append(o.output_time - o.finalize_time)
        party_mean = (
            statistics.fmean(statistics.fmean(v) for v in per_round.values()) if per_round else None
        )
        return cls(
            trace.name, trace.protocol, trace.seed, rows, dict(sorted(mix.items())), party_mean,
            list(trace.violations),
        )

    # -- aggregates ------------------------------------------------------------

    @property
    def latencies_us(self) -> list[int]:
        return [r.latency_us for r in self.rows if r.latency_us is not None]

    @property
    def mean_us(self) -> float | None:
        lat = self.latencies_us
        return statistics.fmean(lat) if lat else None

    @property
    def median_us(self) -> float | None:
        lat = self.latencies_us
        return statistics.median(lat) if lat else None

    @property
    def max_us(self) -> int | None:
        lat = self.latencies_us
        return max(lat) if lat else None

    @property
    def fast_fraction(self) -> float | None:
        total = sum(self.path_mix.values())
        return self.path_mix.get("fast", 0) / total if total else None

    @property
    def grt_gft_deltas_us(self) -> list[int]:
        return [d for d in (r.grt_minus_gft_us for r in self.rows) if d is not None]

    def to_dict(self) -> dict:
        deltas = self.grt_gft_deltas_us
        return {
            "name": self.name,
            "protocol": self.protocol,
            "seed": self.seed,
            "rounds": [asdict(r) | {"paths": list(r.paths)} for r in self.rows],
            "latency_us": {
                "mean": self.mean_us,
                "median": self.median_us,
                "max": self.max_us,
                "party_mean": self.party_mean_us,
            },
            "path_mix": self.path_mix,
            "grt_minus_gft_us": {
                "min": min(deltas) if deltas else None,
                "max": max(deltas) if deltas else None,
                "positive_rounds": sum(1 for d in deltas if d > 0),
            },
            "violations": self.violations,
        }

    def summary_line(self) -> str:
        ff = self.fast_fraction
        return (
            f"{self.name} [{self.protocol}, seed {self.seed}] rounds={len(self.latencies_us)} "
            f"L mean={format_ms(self.mean_us)} median={format_ms(self.median_us)} "
            f"max={format_ms(self.max_us)} ms; party-mean={format_ms(self.party_mean_us)} ms"
            + ("" if ff is None else f"; fast share {ff:.1%}")
        )


def render_table(report: LatencyReport) -> str:
    head = f"{'round':>5}  {'value':<12} {'GFT ms':>11} {'GRT ms':>11} {'L ms':>9}  path"
    lines = [report.summary_line(), head]
    for r in report.rows:
        lines.append(
            f"{r.round:>5}  {r.value:<12} {format_ms(r.gft_us):>11} {format_ms(r.grt_us):>11} "
            f"{format_ms(r.latency_us):>9}  {','.join(r.paths) or '-'}"
        )
    if report.violations:
        lines.append("violations:")
        lines.extend(f"  {v}" for v in report.violations)
    return "\n".join(lines) + "\n"


def compare_paths(fast: LatencyReport, slow: LatencyReport) -> dict:
    """Mean overhead of the fast path relative to the slow path, with the reference figures."""
    ratio = None
    if fast.mean_us is not None and slow.mean_us:
        ratio = fast.mean_us / slow.mean_us
    ref = MAINNET_REFERENCE_MS
    return {
        "fast_mean_ms": None if fast.mean_us is None else fast.mean_us / 1000,
        "slow_mean_ms": None if slow.mean_us is None else slow.mean_us / 1000,
        "ratio": ratio,
        "fast_party_mean_ms": None if fast.party_mean_us is None else fast.party_mean_us / 1000,
        "slow_party_mean_ms": None if slow.party_mean_us is None else slow.party_mean_us / 1000,
        "fast_share": fast.fast_fraction,
        "reference": {
            "slow_ms": ref["slow"],
            "fast_ms": ref["fast"],
            "ratio": round(ref["fast"] / ref["slow"], 3),
            "note": "production measurement, shown for context and never asserted",
        },
    }


# -- assertions ----------------------------------------------------------------------


def _rounds_with(trace: ExecutionTrace, pred) -> list[int]:
    return [r for r in range(trace.n_rounds) if pred(r)]


def check_assertion(a: dict, trace: ExecutionTrace) -> tuple[bool, str]:
    """Evaluate one scenario assertion against a trace."""
    check = a["check"]
    lats = trace.latencies()
    if check in ("latency_zero", "latency_equals", "latency_at_most"):
        target = 0 if check == "latency_zero" else ms(a["ms"])
        if check == "latency_at_most":
            bad = {r: v for r, v in lats.items() if v > target}
        else:
            bad = {r: v for r, v in lats.items() if v != target}
        if not lats:
            return False, "no round produced an output"
        return not bad, f"{len(lats)} rounds, mismatches {dict(list(bad.items())[:5])}"
    if check in ("grt_equals_gft", "grt_not_before_gft"):
        bad = []
        for r in trace.rounds_defined():
            g, h = trace.gft(r), trace.grt(r)
            if g is None or h is None:
                continue
            if (check == "grt_equals_gft" and h != g) or h < g:
                bad.append((r, g, h))
        return not bad, f"offending (round, GFT, GRT): {bad[:5]}"
    if check == "grt_after_gft":
        r = a.get("round", 1)
        g, h = trace.gft(r), trace.grt(r)
        ok = g is not None and h is not None and h > g
        return ok, f"round {r}: GFT={format_ms(g)} ms GRT={format_ms(h)} ms"
    if check == "agreement":
        streams = [trace.outputs[p] for p in trace.honest]
        ordered = all(
            all(a_.round < b.round for a_, b in zip(s, s[1:])) for s in streams
        )
        ok = outputs_agree(streams) and ordered
        return ok, "honest output streams agree and are round-increasing" if ok else "disagreement"
    if check == "all_rounds_output":
        missing = {
            p: [r for r in range(trace.n_rounds) if r not in {o.round for o in trace.outputs[p]}]
            for p in trace.honest
        }
        missing = {p: m for p, m in missing.items() if m}
        return not missing, f"missing outputs: {dict(list(missing.items())[:3])}"
    if check == "no_violations":
        return not trace.violations, "; ".join(trace.violations[:3]) or "none"
    if check == "fast_share_at_least":
        rep = LatencyReport.from_trace(trace)
        ff = rep.fast_fraction or 0.0
        return ff >= a["fraction"], f"fast share {ff:.3f}"
    raise ValueError(f"unknown assertion {check!r}")


# -- timelines ------------------------------------------------------------------------

_ORDER = {
    "send": 0, "deliver": 1, "timeout": 2, "qc": 3, "prefinalize": 4, "equivocation": 5,
    "finalize": 6, "reconstruct": 7, "output": 8, "violation": 9,
}


def _records(source: str | Iterable[dict]) -> list[dict]:
    if isinstance(source, str):
        return [json.loads(line) for line in source.splitlines() if line.strip()]
    return list(source)


def explain_trace(source: str | Sequence[dict], round_: int) -> str:
    """Timeline of one round with GFT and GRT markers.

    ``source`` is NDJSON text or already parsed records. Raises ``KeyError``
    when the round is absent from the trace.
    """
    recs = _records(source)
    ledger = next((r for r in recs if r.get("ev") == "ledger" and r.get("round") == round_), None)
    events = [r for r in recs if r.get("round") == round_ and r.get("ev") in _ORDER]
    if ledger is None and not events:
        raise KeyError(f"round {round_} does not appear in the trace")
    head = next((r for r in recs if r.get("ev") == "header"), {})
    marks = []
    if ledger is not None:
        if ledger.get("gft_us") is not None:
            marks.append({"t": ledger["gft_us"], "ev": "GFT", "value": ledger["value"]})
        if ledger.get("grt_us") is not None:
            marks.append({"t": ledger["grt_us"], "ev": "GRT", "value": ledger["value"]})
    items = sorted(
        [(e["t"], _ORDER[e["ev"]], i, e) for i, e in enumerate(events)]
        + [(m["t"], 10, i, m) for i, m in enumerate(marks)],
        key=lambda x: x[:3],
    )
    lines = [
        f"{head.get('name', '')} [{head.get('protocol', '?')}] round {round_}".strip(),
    ]
    if ledger is not None:
        lines.append(
            f"value {ledger['value']}  GFT {format_ms(ledger['gft_us'])} ms  "
            f"GRT {format_ms(ledger['grt_us'])} ms  L {format_ms(ledger['latency_us'])} ms"
        )
    for t, _, _, e in items:
        ev = e["ev"]
        if ev in ("GFT", "GRT"):
            lines.append(f"{format_ms(t):>12} ms  ===== {ev} ({e['value']})")
            continue
        who = f"p{e['party']}"
        extra = ""
        if ev == "send":
            extra = f" {e['kind']} -> {e['to']}"
        elif ev == "deliver":
            extra = f" {e['kind']} from p{e['sender']}"
        elif ev in ("reconstruct", "output") and "path" in e:
            extra = f" via {e['path']}"
        if ev == "output" and "latency_us" in e:
            extra += f" (L {format_ms(e['latency_us'])} ms)"
        lines.append(f"{format_ms(t):>12} ms  {who:<5} {ev:<12} {e.get('value', '')}{extra}")
    return "\n".join(lines) + "\n"
