"""Information-flow accounting for global finalization and reconstruction times.

The adversary is assumed to see every message the moment it is sent, and to
hold every share unit of the corrupt parties from the start. A round's value is
globally finalized once honest prefinalizations for it reach ``t_fin`` minus the
corrupt stake (the corrupt stake can always be added). It is globally
reconstructed once the adversary sees enough distinct share units on some
sharing to combine the output for that round and value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..tc import Value

__all__ = ["FlowLedger"]


@dataclass
class FlowLedger:
    stakes: Sequence[int]
    weights: Sequence[int]
    corrupt: frozenset[int]
    t_fin: int
    thresholds: dict[str, int]  # sharing name -> units needed to combine
    prefin_stake: dict = field(default_factory=dict)  # (r, v) -> honest stake
    prefinalizers: dict = field(default_factory=dict)  # (r, v) -> {party: time}
    revealed: dict = field(default_factory=dict)  # (r, v, sharing) -> {party: time}
    visible: dict = field(default_factory=dict)  # (r, v, sharing) -> unit count
    gft_at: dict = field(default_factory=dict)  # r -> (time, value)
    crossing: dict = field(default_factory=dict)  # (r, v) -> (time, sharing)
    anomalies: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.corrupt_stake = sum(self.stakes[p] for p in self.corrupt)
        self.corrupt_weight = sum(self.weights[p] for p in self.corrupt)
        self.gf_target = self.t_fin - self.corrupt_stake
        for name, th in self.thresholds.items():
            if self.corrupt_weight >= th:
                self.anomalies.append(
                    f"corrupt parties alone hold {self.corrupt_weight} >= {th} units on {name}"
                )

    def prefinalize(self, party: int, r: int, value: Value, time: int) -> None:
        key = (r, value)
        who = self.prefinalizers.setdefault(key, {})
        if party in who:
            return
        who[party] = time
        stake = self.prefin_stake.get(key, 0) + self.stakes[party]
        self.prefin_stake[key] = stake
        if stake >= self.gf_target:
            prev = self.gft_at.get(r)
            if prev is None:
                self.gft_at[r] = (time, value)
            elif prev[1] != value:
                self.anomalies.append(f"round {r}: two values reached global finalization")

    def reveal(self, party: int, r: int, value: Value, sharing: str, time: int) -> None:
        key = (r, value, sharing)
        who = self.revealed.setdefault(key, {})
        if party in who:
            return
        who[party] = time
        units = self.visible.get(key, self.corrupt_weight) + self.weights[party]
        self.visible[key] = units
        if units >= self.thresholds[sharing]:
            ck = (r, value)
            prev = self.crossing.get(ck)
            if prev is None or time < prev[0]:
                self.crossing[ck] = (time, sharing)

    # -- queries -------------------------------------------------------------

    def gft(self, r: int) -> int | None:
        got = self.gft_at.get(r)
        return None if got is None else got[0]

    def gft_value(self, r: int) -> Value | None:
        got = self.gft_at.get(r)
        return None if got is None else got[1]

    def grt(self, r: int) -> int | None:
        """Reconstruction time of the globally finalized value of round ``r``."""
        v = self.gft_value(r)
        if v is None:
            return None
        got = self.crossing.get((r, v))
        return None if got is None else got[0]

    def grt_sharing(self, r: int) -> str | None:
        v = self.gft_value(r)
        got = self.crossing.get((r, v)) if v is not None else None
        return None if got is None else got[1]

    def secrecy_breaches(self) -> list[tuple[int, Value, str]]:
        """Inputs the adversary could combine although they never finalized."""
        out = []
        for (r, v), (_, sharing) in sorted(self.crossing.items(), key=lambda kv: (kv[0][0], kv[1][0])):
            if self.gft_value(r) != v:
                out.append((r, v, sharing))
        return out
