"""Static adversaries: a fixed corrupt set, per-party behaviors and delivery rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

__all__ = [
    "AdversaryPolicy",
    "Behavior",
    "BEHAVIOR_KINDS",
    "DeliveryRule",
]

BEHAVIOR_KINDS = (
    "crash_at",
    "withhold",
    "selective_send",
    "equivocate",
    "early_reveal",
    "invalid_shares",
)
PATHS = ("fast", "slow", "all")


@dataclass(frozen=True)
class Behavior:
    """What one corrupt party does differently from the honest protocol.

    ``path`` selects share messages: ``"fast"`` is the fast sharing, ``"slow"``
    every other share message, ``"all"`` both.
    """

    kind: str
    time: int = 0
    path: str = "all"
    targets: frozenset[int] = frozenset()
    rounds: frozenset[int] | None = None  # None: every round

    def __post_init__(self) -> None:
        if self.kind not in BEHAVIOR_KINDS:
            raise ValueError(f"unknown behavior {self.kind!r}")
        if self.path not in PATHS:
            raise ValueError(f"unknown share path {self.path!r}")

    def covers(self, r: int) -> bool:
        return self.rounds is None or r in self.rounds

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "crash_at":
            d["time_us"] = self.time
        if self.kind in ("withhold", "selective_send", "invalid_shares"):
            d["path"] = self.path
        if self.kind == "selective_send":
            d["targets"] = sorted(self.targets)
        if self.rounds is not None:
            d["rounds"] = sorted(self.rounds)
        return d


@dataclass(frozen=True)
class DeliveryRule:
    """Deliver matching messages ``delay`` after they are sent.

    ``None`` fields match anything. Rules apply in listed order; the first hit
    wins. After GST the resulting delay is capped at the delay bound.
    """

    delay: int
    kind: str | None = None
    senders: frozenset[int] | None = None
    recipients: frozenset[int] | None = None
    rounds: frozenset[int] | None = None

    def matches(self, kind: str, sender: int, recipient: int, r: int) -> bool:
        return (
            (self.kind is None or self.kind == kind)
            and (self.senders is None or sender in self.senders)
            and (self.recipients is None or recipient in self.recipients)
            and (self.rounds is None or r in self.rounds)
        )

    def to_dict(self) -> dict:
        d: dict = {"delay_us": self.delay}
        for name in ("kind", "senders", "recipients", "rounds"):
            v = getattr(self, name)
            if v is not None:
                d[name] = sorted(v) if isinstance(v, frozenset) else v
        return d


@dataclass(frozen=True)
class AdversaryPolicy:
    corrupt: frozenset[int] = frozenset()
    behaviors: dict[int, tuple[Behavior, ...]] = field(default_factory=dict)
    schedule: tuple[DeliveryRule, ...] = ()

    def __post_init__(self) -> None:
        for p in self.behaviors:
            if p not in self.corrupt:
                raise ValueError(f"behavior given for honest party {p}")

    @classmethod
    def none(cls) -> AdversaryPolicy:
        return cls()

    @classmethod
    def build(
        cls,
        corrupt: Iterable[int] = (),
        behaviors: dict[int, Iterable[Behavior]] | None = None,
        schedule: Iterable[DeliveryRule] = (),
    ) -> AdversaryPolicy:
        return cls(
            frozenset(corrupt),
            {p: tuple(bs) for p, bs in (behaviors or {}).items()},
            tuple(schedule),
        )

    def corrupt_stake(self, stakes) -> int:
        return sum(stakes[p] for p in self.corrupt)

    def behaviors_of(self, party: int, kind: str) -> list[Behavior]:
        return [b for b in self.behaviors.get(party, ()) if b.kind == kind]

    def crash_time(self, party: int) -> int | None:
        times = [b.time for b in self.behaviors_of(party, "crash_at")]
        return min(times) if times else None

    def validate(self, stakes, fault_bound: int) -> None:
        n = len(stakes)
        if any(not 0 <= p < n for p in self.corrupt):
            raise ValueError("corrupt party index out of range")
        cs = self.corrupt_stake(stakes)
        if cs > fault_bound:
            raise ValueError(f"corrupt stake {cs} exceeds fault bound {fault_bound}")
        for bs in self.behaviors.values():
            for b in bs:
                if any(not 0 <= x < n for x in b.targets):
                    raise ValueError("selective_send target out of range")
        for rule in self.schedule:
            if rule.delay < 0:
                raise ValueError("delivery rule delay must be non-negative")

    def to_dict(self) -> dict:
        return {
            "corrupt": sorted(self.corrupt),
            "behaviors": {
                str(p): [b.to_dict() for b in bs] for p, bs in sorted(self.behaviors.items())
            },
            "schedule": [r.to_dict() for r in self.schedule],
        }
