"""Stake-to-weight rounding with subset guarantees.

Given integer stakes and a stake threshold pair ``(t_sec, t_rec)``, produce small
integer weights and a weight threshold ``w`` such that

* G1: every coalition with stake ``< t_sec`` has weight ``< w``;
* G2: every coalition with stake ``>= t_rec`` has weight ``>= w``.

Weights come from scaling stakes by a rational factor and rounding half-up.
The set of thresholds ``w`` satisfying both guarantees for those weights is an
integer interval, which is computed exactly with a small knapsack over weight
totals. If the interval is empty the scale factor is doubled and the procedure
retried, up to a bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "InfeasibleRoundingError",
    "StakeProfile",
    "ThresholdPair",
    "VerifyResult",
    "WeightProfile",
    "feasible_interval",
    "round_dual",
    "round_half_up",
    "round_weights",
    "verify_profile",
]

MAX_ESCALATIONS = 24
EXHAUSTIVE_LIMIT = 20


class InfeasibleRoundingError(ValueError):
    """No weight threshold satisfies both guarantees within the escalation budget."""


@dataclass(frozen=True)
class StakeProfile:
    stakes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.stakes:
            raise ValueError("stake profile is empty")
        if any(int(s) != s or s <= 0 for s in self.stakes):
            raise ValueError("stakes must be positive integers")

    @classmethod
    def of(cls, stakes: Sequence[int] | StakeProfile) -> StakeProfile:
        if isinstance(stakes, StakeProfile):
            return stakes
        return cls(tuple(int(s) for s in stakes))

    @property
    def total(self) -> int:
        return sum(self.stakes)

    def __len__(self) -> int:
        return len(self.stakes)


@dataclass(frozen=True)
class ThresholdPair:
    """A stake-denominated secrecy/reconstruction pair and its weight threshold."""

    t_sec: int
    t_rec: int
    w: int


@dataclass(frozen=True)
class WeightProfile:
    weights: tuple[int, ...]
    w_slow: int
    w_fast: int | None = None
    alpha: Fraction = Fraction(1)
    escalations: int = 0
    stake_pairs: tuple[tuple[int, int], ...] = field(default=())

    @property
    def total_weight(self) -> int:
        return sum(self.weights)

    def pairs(self) -> list[ThresholdPair]:
        ws = [self.w_slow] if self.w_fast is None else [self.w_slow, self.w_fast]
        return [ThresholdPair(ts, tr, w) for (ts, tr), w in zip(self.stake_pairs, ws)]

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "total_weight": self.total_weight,
            "w_slow": self.w_slow,
            "w_fast": self.w_fast,
            "alpha": f"{self.alpha.numerator}/{self.alpha.denominator}",
            "escalations": self.escalations,
            "stake_pairs": [list(p) for p in self.stake_pairs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> WeightProfile:
        return cls(
            weights=tuple(d["weights"]),
            w_slow=d["w_slow"],
            w_fast=d.get("w_fast"),
            alpha=Fraction(d.get("alpha", "1")),
            escalations=d.get("escalations", 0),
            stake_pairs=tuple(tuple(p) for p in d.get("stake_pairs", ())),
        )


def round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def _scale(stakes: Sequence[int], alpha: Fraction) -> tuple[int, ...]:
    return tuple(round_half_up(s * alpha) for s in stakes)


def _extreme_stakes(stakes: Sequence[int], weights: Sequence[int]) -> tuple[list, list]:
    """For each achievable weight total W: min and max stake of a coalition of weight W.

    Unreachable totals hold ``None``.
    """
    total_w = sum(weights)
    inf = sum(stakes) + 1
    lo = [inf] * (total_w + 1)
    hi = [-1] * (total_w + 1)
    lo[0] = hi[0] = 0
    reach = 0
    for s, w in zip(stakes, weights):
        if w == 0:
            # Free stake: never helps the minimum, always joins the maximum.
            hi = [h + s if h >= 0 else h for h in hi]
            continue
        for W in range(reach, -1, -1):
            if hi[W] >= 0:
                if lo[W] + s < lo[W + w]:
                    lo[W + w] = lo[W] + s
                if hi[W] + s > hi[W + w]:
                    hi[W + w] = hi[W] + s
        reach += w
    return (
        [v if v < inf else None for v in lo],
        [v if v >= 0 else None for v in hi],
    )


def feasible_interval(
    stakes: Sequence[int], weights: Sequence[int], t_sec: int, t_rec: int
) -> tuple[int, int]:
    """The inclusive range of ``w`` satisfying G1 and G2 (empty when ``lo > hi``)."""
    min_stake, max_stake = _extreme_stakes(stakes, weights)
    lo = 1 + max(W for W, s in enumerate(min_stake) if s is not None and s < t_sec)
    hi_candidates = [W for W, s in enumerate(max_stake) if s is not None and s >= t_rec]
    hi = min(hi_candidates) if hi_candidates else -1
    return lo, hi


def _check_pair(total: int, t_sec: int, t_rec: int) -> None:
    if not 0 < t_sec < t_rec <= total:
        raise ValueError(f"need 0 < t_sec < t_rec <= total stake, got {t_sec}, {t_rec}, {total}")


def _pick(alpha: Fraction, t_sec: int, t_rec: int, lo: int, hi: int) -> int:
    target = round_half_up(alpha * (t_sec + t_rec) / 2)
    return min(max(target, lo), hi)


def _default_alpha(profile: StakeProfile) -> Fraction:
    return Fraction(4 * len(profile), profile.total)


def round_weights(
    stakes: Sequence[int] | StakeProfile,
    t_sec: int,
    t_rec: int,
    scale_hint: Fraction | int | str | None = None,
    *,
    max_escalations: int = MAX_ESCALATIONS,
) -> WeightProfile:
    """Weights and a single threshold ``w`` for the pair ``(t_sec, t_rec)``."""
    profile = StakeProfile.of(stakes)
    _check_pair(profile.total, t_sec, t_rec)
    alpha = Fraction(scale_hint) if scale_hint is not None else _default_alpha(profile)
    if alpha <= 0:
        raise ValueError("scale_hint must be positive")
    for esc in range(max_escalations + 1):
        weights = _scale(profile.stakes, alpha)
        lo, hi = feasible_interval(profile.stakes, weights, t_sec, t_rec)
        if lo <= hi:
            return WeightProfile(
                weights, _pick(alpha, t_sec, t_rec, lo, hi), None, alpha, esc, ((t_sec, t_rec),)
            )
        alpha *= 2
    raise InfeasibleRoundingError(
        f"no feasible weight threshold after {max_escalations} escalations"
    )


def round_dual(
    stakes: Sequence[int] | StakeProfile,
    t_sec: int,
    t_rec: int,
    t_sec_fast: int,
    t_rec_fast: int,
    scale_hint: Fraction | int | str | None = None,
    *,
    max_escalations: int = MAX_ESCALATIONS,
) -> WeightProfile:
    """One weight vector with thresholds ``w`` and ``w_fast`` for two stake pairs."""
    profile = StakeProfile.of(stakes)
    _check_pair(profile.total, t_sec, t_rec)
    _check_pair(profile.total, t_sec_fast, t_rec_fast)
    alpha = Fraction(scale_hint) if scale_hint is not None else _default_alpha(profile)
    if alpha <= 0:
        raise ValueError("scale_hint must be positive")
    for esc in range(max_escalations + 1):
        weights = _scale(profile.stakes, alpha)
        lo, hi = feasible_interval(profile.stakes, weights, t_sec, t_rec)
        lo_f, hi_f = feasible_interval(profile.stakes, weights, t_sec_fast, t_rec_fast)
        if lo <= hi and lo_f <= hi_f:
            return WeightProfile(
                weights,
                _pick(alpha, t_sec, t_rec, lo, hi),
                _pick(alpha, t_sec_fast, t_rec_fast, lo_f, hi_f),
                alpha,
                esc,
                ((t_sec, t_rec), (t_sec_fast, t_rec_fast)),
            )
        alpha *= 2
    raise InfeasibleRoundingError(
        f"no feasible weight thresholds after {max_escalations} escalations"
    )


@dataclass(frozen=True)
class VerifyResult:
    passed: bool
    checked: int
    counterexample: tuple[int, ...] | None = None
    pair: ThresholdPair | None = None
    violated: str | None = None  # "G1" or "G2"

    def __bool__(self) -> bool:
        return self.passed


def _subset_sums(values: Sequence[int]) -> np.ndarray:
    """Sums over all subsets, indexed by bitmask (bit i selects element i)."""
    sums = np.zeros(1, dtype=np.int64)
    for v in values:
        sums = np.concatenate([sums, sums + np.int64(v)])
    return sums


def _mask_to_indices(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if mask >> i & 1)


def verify_profile(
    stakes: Sequence[int] | StakeProfile,
    profile: WeightProfile,
    pairs: Sequence[ThresholdPair] | None = None,
    mode: str = "exhaustive",
    *,
    samples: int = 100_000,
    seed: int = 0,
) -> VerifyResult:
    """Check G1/G2 for every pair. Exhaustive mode needs at most 20 parties.

    A failing result carries the offending coalition as a tuple of party indices.
    """
    sp = StakeProfile.of(stakes)
    n = len(sp)
    pairs = list(pairs) if pairs is not None else profile.pairs()
    if len(profile.weights) != n:
        raise ValueError("profile and stakes differ in party count")
    if mode == "exhaustive":
        if n > EXHAUSTIVE_LIMIT:
            raise ValueError(f"exhaustive verification supports at most {EXHAUSTIVE_LIMIT} parties")
        if sp.total >= 1 << 62:
            raise ValueError("stake total too large for exhaustive verification")
        s = _subset_sums(sp.stakes)
        w = _subset_sums(profile.weights)
        for pr in pairs:
            for name, bad in (
                ("G1", (s < pr.t_sec) & (w >= pr.w)),
                ("G2", (s >= pr.t_rec) & (w < pr.w)),
            ):
                hits = np.flatnonzero(bad)
                if hits.size:
                    return VerifyResult(
                        False, len(s), _mask_to_indices(int(hits[0]), n), pr, name
                    )
        return VerifyResult(True, len(s))
    if mode == "sampled":
        return _verify_sampled(sp, profile, pairs, samples, seed)
    raise ValueError(f"unknown verification mode {mode!r}")


def _verify_sampled(
    sp: StakeProfile,
    profile: WeightProfile,
    pairs: Sequence[ThresholdPair],
    samples: int,
    seed: int,
) -> VerifyResult:
    n = len(sp)
    stakes = np.asarray(sp.stakes, dtype=np.float64)
    weights = np.asarray(profile.weights, dtype=np.float64)
    rng = np.random.default_rng(seed)

    candidates: list[np.ndarray] = []
    # Greedy coalitions: most weight per unit of stake first, and the reverse.
    ratio = weights / stakes
    for order in (np.argsort(-ratio, kind="stable"), np.argsort(ratio, kind="stable")):
        prefix = np.zeros((n + 1, n), dtype=bool)
        for k in range(1, n + 1):
            prefix[k] = prefix[k - 1]
            prefix[k, order[k - 1]] = True
        candidates.append(prefix)
    # Random coalitions with a spread of inclusion probabilities.
    probs = rng.uniform(0.05, 0.95, size=(samples, 1))
    candidates.append(rng.random((samples, n)) < probs)
    masks = np.concatenate(candidates)
    checked = len(masks)

    w = masks.astype(np.int64) @ np.asarray(profile.weights, dtype=np.int64)
    if sp.total < 1 << 62:
        s = masks.astype(np.int64) @ np.asarray(sp.stakes, dtype=np.int64)
    else:
        # Exact integer sums so huge stakes never lose precision.
        st_obj = np.asarray(sp.stakes, dtype=object)
        s = np.array([int(st_obj[m].sum()) if m.any() else 0 for m in masks], dtype=object)
    for pr in pairs:
        g1 = (s < pr.t_sec) & (w >= pr.w)
        g2 = (s >= pr.t_rec) & (w < pr.w)
        for name, bad in (("G1", g1), ("G2", g2)):
            hits = np.flatnonzero(bad)
            if hits.size:
                idx = tuple(int(i) for i in np.flatnonzero(masks[hits[0]]))
                return VerifyResult(False, checked, idx, pr, name)
    return VerifyResult(True, checked)
