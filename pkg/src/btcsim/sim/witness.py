"""A scripted schedule where the fast path reconstructs strictly after finalization.

With a ramp fast sharing (reconstruction weight ``w' `` above what the
finalization threshold guarantees), pick honest parties ``P`` holding at least
``t_fin`` stake but fewer than ``w'`` fast units. Delay the votes of one round
to everyone outside ``P`` by ``delta + eps``. Parties in ``P`` prefinalize at
time ``tau`` which fixes the value, but their fast shares alone are not enough;
the rest prefinalize at ``tau + eps`` and only then does the adversary see
``w'`` units. Slow shares appear only after local finalization, at least
``delta`` later, so reconstruction happens at ``tau + eps > tau``.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from ..consensus import VOTE
from .adversary import AdversaryPolicy, DeliveryRule
from .engine import ExecutionTrace, SimSetup, run
from .network import UniformDelay

__all__ = ["pivotal_set", "witness_setup", "run_witness"]


def pivotal_set(stakes: Sequence[int], weights: Sequence[int], t_fin: int, w_fast: int) -> tuple[int, ...] | None:
    """Parties with stake ``>= t_fin`` and weight ``< w_fast``; the lightest such set.

    Solved exactly as a knapsack over weight totals: for each total keep the
    stake-maximal coalition.
    """
    best: dict[int, tuple[int, int]] = {0: (0, 0)}  # weight -> (stake, member bitmask)
    for i, (s, w) in enumerate(zip(stakes, weights)):
        nxt = dict(best)
        for W, (st, mask) in best.items():
            cand = (st + s, mask | 1 << i)
            cur = nxt.get(W + w)
            if cur is None or cand[0] > cur[0]:
                nxt[W + w] = cand
        best = nxt
    for W in sorted(best):
        st, mask = best[W]
        if W < w_fast and st >= t_fin:
            return tuple(i for i in range(len(stakes)) if mask >> i & 1)
    return None


def witness_setup(
    base: SimSetup, *, target_round: int = 1, delta: int | None = None, eps: int | None = None
) -> tuple[SimSetup, tuple[int, ...]]:
    """Turn ``base`` (a fast-path setup) into the scripted witness execution.

    Delays become uniform ``delta`` with no corruption; the delay bound is set
    to ``2 * delta`` so the slowed votes stay within it.
    """
    path = base.path
    if path.protocol != "fast":
        raise ValueError("the witness schedule targets the fast-path protocol")
    cc = base.consensus
    P = pivotal_set(cc.party_stakes, path.weights, cc.t_fin, path.w_fast)
    if P is None:
        raise ValueError("no honest coalition reaches t_fin with fewer than w' fast units")
    delta = delta if delta is not None else (base.delay.max_delay or 100_000)
    eps = eps if eps is not None else delta // 2
    if not 0 < eps < delta:
        raise ValueError("need 0 < eps < delta")
    rest = frozenset(range(cc.n_parties)) - frozenset(P)
    rule = DeliveryRule(
        delay=delta + eps, kind=VOTE, recipients=rest, rounds=frozenset({target_round})
    )
    setup = replace(
        base,
        delay=UniformDelay(delta, cc.n_parties),
        delta_bound=2 * delta,
        gst=0,
        adversary=AdversaryPolicy.build(schedule=[rule]),
        n_rounds=max(base.n_rounds, target_round + 2),
        horizon=None,
        name=(base.name or "scenario") + "/witness",
    )
    return setup, P


def run_witness(base: SimSetup, **kw) -> tuple[ExecutionTrace, tuple[int, ...]]:
    setup, P = witness_setup(base, **kw)
    return run(setup), P
