"""Fast versus slow path on a 140-party network with geographic delays.

Link delays are drawn from a one-way latency distribution with a median of
75 ms. The fast path gets most outputs at finalization time. Its remaining
overhead comes from the slowest honest party, because a round's latency is
the maximum over parties. Expect a couple of minutes of runtime. Pass a
number of rounds (default 40) to trade accuracy for speed.
"""

from __future__ import annotations

import sys

from btcsim.report import LatencyReport, compare_paths
from btcsim.scenario import apply_overrides, build_setup, load_config
from btcsim.sim import run


def main(rounds: int = 40) -> None:
    base = apply_overrides(load_config("geo-heterogeneous"), [f"rounds={rounds}"])
    reps = {}
    for protocol in ("fast", "slow"):
        cfg = apply_overrides(base, [f"protocol={protocol}"])
        reps[protocol] = LatencyReport.from_trace(run(build_setup(cfg)))
        print(reps[protocol].summary_line())
    c = compare_paths(reps["fast"], reps["slow"])
    ref = c["reference"]
    print(f"mean L ratio fast/slow: {c['ratio']:.3f}")
    print(f"per-party mean ratio: {c['fast_party_mean_ms'] / c['slow_party_mean_ms']:.3f}")
    print(f"production reference, for context: {ref['slow_ms']} -> {ref['fast_ms']} ms (ratio {ref['ratio']})")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 40)
