"""Where does the output latency go?

Four equal-stake parties, every message takes 100 ms. The slow protocol only
starts sharing once a block is finalized, so each output lands one network
delay later. The tight protocol shares at prefinalization with a threshold
equal to the finalization quorum, so the output is ready the moment the block
is final.
"""

from __future__ import annotations

from btcsim.report import LatencyReport, explain_trace
from btcsim.scenario import apply_overrides, build_setup, load_config
from btcsim.sim import run


def main() -> None:
    base = load_config("optimistic-uniform")
    for protocol in ("slow", "tight"):
        cfg = apply_overrides(base, [f"protocol={protocol}", "rounds=10"])
        trace = run(build_setup(cfg, trace="full"))
        rep = LatencyReport.from_trace(trace)
        print(rep.summary_line())
        print(explain_trace(trace.to_ndjson(), 0).splitlines()[1])
    print()
    print("Round 0 of the tight run, event by event:")
    cfg = apply_overrides(base, ["protocol=tight", "rounds=2"])
    print(explain_trace(run(build_setup(cfg, trace="full")).to_ndjson(), 0))


if __name__ == "__main__":
    main()
