"""Why an honest fast path cannot always keep GRT = GFT.

With a fast threshold above the finalization quorum, some coalition of honest
parties has enough stake to finalize but not enough fast-path weight to
reconstruct. Delay everyone else's votes by a little more than one network
delay and that coalition finalizes alone: the block is final, yet the output
can only be rebuilt after the slow shares arrive.
"""

from __future__ import annotations

from btcsim.report import explain_trace
from btcsim.scenario import build_setup, load_config
from btcsim.sim import run
from btcsim.sim.witness import pivotal_set


def main() -> None:
    cfg = load_config("impossibility-witness")
    setup = build_setup(cfg, trace="full")
    cc, path = setup.consensus, setup.path
    P = pivotal_set(cc.party_stakes, path.weights, cc.t_fin, path.w_fast)
    print(f"stakes {cc.party_stakes}, t_fin {cc.t_fin}, fast threshold {path.w_fast} units")
    print(f"pivotal coalition {P}: enough stake to finalize, too little fast weight")
    trace = run(setup)
    r = cfg["adversary"]["witness"]["round"]
    print(f"round {r}: GFT {trace.gft(r) / 1000:.1f} ms, GRT {trace.grt(r) / 1000:.1f} ms")
    print()
    print(explain_trace(trace.to_ndjson(), r))


if __name__ == "__main__":
    main()
