from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btcsim.consensus import VOTE, ConsensusConfig
from btcsim.protocols import PathConfig
from btcsim.sim import (
    GEO_ONE_WAY_QUANTILES_MS,
    AdversaryPolicy,
    Behavior,
    DeliveryRule,
    FlowLedger,
    LinkMatrixDelay,
    QuantileTable,
    SampledDelay,
    SimSetup,
    UniformDelay,
    World,
    ms,
    per_sender_matrix,
    run,
    sample_link_matrix,
)
from btcsim.sim.witness import pivotal_set, run_witness
from btcsim.tc import BOT

D = ms(100)
CC4 = ConsensusConfig((1, 1, 1, 1), round_timeout=ms(1000))
CC7 = ConsensusConfig((1,) * 7, round_timeout=ms(1000))


def setup(path, cc=CC4, delay=None, rounds=5, **kw):
    return SimSetup(cc, path, delay or UniformDelay(D, cc.n_parties), rounds, **kw)


# -- delay models -------------------------------------------------------------------------


def test_uniform_delay():
    d = UniformDelay(D, 3)
    assert d.delay(0, 2, 0) == D and list(d.row(1)) == [D] * 3 and d.max_delay == D


def test_link_matrix_validation_and_rows():
    m = LinkMatrixDelay([[0, 5], [7, 0]])
    assert m.delay(1, 0, 0) == 7 and m.max_delay == 7
    with pytest.raises(ValueError):
        LinkMatrixDelay([[0, 1]])
    assert per_sender_matrix([3, 4]) == [[3, 3], [4, 4]]


def test_quantile_table_validation():
    with pytest.raises(ValueError):
        QuantileTable(((0.1, 1.0), (1.0, 2.0)))
    with pytest.raises(ValueError):
        QuantileTable(((0.0, 5.0), (1.0, 2.0)))
    t = QuantileTable(GEO_ONE_WAY_QUANTILES_MS)
    assert list(t.sample(np.array([0.5, 0.7, 0.9]))) == [75.0, 115.0, 200.0]


def test_geo_table_is_half_the_round_trip_percentiles():
    pts = dict(GEO_ONE_WAY_QUANTILES_MS)
    assert (2 * pts[0.5], 2 * pts[0.7], 2 * pts[0.9]) == (150, 230, 400)


def test_sampled_links_are_seeded_and_symmetric():
    t = QuantileTable(GEO_ONE_WAY_QUANTILES_MS)
    a = sample_link_matrix(6, t, 3)
    assert a == sample_link_matrix(6, t, 3) and a != sample_link_matrix(6, t, 4)
    assert all(a[i][j] == a[j][i] for i in range(6) for j in range(6))
    assert all(ms(20) <= x <= ms(300) for row in a for x in row)


def test_sampled_delay_is_reproducible():
    t = QuantileTable(GEO_ONE_WAY_QUANTILES_MS)
    a, b = SampledDelay(t, 9), SampledDelay(t, 9)
    assert [a.delay(0, 1, 0) for _ in range(50)] == [b.delay(0, 1, 0) for _ in range(50)]


# -- ledger -------------------------------------------------------------------------------


def test_ledger_counts_corrupt_stake_toward_finalization():
    led = FlowLedger((1, 1, 1, 1), (1, 1, 1, 1), frozenset({3}), 3, {"slow": 3})
    led.prefinalize(0, 0, b"v", 10)
    assert led.gft(0) is None
    led.prefinalize(1, 0, b"v", 20)
    assert led.gft(0) == 20 and led.gft_value(0) == b"v"


def test_ledger_reconstruction_uses_corrupt_units():
    led = FlowLedger((1, 1, 1, 1), (1, 1, 1, 1), frozenset({3}), 3, {"slow": 3})
    led.reveal(0, 0, b"v", "slow", 5)
    assert led.grt(0) is None
    led.reveal(1, 0, b"v", "slow", 8)
    led.prefinalize(0, 0, b"v", 1)
    led.prefinalize(1, 0, b"v", 2)
    assert led.grt(0) == 8 and led.grt_sharing(0) == "slow"


def test_ledger_flags_inputs_combined_without_finalization():
    led = FlowLedger((1, 1, 1, 1), (1, 1, 1, 1), frozenset(), 3, {"slow": 2})
    led.reveal(0, 0, b"x", "slow", 1)
    led.reveal(1, 0, b"x", "slow", 2)
    assert led.secrecy_breaches() == [(0, b"x", "slow")]


def test_ledger_notes_corrupt_weight_above_threshold():
    led = FlowLedger((1, 1, 1, 1), (1, 1, 1, 5), frozenset({3}), 3, {"slow": 3})
    assert led.anomalies


# -- adversary policy ---------------------------------------------------------------------


def test_corrupt_stake_above_fault_bound_is_rejected_before_running():
    adv = AdversaryPolicy.build([2, 3])
    with pytest.raises(ValueError):
        setup(PathConfig.tight(CC4), adversary=adv)


def test_behaviors_only_for_corrupt_parties():
    with pytest.raises(ValueError):
        AdversaryPolicy.build([1], {2: [Behavior("withhold")]})
    with pytest.raises(ValueError):
        Behavior("teleport")


def test_delivery_rule_matching():
    r = DeliveryRule(5, kind=VOTE, recipients=frozenset({1}))
    assert r.matches(VOTE, 0, 1, 3) and not r.matches(VOTE, 0, 2, 3) and not r.matches("PREFIN", 0, 1, 3)


# -- executions ---------------------------------------------------------------------------


def test_first_global_finalization_after_two_delays():
    tr = run(setup(PathConfig.tight(CC4)))
    assert tr.gft(0) == 2 * D
    assert [tr.gft(r) for r in range(3)] == [2 * D, 5 * D, 8 * D]


def test_runs_are_byte_identical():
    s = dict(delay=LinkMatrixDelay(sample_link_matrix(4, QuantileTable(GEO_ONE_WAY_QUANTILES_MS), 1)),
             trace_level="full", seed=4)
    a = run(setup(PathConfig.fast(CC4, (2, 3), (3, 4)), **s))
    b = run(setup(PathConfig.fast(CC4, (2, 3), (3, 4)), **s))
    assert a.to_ndjson() == b.to_ndjson() and a.digest() == b.digest()


def test_tight_optimistic_run():
    tr = run(setup(PathConfig.tight(CC4), rounds=10))
    assert all(v == 0 for v in tr.latencies().values())
    assert all(tr.gft(r) == tr.grt(r) for r in range(10))


def test_slow_optimistic_run_reconstructs_one_delay_later():
    tr = run(setup(PathConfig.slow(CC4, 2, 3), rounds=10))
    assert set(tr.latencies().values()) == {D}
    assert all(tr.grt(r) == tr.gft(r) + D for r in range(10))


def test_fast_optimistic_run():
    tr = run(setup(PathConfig.fast(CC4, (2, 3), (3, 4)), rounds=10))
    assert set(tr.latencies().values()) == {0}
    assert all(set(tr.output_paths(r).values()) == {"fast"} for r in range(10))


def test_crashed_leader_round_finalizes_bottom():
    adv = AdversaryPolicy.build([1], {1: [Behavior("crash_at", 0)]})
    tr = run(setup(PathConfig.tight(CC4), adversary=adv, rounds=3))
    assert tr.finalized_value(1) is BOT
    assert tr.gft(1) is not None and tr.grt(1) == tr.gft(1)
    assert all(len(tr.outputs[p]) == 3 for p in tr.honest)


def test_horizon_truncation_leaves_rounds_undefined():
    tr = run(setup(PathConfig.tight(CC4), rounds=10, horizon=ms(700)))
    assert tr.gft(0) == 2 * D and tr.gft(9) is None and tr.grt(9) is None
    assert tr.latency(9) is None


def test_post_gst_delays_are_clamped_to_the_bound():
    rule = DeliveryRule(ms(900))
    w = World(setup(PathConfig.tight(CC4), adversary=AdversaryPolicy.build(schedule=[rule]), gst=ms(500)))
    assert w._link_delay(VOTE, 0, 0, 1, ms(100)) == ms(900)
    assert w._link_delay(VOTE, 0, 0, 1, ms(600)) == D


def test_withheld_fast_shares_force_the_slow_fallback():
    path = PathConfig.fast(CC7, (3, 5), (CC7.t_fin, 7))
    adv = AdversaryPolicy.build([5, 6], {p: [Behavior("withhold", path="fast")] for p in (5, 6)})
    tr = run(setup(path, cc=CC7, adversary=adv, rounds=7))
    assert all(set(tr.output_paths(r).values()) == {"slow"} for r in range(7))
    assert set(tr.latencies().values()) == {D}


def test_selective_send_lets_only_targets_use_the_fast_sharing():
    path = PathConfig.fast(CC7, (3, 5), (CC7.t_fin, 7))
    bs = {p: [Behavior("selective_send", path="fast", targets=frozenset({0, 1}))] for p in (5, 6)}
    tr = run(setup(path, cc=CC7, adversary=AdversaryPolicy.build([5, 6], bs), rounds=7))
    for r in range(7):
        paths = tr.output_paths(r)
        assert {p for p, x in paths.items() if x == "fast"} == {0, 1}
        assert len(paths) == 5


def test_early_reveal_never_precedes_finalization():
    path = PathConfig.slow(CC7, 3, 5)
    adv = AdversaryPolicy.build([5, 6], {p: [Behavior("early_reveal")] for p in (5, 6)})
    tr = run(setup(path, cc=CC7, adversary=adv, rounds=7))
    assert all(tr.grt(r) >= tr.gft(r) for r in tr.rounds_defined())
    assert not tr.violations


def test_invalid_shares_are_rejected_by_honest_parties():
    path = PathConfig.slow(CC7, 3, 5)
    adv = AdversaryPolicy.build([6], {6: [Behavior("invalid_shares")]})
    # The corrupt party is the fastest sender, so its shares arrive before anyone combines.
    delay = LinkMatrixDelay(per_sender_matrix([D] * 6 + [ms(50)]))
    tr = run(setup(path, cc=CC7, delay=delay, adversary=adv, rounds=7))
    assert tr.metrics["invalid_shares"] > 0
    for p in tr.honest:
        for o in tr.outputs[p]:
            assert o.tc_output == tr.keys.oracle(o.round, o.value)


def test_equivocating_leader_cannot_split_honest_parties():
    path = PathConfig.tight(CC7)
    adv = AdversaryPolicy.build([0, 1], {p: [Behavior("equivocate")] for p in (0, 1)})
    tr = run(setup(path, cc=CC7, adversary=adv, rounds=7))
    assert tr.metrics["equivocations"] > 0
    for r in range(7):
        vals = {tr.finalizations[p][r][0] for p in tr.honest if r in tr.finalizations[p]}
        assert len(vals) <= 1


def test_witness_schedule_reconstructs_after_finalization():
    base = setup(PathConfig.fast(CC4, (2, 3), (3, 4)))
    tr, P = run_witness(base, target_round=1, delta=D, eps=ms(50))
    assert len(P) == 3
    assert tr.grt(1) == tr.gft(1) + ms(50)
    assert all(tr.grt(r) == tr.gft(r) for r in (0, 2))


def test_pivotal_set_search():
    assert pivotal_set((1, 1, 1, 1), (1, 1, 1, 1), 3, 4) == (0, 1, 2)
    assert pivotal_set((1, 1, 1, 1), (1, 1, 1, 1), 3, 3) is None


def test_witness_needs_fast_path():
    with pytest.raises(ValueError):
        run_witness(setup(PathConfig.tight(CC4)))


def test_trace_records_and_summary():
    tr = run(setup(PathConfig.tight(CC4), rounds=2, trace_level="events"))
    recs = [json.loads(x) for x in tr.to_ndjson().splitlines()]
    assert recs[0]["ev"] == "header" and recs[-1]["ev"] == "violations"
    assert {r["ev"] for r in recs} >= {"prefinalize", "finalize", "reconstruct", "output", "ledger"}
    rows = tr.summary_rows()
    assert rows[0]["gft_us"] == rows[0]["grt_us"] == 2 * D


def test_bad_trace_level_rejected():
    with pytest.raises(ValueError):
        setup(PathConfig.tight(CC4), trace_level="loud")


# -- properties ---------------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(
    proto=st.sampled_from(["slow", "tight", "fast"]),
    seed=st.integers(0, 10_000),
    n_crash=st.integers(0, 2),
    gst_ms=st.sampled_from([0, 400]),
)
def test_reconstruction_never_precedes_finalization(proto, seed, n_crash, gst_ms):
    cc = CC7
    path = {
        "slow": PathConfig.slow(cc, 3, 5),
        "tight": PathConfig.tight(cc),
        "fast": PathConfig.fast(cc, (3, 5), (cc.t_fin, 7)),
    }[proto]
    delay = LinkMatrixDelay(sample_link_matrix(7, QuantileTable(GEO_ONE_WAY_QUANTILES_MS), seed))
    corrupt = list(range(7 - n_crash, 7))
    adv = AdversaryPolicy.build(corrupt, {p: [Behavior("crash_at", ms(seed % 2000))] for p in corrupt},
                                [DeliveryRule(ms(seed % 700), kind=VOTE, recipients=frozenset({0}))])
    tr = run(setup(path, cc=cc, delay=delay, rounds=7, adversary=adv, gst=ms(gst_ms), seed=seed))
    for r in tr.rounds_defined():
        if tr.grt(r) is not None:
            assert tr.grt(r) >= tr.gft(r)
        if proto == "tight" and tr.grt(r) is not None:
            assert tr.grt(r) == tr.gft(r)
    assert not tr.ledger.secrecy_breaches()
