from __future__ import annotations

import hashlib
import re

import pytest

from btcsim.report import (
    MAINNET_REFERENCE_MS,
    LatencyReport,
    check_assertion,
    compare_paths,
    explain_trace,
    format_ms,
    render_table,
)
from btcsim.scenario import apply_overrides, build_setup, load_config
from btcsim.sim import run


@pytest.fixture(scope="module")
def optimistic():
    return run(build_setup(load_config("optimistic-uniform"), trace="events"))


@pytest.fixture(scope="module")
def witness():
    return run(build_setup(load_config("impossibility-witness"), trace="full"))


def test_format_ms():
    assert format_ms(None) == "-" and format_ms(1500) == "1.500" and format_ms(0) == "0.000"


def test_tight_optimistic_report_aggregates(optimistic):
    rep = LatencyReport.from_trace(optimistic)
    assert len(rep.rows) == 100 and rep.latencies_us == [0] * 100
    assert rep.mean_us == rep.median_us == rep.max_us == 0
    assert rep.path_mix == {"tight": 400} and rep.fast_fraction == 0
    assert rep.grt_gft_deltas_us == [0] * 100
    d = rep.to_dict()
    assert d["grt_minus_gft_us"] == {"min": 0, "max": 0, "positive_rounds": 0}
    assert d["violations"] == []


def test_render_table_is_byte_stable(optimistic):
    text = render_table(LatencyReport.from_trace(optimistic))
    assert text == render_table(LatencyReport.from_trace(optimistic))
    assert hashlib.sha256(text.encode()).hexdigest() == (
        "87fd321f8d5e38202344e3074bc31ce62b459d6a6dd33e790ed91cb64e2bc47a"
    )
    assert text.count("\n") == 102


def test_slow_path_round_costs_one_delta():
    cfg = apply_overrides(load_config("optimistic-uniform"), ["protocol=slow", "rounds=6"])
    rep = LatencyReport.from_trace(run(build_setup(cfg)))
    assert rep.latencies_us == [100_000] * 6
    assert all(d == 100_000 for d in rep.grt_gft_deltas_us)


def test_compare_paths_carries_reference_as_context_only():
    base = load_config("optimistic-uniform")
    fast = LatencyReport.from_trace(run(build_setup(apply_overrides(base, ["protocol=fast", "rounds=4"]))))
    slow = LatencyReport.from_trace(run(build_setup(apply_overrides(base, ["protocol=slow", "rounds=4"]))))
    c = compare_paths(fast, slow)
    assert c["ratio"] == 0 and c["fast_share"] == 1.0
    assert c["reference"]["slow_ms"] == MAINNET_REFERENCE_MS["slow"]
    assert "never asserted" in c["reference"]["note"]


def test_explain_tight_round_has_gft_grt_and_output_together(optimistic):
    text = explain_trace(optimistic.to_ndjson(), 0)
    assert "===== GFT" in text and "===== GRT" in text
    times = {m: re.search(rf"([\d.]+) ms  ===== {m}", text).group(1) for m in ("GFT", "GRT")}
    assert times["GFT"] == times["GRT"]
    assert "L 0.000 ms" in text


def test_explain_witness_round_shows_grt_after_gft(witness):
    text = explain_trace(witness.to_ndjson(), 1)
    gft = float(re.search(r"([\d.]+) ms  ===== GFT", text).group(1))
    grt = float(re.search(r"([\d.]+) ms  ===== GRT", text).group(1))
    assert grt > gft
    assert text.index("===== GFT") < text.index("===== GRT")


def test_explain_accepts_parsed_records(witness):
    import json

    recs = [json.loads(line) for line in witness.to_ndjson().splitlines()]
    assert explain_trace(recs, 1) == explain_trace(witness.to_ndjson(), 1)


def test_explain_bottom_round_shows_the_timeout():
    cfg = apply_overrides(
        load_config("crash-t"),
        ["rounds=7", "adversary.behaviors={\"1\": [{\"kind\": \"crash_at\", \"time_ms\": 0}]}", "adversary.corrupt=[1]"],
    )
    tr = run(build_setup(cfg, trace="full"))
    text = explain_trace(tr.to_ndjson(), 1)
    assert "value ⊥" in text
    assert re.search(r"p\d\s+timeout", text)


def test_explain_missing_round_raises(optimistic):
    with pytest.raises(KeyError):
        explain_trace(optimistic.to_ndjson(), 10_000)


def test_check_assertion_rejects_unknown(optimistic):
    with pytest.raises(ValueError):
        check_assertion({"check": "nope"}, optimistic)
    ok, _ = check_assertion({"check": "latency_at_most", "ms": 0}, optimistic)
    assert ok
