from __future__ import annotations

import json

import pytest

from btcsim.cli import EXIT_ASSERT, EXIT_OK, EXIT_USAGE, main
from btcsim.tc import keys_from_json


def test_run_canned_writes_artifacts(tmp_path, capsys):
    rc = main(["run", "--config", "optimistic-uniform", "--override", "rounds=5", "--out-dir", str(tmp_path), "--trace"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "[ok] latency_zero" in out
    names = sorted(p.name for p in tmp_path.iterdir())
    stem = "optimistic-uniform-tight-s0"
    assert names == [f"{stem}.report.json", f"{stem}.summary.txt", f"{stem}.trace.ndjson"]
    doc = json.loads((tmp_path / f"{stem}.report.json").read_text())
    assert doc["latency_us"]["max"] == 0 and all(a["passed"] for a in doc["assertions"])


def test_run_json_format_and_comparison(tmp_path, capsys):
    rc = main([
        "run", "--config", "optimistic-uniform", "--override", "rounds=4",
        "--override", 'sweep={"grid": [{"protocol": "fast"}, {"protocol": "slow"}]}',
        "--format", "json", "--no-trace", "--out-dir", str(tmp_path),
    ])
    assert rc == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert [r["protocol"] for r in doc["runs"]] == ["fast", "slow"]
    assert doc["comparison"]["ratio"] == 0
    assert (tmp_path / "optimistic-uniform.comparison.json").exists()
    assert not list(tmp_path.glob("*.ndjson"))


def test_run_failed_assertion_exits_2(capsys):
    rc = main(["run", "--config", "optimistic-uniform", "--override", "rounds=3",
               "--override", 'assertions=[{"check": "latency_equals", "ms": 5}]'])
    assert rc == EXIT_ASSERT
    assert "FAILED" in capsys.readouterr().out


def test_run_bad_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "protocol": "warp"}))
    assert main(["run", "--config", str(bad)]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err
    assert main(["run", "--config", "optimistic-uniform", "--override", "oops"]) == EXIT_USAGE


def test_explain_round_and_missing_round(tmp_path, capsys):
    main(["run", "--config", "impossibility-witness", "--out-dir", str(tmp_path), "--trace"])
    trace = next(tmp_path.glob("*.ndjson"))
    capsys.readouterr()
    assert main(["explain", str(trace), "--round", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.index("===== GFT") < out.index("===== GRT")
    assert main(["explain", str(trace), "--round", "99"]) == EXIT_USAGE
    assert main(["explain", str(tmp_path / "none.ndjson"), "--round", "0"]) == EXIT_USAGE


def test_round_weights_table_and_json(tmp_path, capsys):
    assert main(["round-weights", "--stakes", "5,3,2,2,1", "--pair", "7", "10"]) == EXIT_OK
    assert "passed" in capsys.readouterr().out
    stakes = tmp_path / "s.json"
    stakes.write_text(json.dumps([3, 1, 4, 1, 5, 9, 2, 6]))
    rc = main(["round-weights", "--stakes", str(stakes), "--pair", "0.5", "0.66",
               "--fast-pair", "0.667", "0.83", "--format", "json"])
    assert rc == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["verify"]["passed"] and doc["w_fast"] > doc["w_slow"]


def test_round_weights_bad_input(capsys):
    assert main(["round-weights", "--stakes", "1,2", "--pair", "x", "3"]) == EXIT_USAGE
    assert main(["round-weights", "--stakes", "1,2", "--pair", "3", "3"]) == EXIT_USAGE


def test_keygen_round_trips(tmp_path, capsys):
    out = tmp_path / "keys.json"
    assert main(["keygen", "--weights", "2,1,1", "--t-rec", "3", "--secret", "42", "--seed", "1", "--out", str(out)]) == EXIT_OK
    coms, bundles = keys_from_json(out.read_text())
    assert len(bundles) == 3 and sum(len(b.owner_units) for b in bundles) == 4
    assert main(["keygen", "--n-units", "4", "--t-rec", "9", "--secret", "1"]) == EXIT_USAGE


def test_accept_single_criterion_and_unknown_suite(capsys):
    assert main(["accept", "theorems", "--criterion", "1"]) == EXIT_OK
    assert "[PASS]  1 tight path" in capsys.readouterr().out
    assert main(["accept", "nonsense"]) == EXIT_USAGE
    assert main(["accept", "--criterion", "1", "--mutation", "tight-trec-plus-one", "--format", "json"]) == EXIT_ASSERT
    assert json.loads(capsys.readouterr().out)[0]["passed"] is False


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
