"""Command-line entry point: ``btcsim run | accept | explain | round-weights | keygen``.

Exit codes: 0 success, 1 usage or configuration error, 2 assertion or
acceptance failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSERT = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(value: str) -> str:
    return "json" if value in ("json", "machine-readable") else value


# -- run ----------------------------------------------------------------------------


def _cmd_run(args) -> int:
    from .report import LatencyReport, compare_paths, render_table
    from .scenario import apply_overrides, check_assertions, expand_sweep, load_config
    from .scenario import build_setup
    from .sim.engine import run

    cfg = load_config(args.config)
    if args.override:
        cfg = apply_overrides(cfg, args.override)
    trace_level = None
    if args.trace is True:
        trace_level = "full"
    elif args.trace is False:
        trace_level = "none"
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    fmt = _fmt(args.format)
    failures = 0
    reports = []
    docs = []
    for sub, seed in expand_sweep(cfg, args.seed):
        setup = build_setup(sub, seed=seed, trace=trace_level)
        trace = run(setup)
        rep = LatencyReport.from_trace(trace)
        reports.append(rep)
        results = check_assertions(sub, trace)
        failures += sum(1 for r in results if not r.passed)
        doc = rep.to_dict() | {
            "assertions": [{"check": r.check, "passed": r.passed, "detail": r.detail} for r in results],
            "trace_digest": trace.digest(),
        }
        docs.append(doc)
        stem = f"{sub['name']}-{trace.protocol}-s{seed}"
        if out_dir is not None:
            (out_dir / f"{stem}.summary.txt").write_text(render_table(rep))
            (out_dir / f"{stem}.report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
            if setup.trace_level != "none":
                (out_dir / f"{stem}.trace.ndjson").write_text(trace.to_ndjson())
        if fmt == "table":
            sys.stdout.write(render_table(rep) if args.rounds else rep.summary_line() + "\n")
            for r in results:
                sys.stdout.write(f"  [{'ok' if r.passed else 'FAILED'}] {r.check}: {r.detail}\n")
    comparison = None
    by_proto = {r.protocol: r for r in reports}
    if "fast" in by_proto and "slow" in by_proto:
        comparison = compare_paths(by_proto["fast"], by_proto["slow"])
        if fmt == "table":
            c = comparison
            ref = c["reference"]
            sys.stdout.write(
                f"fast vs slow mean L: {c['fast_mean_ms']:.3f} ms vs {c['slow_mean_ms']:.3f} ms "
                f"(ratio {c['ratio']:.3f}); production reference {ref['slow_ms']} -> {ref['fast_ms']} ms "
                f"(ratio {ref['ratio']}, context only)\n"
            )
    if fmt == "json":
        sys.stdout.write(json.dumps({"runs": docs, "comparison": comparison}, indent=2, sort_keys=True) + "\n")
    if out_dir is not None and comparison is not None:
        (out_dir / f"{cfg['name']}.comparison.json").write_text(json.dumps(comparison, indent=2, sort_keys=True) + "\n")
    return EXIT_ASSERT if failures else EXIT_OK


# -- accept --------------------------------------------------------------------------


def _cmd_accept(args) -> int:
    from .acceptance import format_result, run_acceptance

    fmt = _fmt(args.format)
    progress = (lambda r: print(format_result(r), flush=True)) if fmt == "table" else None
    results = run_acceptance(
        args.suite, mutation=args.mutation, only=tuple(args.criterion) if args.criterion else None,
        progress=progress,
    )
    if fmt == "json":
        print(json.dumps(
            [
                {"number": r.number, "name": r.name, "passed": r.passed, "measured": r.measured,
                 "detail": r.detail, "runtime_s": round(r.runtime, 3), "limit_s": r.limit}
                for r in results
            ],
            indent=2, default=str,
        ))
    passed = sum(r.passed for r in results)
    if fmt == "table":
        print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_ASSERT


# -- explain -------------------------------------------------------------------------


def _cmd_explain(args) -> int:
    from .report import explain_trace

    path = Path(args.trace_file)
    if not path.exists():
        raise UsageError(f"trace file {path} not found")
    try:
        sys.stdout.write(explain_trace(path.read_text(), args.round))
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    return EXIT_OK


# -- round-weights ---------------------------------------------------------------------


def _parse_stakes(text: str) -> list[int]:
    p = Path(text)
    if p.exists():
        data = json.loads(p.read_text())
        if isinstance(data, dict):
            data = data.get("stakes", [])
        return [int(x) for x in data]
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse stakes {text!r}") from exc


def _threshold(text: str, total: int) -> int:
    """An integer stake, or a fraction of total stake such as ``0.66`` or ``2/3`` (rounded up)."""
    try:
        if "." in text or "/" in text:
            x = Fraction(text)
            if not 0 < x <= 1:
                raise UsageError(f"fraction {text} must be in (0, 1]")
            return -(-x.numerator * total // x.denominator)
        return int(text)
    except ValueError as exc:
        raise UsageError(f"cannot parse threshold {text!r}") from exc


def _cmd_round_weights(args) -> int:
    from .rounding import round_dual, round_weights, verify_profile

    stakes = _parse_stakes(args.stakes)
    if not stakes:
        raise UsageError("no stakes given")
    total = sum(stakes)
    slow = tuple(_threshold(x, total) for x in args.pair)
    hint = Fraction(args.scale_hint) if args.scale_hint else None
    if args.target_total_weight:
        hint = Fraction(args.target_total_weight, total)
    try:
        if args.fast_pair:
            fast = tuple(_threshold(x, total) for x in args.fast_pair)
            prof = round_dual(stakes, *slow, *fast, scale_hint=hint)
        else:
            prof = round_weights(stakes, *slow, scale_hint=hint)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = prof.to_dict()
    ok = True
    if args.verify != "off":
        mode = args.verify
        if mode == "auto":
            mode = "exhaustive" if len(stakes) <= 20 else "sampled"
        res = verify_profile(stakes, prof, mode=mode, seed=args.seed or 0)
        ok = res.passed
        doc["verify"] = {"mode": mode, "passed": res.passed, "checked": res.checked,
                         "counterexample": res.counterexample}
    if _fmt(args.format) == "json":
        print(json.dumps(doc, indent=2))
    else:
        print(f"total stake {total}, alpha {doc['alpha']}, escalations {doc['escalations']}")
        print(f"total weight {doc['total_weight']}, w = {doc['w_slow']}"
              + (f", w' = {doc['w_fast']}" if doc["w_fast"] is not None else ""))
        print("weights: " + " ".join(str(w) for w in doc["weights"]))
        if "verify" in doc:
            v = doc["verify"]
            print(f"verify ({v['mode']}, {v['checked']} subsets): {'passed' if v['passed'] else 'FAILED'}")
    return EXIT_OK if ok else EXIT_ASSERT


# -- keygen ---------------------------------------------------------------------------


def _cmd_keygen(args) -> int:
    from .tc import ThresholdParams, keys_to_json, share_gen

    weights = [int(x) for x in args.weights.split(",")] if args.weights else [1] * args.n_units
    n_units = sum(weights)
    t_rec = args.t_rec
    t_sec = args.t_sec if args.t_sec is not None else t_rec
    try:
        params = ThresholdParams(n_units, t_sec, t_rec)
        coms, bundles = share_gen(args.secret, params, weights, args.seed or 0)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = keys_to_json(coms, bundles, label=args.label) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(bundles)} bundles over {n_units} units to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="btcsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fmt(sp):
        sp.add_argument("--format", choices=("table", "json", "machine-readable"), default="table")

    r = sub.add_parser("run", help="run a scenario file or canned scenario")
    r.add_argument("--config", required=True, help="scenario JSON path or canned name")
    r.add_argument("--seed", type=int, help="run only this seed")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--out-dir")
    r.add_argument("--trace", dest="trace", action="store_true", default=None, help="record the full trace")
    r.add_argument("--no-trace", dest="trace", action="store_false", help="record no events")
    r.add_argument("--rounds", action="store_true", help="print the per-round table")
    fmt(r)
    r.set_defaults(func=_cmd_run)

    a = sub.add_parser("accept", help="run the acceptance suite")
    a.add_argument("suite", nargs="?", default="theorems")
    a.add_argument("--criterion", type=int, action="append")
    a.add_argument("--mutation", help="inject a known bug to check the suite catches it")
    fmt(a)
    a.set_defaults(func=_cmd_accept)

    e = sub.add_parser("explain", help="timeline of one round from an NDJSON trace")
    e.add_argument("trace_file")
    e.add_argument("--round", type=int, required=True)
    e.set_defaults(func=_cmd_explain)

    w = sub.add_parser("round-weights", help="round stakes to integer weights")
    w.add_argument("--stakes", required=True, help="comma list or JSON file")
    w.add_argument("--pair", nargs=2, required=True, metavar=("T_SEC", "T_REC"))
    w.add_argument("--fast-pair", nargs=2, metavar=("T_SEC", "T_REC"))
    w.add_argument("--scale-hint")
    w.add_argument("--target-total-weight", type=int)
    w.add_argument("--verify", choices=("auto", "exhaustive", "sampled", "off"), default="auto")
    w.add_argument("--seed", type=int)
    fmt(w)
    w.set_defaults(func=_cmd_round_weights)

    k = sub.add_parser("keygen", help="deal a threshold sharing and print it as JSON")
    g = k.add_mutually_exclusive_group(required=True)
    g.add_argument("--weights", help="comma list of unit counts per party")
    g.add_argument("--n-units", type=int)
    k.add_argument("--t-rec", type=int, required=True)
    k.add_argument("--t-sec", type=int)
    k.add_argument("--secret", type=int, required=True)
    k.add_argument("--seed", type=int)
    k.add_argument("--label", default="")
    k.add_argument("--out")
    k.set_defaults(func=_cmd_keygen)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    from .acceptance import UnknownSuiteError
    from .scenario import ConfigError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, UnknownSuiteError) as exc:
        print(f"btcsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"btcsim: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
