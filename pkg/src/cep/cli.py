"""Command line interface.

    cep run --pattern FILE (--input FILE | --generate SPEC) --mode MODE ...
    cep gen --spec FILE --out FILE
    cep difftest --cases N --seed S [--max-events K]

Exit codes: 0 success, 1 differential divergence, 2 usage or build error,
3 stream data error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import replace

from .bench import run_benchmark
from .difftest import run_suite
from .engine import MODES, apply_group_by
from .events import StreamDataError
from .nfa import BuildError
from .patterns import (ParseError, PatternError, parse_pattern, to_dnf)
from .streams import (StreamSpec, generate_stream, load_csv, measure_rates,
                      save_csv)

_DURATION_RE = re.compile(r"^(\d+(?:\.\d+)?)\s*(msec|sec|min|hour)?s?$")
_UNITS = {"msec": 1, "sec": 1000, "min": 60_000, "hour": 3_600_000, None: 1}


def _parse_duration(text: str) -> int:
    m = _DURATION_RE.match(text.strip())
    if not m:
        raise argparse.ArgumentTypeError(
            f"bad duration {text!r} (use e.g. 1800000, 30min, 1hour)")
    value, unit = m.groups()
    return int(round(float(value) * _UNITS[unit]))


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="cep")
    sub = top.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a pattern over a stream")
    run.add_argument("--pattern", required=True, help="pattern file")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="event CSV file")
    src.add_argument("--generate", help="stream spec JSON file")
    run.add_argument("--mode", required=True, choices=MODES)
    run.add_argument("--window", type=_parse_duration,
                     help="override the pattern's window")
    run.add_argument("--rates", help="JSON file: type -> events/sec")
    run.add_argument("--measure-rates", type=int, metavar="N",
                     help="estimate rates from the first N events")
    run.add_argument("--seed", type=int, help="override generator seed")
    run.add_argument("--dedup", action="store_true",
                     help="suppress duplicate matches of composite patterns")
    run.add_argument("--group-by", metavar="ROLE.ATTR",
                     help="group-by attribute for the iterated role")
    run.add_argument("--repeats", type=int, default=1)
    run.add_argument("--warmup", action="store_true",
                     help="discard one untimed warm-up run")
    run.add_argument("--matches-out", help="write match lines here")
    run.add_argument("--metrics-out", help="write the JSON report here")
    run.add_argument("--metrics-csv",
                     help="append long-format metric rows (mode,metric,x,value)")

    gen = sub.add_parser("gen", help="generate a synthetic stream CSV")
    gen.add_argument("--spec", required=True, help="stream spec JSON file")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, help="override spec seed")

    diff = sub.add_parser("difftest",
                          help="randomized oracle/eager/lazy comparison")
    diff.add_argument("--cases", type=int, default=500)
    diff.add_argument("--seed", type=int, default=0)
    diff.add_argument("--max-events", type=int, default=25)
    return top


def _flatten_report(report: dict, prefix: str = "") -> list:
    rows = []
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flatten_report(value, f"{name}."))
        elif isinstance(value, (int, float)) and value is not None:
            rows.append((name, value))
    return rows


def cmd_run(args) -> int:
    try:
        with open(args.pattern, "r", encoding="utf-8") as fh:
            ast = parse_pattern(fh.read())
        chains = to_dnf(ast)
    except (ParseError, PatternError, OSError) as exc:
        print(f"pattern error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.input:
            events = load_csv(args.input)
        else:
            with open(args.generate, "r", encoding="utf-8") as fh:
                spec = StreamSpec.from_json(fh.read())
            if args.seed is not None:
                spec = replace(spec, seed=args.seed)
            events = generate_stream(spec)
    except (StreamDataError, OSError, ValueError, KeyError) as exc:
        print(f"stream error: {exc}", file=sys.stderr)
        return 3

    rates = None
    if args.rates:
        try:
            with open(args.rates, "r", encoding="utf-8") as fh:
                rates = {str(k): float(v) for k, v in json.load(fh).items()}
        except (OSError, ValueError) as exc:
            print(f"rates error: {exc}", file=sys.stderr)
            return 2
    elif args.measure_rates:
        rates = measure_rates(events, args.measure_rates)
    elif args.generate and not args.input:
        rates = dict(spec.rates)

    try:
        if args.window is not None:
            chains = [replace(c, window=args.window) for c in chains]
        if args.group_by:
            role, _, attr = args.group_by.partition(".")
            if not attr:
                raise BuildError("--group-by expects ROLE.ATTR")
            chains = apply_group_by(chains, role, attr)
        result = run_benchmark(chains, events, args.mode, rates=rates,
                               repeats=args.repeats, warmup=args.warmup,
                               dedup=args.dedup)
    except BuildError as exc:
        print(f"build error: {exc}", file=sys.stderr)
        return 2
    except StreamDataError as exc:
        print(f"stream error: {exc}", file=sys.stderr)
        return 3

    if args.matches_out:
        with open(args.matches_out, "w", encoding="utf-8", newline="\n") as fh:
            for line in result.lines:
                fh.write(line + "\n")
    if args.metrics_out:
        with open(args.metrics_out, "w", encoding="utf-8") as fh:
            json.dump(result.report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.metrics_csv:
        window = chains[0].window
        with open(args.metrics_csv, "a", encoding="utf-8", newline="\n") as fh:
            for metric, value in _flatten_report(result.report):
                fh.write(f"{args.mode},{metric},{window},{value}\n")
    tp = result.report["throughput_eps"]
    print(f"{args.mode}: {result.metrics.events_processed} events, "
          f"{result.metrics.matches} matches, "
          f"throughput {tp:.0f} events/sec" if tp else
          f"{args.mode}: {result.metrics.matches} matches")
    return 0


def cmd_gen(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = StreamSpec.from_json(fh.read())
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        events = generate_stream(spec)
        save_csv(events, args.out)
    except (OSError, ValueError, KeyError) as exc:
        print(f"gen error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(events)} events to {args.out}")
    return 0


def cmd_difftest(args) -> int:
    divergence = run_suite(args.cases, args.seed, args.max_events,
                           progress=lambda n: print(f"  {n} cases ok"))
    if divergence is not None:
        print("DIVERGENCE FOUND (shrunken case):")
        print(divergence.describe())
        return 1
    print(f"{args.cases} cases, all modes agree with the oracle")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "gen":
        return cmd_gen(args)
    return cmd_difftest(args)


if __name__ == "__main__":
    sys.exit(main())
