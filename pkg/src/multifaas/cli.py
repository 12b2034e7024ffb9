"""Command-line entry point: ``multifaas run|verify|fixtures|report-diff``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import ConfigError, emit_fixtures, load_scenario, report_diff, run_scenario, verify_exactly_once
from .runtime import MUTANTS

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    spec = load_scenario(args.scenario)
    if args.seed is not None:
        spec.seed = args.seed
    report = run_scenario(spec)
    _emit(report.to_table() if args.format == "table" else report.to_json(), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    verdict = verify_exactly_once(args.scenario, args.budget, args.mutant, args.seed or 0)
    if args.format == "table":
        lines = [f"{verdict.workflow}: {verdict.runs} runs, {len(verdict.violations)} violations -> {'pass' if verdict.passed else 'FAIL'}"]
        lines += [f"  [{v.observable}] {v.scenario}: {v.detail}" for v in verdict.violations[:20]]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(verdict.to_dict(), indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    return EXIT_OK if verdict.passed else EXIT_FAIL


def cmd_fixtures(args) -> int:
    names = args.names or None
    try:
        paths = emit_fixtures(args.out or "fixtures", names)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_report_diff(args) -> int:
    try:
        a, b = (json.loads(Path(p).read_text()) for p in (args.left, args.right))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from None
    diffs = report_diff(a, b)
    for d in diffs:
        print(d)
    return EXIT_OK if not diffs else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multifaas", description="Simulated multi-cloud workflow runtime harness")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="bundled name or path to a JSON document")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("json", "table"), default="json")

    r = sub.add_parser("run", help="run a scenario and evaluate its assertions")
    common(r)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="exhaustive crash-point check of a small workflow")
    common(v)
    v.add_argument("--budget", type=int, default=2)
    v.add_argument("--mutant", choices=MUTANTS, default=None)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fixtures", help="write bundled workflows, topology and scenarios")
    common(f, scenario=False)
    f.add_argument("names", nargs="*")
    f.set_defaults(func=cmd_fixtures)

    d = sub.add_parser("report-diff", help="compare two JSON reports")
    d.add_argument("left")
    d.add_argument("right")
    d.set_defaults(func=cmd_report_diff)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
