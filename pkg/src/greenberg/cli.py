"""Command line: scan, table, check, field."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from .driver import (
    CERTIFIED,
    RunConfig,
    aggregate_tables,
    compute_field,
    golden_check,
    load_golden,
    read_results,
    render_tables,
    scan_range,
)
from .quadfield import NotFundamental, validate_discriminant

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNRESOLVED = 2


def _run_options(p: argparse.ArgumentParser):
    p.add_argument("--level-max", type=int, default=7)
    p.add_argument("--exp-start", type=int, default=None)
    p.add_argument("--primes", type=int, default=64)
    p.add_argument("--stable-window", type=int, default=5)
    p.add_argument("--bits", type=int, default=512)
    p.add_argument("--verify-lower", choices=["auto", "gras", "none"], default="auto")
    p.add_argument("--orientation", choices=["auto", "gamma", "gamma-inv"], default="auto")


def _config(args, **extra) -> RunConfig:
    return RunConfig(level_max=args.level_max, exp_start=args.exp_start, primes=args.primes,
                     window=args.stable_window, bits=args.bits, verify_lower=args.verify_lower,
                     orientation=args.orientation, **extra)


def _line(r) -> str:
    if r.status == CERTIFIED:
        lem = r.certification["lemma"]
        return (f"{r.f}\t{r.describe()}\tn={r.n_stab}\tT^{r.tk}\t3^{r.order_log3}"
                f"\tlemma(m={lem['m']},n={lem['n']},a={lem['a']},b={lem['b']})")
    return f"{r.f}\tUNRESOLVED\t{r.diagnostics}"


def cmd_scan(args) -> int:
    cfg = _config(args, f_min=args.min, f_max=args.max, jobs=args.jobs, out=args.out, resume=args.resume)
    unresolved = 0
    for r in scan_range(cfg):
        if r.status != CERTIFIED:
            unresolved += 1
        if not args.quiet:
            print(_line(r), flush=True)
    return EXIT_UNRESOLVED if unresolved else EXIT_OK


def cmd_table(args) -> int:
    results = read_results(args.input)
    tables = aggregate_tables(results)
    sys.stdout.write(render_tables(tables))
    return EXIT_UNRESOLVED if any(t.unresolved for t in tables.values()) else EXIT_OK


def cmd_check(args) -> int:
    results = read_results(args.input)
    verdicts = golden_check(results, load_golden(args.golden))
    for v in verdicts:
        orient = f" [{v.orientation}]" if v.orientation else ""
        print(f"{'PASS' if v.passed else 'FAIL'} {v.f}: {v.detail}{orient}")
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_UNRESOLVED


def cmd_field(args) -> int:
    fd = validate_discriminant(args.f)
    logging.getLogger("greenberg").setLevel(logging.INFO)
    r = compute_field(fd, _config(args))
    d = asdict(r)
    d["J_text"] = r.describe()
    print(json.dumps(d, indent=2, sort_keys=True))
    return EXIT_OK if r.status == CERTIFIED else EXIT_UNRESOLVED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="greenberg", description="Iwasawa modules C(f) of real quadratic fields at p = 3")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="process all fundamental discriminants in [min, max)")
    p.add_argument("--min", type=int, required=True)
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--quiet", action="store_true")
    _run_options(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("table", help="aggregate a journal into count tables")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("check", help="compare a journal with golden expectations")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--golden", default=None, help="expectations file (default: the bundled exotic-module list)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("field", help="one discriminant with a verbose trace")
    p.add_argument("--f", type=int, required=True)
    _run_options(p)
    p.set_defaults(func=cmd_field)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NotFundamental, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
