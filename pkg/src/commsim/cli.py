"""Command-line interface.

JSON payloads go to stdout, diagnostics to stderr. Exit codes: 0 success,
1 invalid input, 2 a scientific check failed.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .distributions import complexity_profile, geometric_half_norm, make_family
from .evaluation import (
    PRESETS,
    SweepSpec,
    bound_thm1,
    bound_thm2,
    emit_csv,
    monte_carlo,
    resolve_threads,
    run_sweep,
)
from .exceptions import CommsimError
from .protocol import SchemeConfig

EXIT_OK, EXIT_INVALID, EXIT_CHECK_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _family_args(p, need_d=True):
    p.add_argument("--family", required=True, choices=["uniform", "geometric", "zipf", "sparse", "point"])
    p.add_argument("--param", type=float, default=None, help="beta, lambda or sparsity")
    p.add_argument("--d", type=int, required=need_d)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="commsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="Monte Carlo error of one scheme at one setting")
    sim.add_argument("--scheme", required=True, choices=["minimax", "lr", "localize_refine"])
    _family_args(sim)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--b", type=int, required=True)
    sim.add_argument("--q", type=float, default=2.0)
    sim.add_argument("--trials", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--threads", type=int, default=None)

    sweep = sub.add_parser("sweep", help="run a grid of cells and write CSV")
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument("--spec", help="JSON sweep specification")
    source.add_argument("--preset", choices=sorted(PRESETS))
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--trials", type=int, default=None, help="override trials per cell")
    sweep.add_argument("--seed", type=int, default=None, help="override the base seed")
    sweep.add_argument("--threads", type=int, default=None)

    cx = sub.add_parser("complexity", help="local-complexity profile of a distribution")
    _family_args(cx)
    cx.add_argument("--n", type=int, default=None)
    cx.add_argument("--b", type=int, default=None)
    cx.add_argument("--seed", type=int, default=0)

    check = sub.add_parser("check", help="run an acceptance suite")
    check.add_argument("--suite", required=True, help="fast or full")
    check.add_argument("--threads", type=int, default=None)
    return parser


def _emit(payload):
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    p = make_family(args.family, args.param, args.d, rng=np.random.default_rng(args.seed))
    cfg = SchemeConfig(n=args.n, d=args.d, b=args.b, q=args.q, seed=args.seed)
    cell = monte_carlo(
        args.scheme, p, cfg, args.trials, family=args.family, param=args.param,
        threads=resolve_threads(args.threads),
    )
    _emit(cell.to_dict())
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.preset:
        spec = PRESETS[args.preset]
    else:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read spec: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"spec is not valid JSON: {exc}") from exc
        spec = SweepSpec.from_dict(raw)
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        fields = {f: getattr(spec, f) for f in spec.__dataclass_fields__}
        spec = SweepSpec(**{**fields, **overrides})
    rows = run_sweep(spec, resolve_threads(args.threads))
    try:
        path = emit_csv(rows, args.out)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {len(rows)} rows to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_complexity(args) -> int:
    p = make_family(args.family, args.param, args.d, rng=np.random.default_rng(args.seed))
    payload = complexity_profile(p).to_dict()
    closed = None
    if args.family == "geometric":
        closed = geometric_half_norm(args.param, args.d)
    elif args.family == "uniform":
        closed = float(args.d)
    elif args.family == "point":
        closed = 1.0
    if closed is not None:
        payload["closed_form_half_norm"] = closed
        payload["closed_form_abs_diff"] = abs(closed - payload["half_norm"])
    if (args.n is None) != (args.b is None):
        raise UsageError("--n and --b must be given together")
    if args.n is not None:
        if args.n < 1 or args.b < 1:
            raise UsageError("--n and --b must be positive")
        payload["bound_thm1"] = bound_thm1(p, args.n, args.d, args.b)
        payload["bound_thm2"] = bound_thm2(p, args.n, args.d, args.b)
    _emit(payload)
    return EXIT_OK


def cmd_check(args) -> int:
    from .acceptance import SUITES, run_suite

    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; expected one of {sorted(SUITES)}")
    results = run_suite(args.suite, threads=args.threads, report=lambda line: print(line, file=sys.stderr))
    failed = [r for r in results if not r.passed]
    _emit({"suite": args.suite, "passed": len(results) - len(failed), "failed": [r.name for r in failed]})
    return EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "complexity": cmd_complexity,
    "check": cmd_check,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, CommsimError) as exc:
        print(f"commsim: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
