"""``bench`` command line: run experiment grids, verification suites, instance files.

Exit codes: 0 success, 1 verification or convergence failure, 2 bad arguments.
"""
from __future__ import annotations

import argparse
import json
import sys

from .bench import ExperimentSpec, failed_fraction, format_summary, gen_instance, run_grid, write_instance
from .verify import SUITES, parse_spec, run_suite

RUN_DEFAULTS = {
    "sizes": "10x5",
    "thetas": "0.1,0.25,2.0",
    "instances": 20,
    "solver": "armijo",
    "mode": "first",
    "m_order": 2,
    "retraction": "stiefel",
    "eps1": 1e-6,
    "eps2": 1e-4,
    "alpha0": 20.0,
    "max_outer": 500,
    "seed": 0,
    "out": "bench_out",
    "plots": False,
    "parallel": 1,
    "max_fail_fraction": 0.0,
}


class ArgumentError(ValueError):
    pass


def parse_sizes(text):
    sizes = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            n, p = tok.lower().split("x")
            sizes.append((int(n), int(p)))
        except ValueError:
            raise ArgumentError(f"bad size {tok!r}, expected NxP") from None
    return sizes


def parse_floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ArgumentError(f"bad number list {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="bench", description="Third-order adaptive regularization benchmarks on St(n,p).")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment grid on Brockett instances")
    r.add_argument("--config", help="JSON file with any of the options below (command line wins)")
    r.add_argument("--sizes", help="comma-separated NxP list, e.g. 10x5,20x5")
    r.add_argument("--thetas", help="comma-separated theta values")
    r.add_argument("--instances", type=int, help="instances per (size, theta) cell")
    r.add_argument("--solver", choices=["armijo", "newton"])
    r.add_argument("--mode", choices=["first", "second"])
    r.add_argument("--m-order", dest="m_order", type=int, help="degree m of the projected-polynomial retraction")
    r.add_argument("--retraction", choices=["stiefel", "polar"])
    r.add_argument("--eps1", type=float)
    r.add_argument("--eps2", type=float)
    r.add_argument("--alpha0", type=float)
    r.add_argument("--max-outer", dest="max_outer", type=int)
    r.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    r.add_argument("--out", help="output directory for traces and summary")
    r.add_argument("--plots", action="store_true", default=None, help="write an SVG plot next to each trace")
    r.add_argument("--parallel", type=int, help="worker processes")
    r.add_argument("--max-fail-fraction", dest="max_fail_fraction", type=float,
                   help="exit 1 when more than this fraction of runs fails to converge")

    v = sub.add_parser("verify", help="run a numerical verification suite")
    v.add_argument("suite", choices=sorted(SUITES) + ["all"])
    v.add_argument("--spec", action="append", help="restrict to a retraction: polar, stiefel:M, grassmann:M (repeatable)")

    g = sub.add_parser("gen", help="write one Brockett instance as a text matrix file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    return parser


def _run_options(args):
    opts = dict(RUN_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ArgumentError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(cfg) - set(RUN_DEFAULTS)
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    for key in RUN_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    sizes = opts["sizes"] if isinstance(opts["sizes"], list) else parse_sizes(opts["sizes"])
    thetas = opts["thetas"] if isinstance(opts["thetas"], list) else parse_floats(opts["thetas"])
    if not 0 <= int(opts["seed"]) < 2**64:
        raise ArgumentError("seed must be an unsigned 64-bit integer")
    try:
        return ExperimentSpec(
            sizes=[tuple(s) for s in sizes], thetas=thetas, instances=int(opts["instances"]),
            base_seed=int(opts["seed"]), solver=opts["solver"], m_order=int(opts["m_order"]),
            retraction=opts["retraction"], mode=opts["mode"], eps1=float(opts["eps1"]), eps2=float(opts["eps2"]),
            alpha0=float(opts["alpha0"]), max_outer=int(opts["max_outer"]), out=opts["out"],
            plots=bool(opts["plots"]), parallel=int(opts["parallel"]),
            max_fail_fraction=float(opts["max_fail_fraction"]))
    except ValueError as exc:
        raise ArgumentError(str(exc)) from None


def cmd_run(args):
    spec = _run_options(args)
    results, summary = run_grid(spec)
    print(format_summary(summary))
    for r in results:
        if not r.converged:
            print(f"not converged: St({r.n},{r.p}) theta={r.theta:g} k={r.k} seed={r.seed} status={r.status}")
        if r.violations:
            print(f"invariant violations: St({r.n},{r.p}) theta={r.theta:g} k={r.k}: {r.violations}")
    if spec.out:
        print(f"traces and summary written to {spec.out}")
    bad = failed_fraction(results) > spec.max_fail_fraction or any(r.violations for r in results)
    return 1 if bad else 0


def cmd_verify(args):
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    try:
        specs = [parse_spec(s) for s in args.spec] if args.spec else None
    except ValueError as exc:
        raise ArgumentError(str(exc)) from None
    failed = False
    for name in names:
        checks, elapsed = run_suite(name, specs)
        print(f"== {name} ({elapsed:.2f} s)")
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
            failed |= not c.passed
    return 1 if failed else 0


def cmd_gen(args):
    try:
        obj, x0 = gen_instance(args.n, args.p, args.seed)
    except ValueError as exc:
        raise ArgumentError(str(exc)) from None
    write_instance(args.out, obj, x0)
    print(f"wrote St({args.n},{args.p}) instance with seed {args.seed} to {args.out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "verify": cmd_verify, "gen": cmd_gen}
    try:
        return handlers[args.command](args)
    except ArgumentError as exc:
        parser.print_usage(sys.stderr)
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
