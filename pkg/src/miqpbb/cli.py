"""Command line front end: ``miqpbb generate|solve|bench``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import bench
from .bnb import DEFAULT_INITIAL_UB, MiqpStatus, SolveOptions, solve_miqp
from .errors import MiqpError, ParseError
from .instance_io import GenSpec, generate, read_instance, write_instance, write_result

EXIT_CODES = {
    MiqpStatus.OPTIMAL: 0,
    MiqpStatus.INFEASIBLE: 10,
    MiqpStatus.TIME_LIMIT: 11,
}
EXIT_ERROR = 1


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="miqpbb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write random instances")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--n1", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--kind", choices=["a", "b"], default="a")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--min-eig", type=float, default=0.0,
                   help="lower end of the eigenvalue range (default 0)")
    g.add_argument("--out-dir", type=Path, default=Path("."))

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("--instance", type=Path, required=True)
    s.add_argument("--tol", type=_positive, default=1e-5)
    s.add_argument("--time-limit", type=_positive, default=None, help="seconds")
    s.add_argument("--initial-ub", type=float, default=DEFAULT_INITIAL_UB)
    s.add_argument("--no-early-pruning", action="store_true")
    s.add_argument("--no-warmstart", action="store_true")
    s.add_argument("--out", type=Path, default=None,
                   help="result file (default: <instance>.result.json)")

    b = sub.add_parser("bench", help="solve every instance in a directory, write CSV")
    b.add_argument("--dir", type=Path, required=True)
    b.add_argument("--time-limit", type=_positive, default=None)
    b.add_argument("--out", type=Path, required=True)
    b.add_argument("--configs", default="default",
                   help=f"comma separated, from {', '.join(bench.CONFIGS)}")
    b.add_argument("--jobs", type=int, default=1)
    return parser


def cmd_generate(args, parser) -> int:
    if args.count < 1:
        parser.error("--count must be at least 1")
    try:
        GenSpec(args.n, args.n1, args.m, args.kind, args.seed, args.min_eig)
    except ValueError as exc:
        parser.error(str(exc))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = args.seed + i
        inst = generate(GenSpec(args.n, args.n1, args.m, args.kind, seed, args.min_eig))
        name = f"miqp_n{args.n}_int{args.n1}_m{args.m}_{args.kind}_s{seed}.json"
        write_instance(args.out_dir / name, inst)
        print(args.out_dir / name)
    return 0


def _fmt(v):
    return "-" if v is None or (isinstance(v, float) and math.isinf(v)) else f"{v:.10g}"


def cmd_solve(args, parser) -> int:
    try:
        inst = read_instance(args.instance)
    except (OSError, ParseError, MiqpError) as exc:
        print(f"error: {args.instance}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    opts = SolveOptions(
        time_limit=args.time_limit, tol=args.tol, initial_ub=args.initial_ub,
        early_pruning=not args.no_early_pruning, warmstart=not args.no_warmstart,
    )
    res = solve_miqp(inst, opts)
    out = args.out or args.instance.with_suffix(".result.json")
    write_result(out, res, args.instance.name)
    print(f"status         {res.status.value}")
    print(f"value          {_fmt(res.value)}")
    if res.status is MiqpStatus.TIME_LIMIT:
        print(f"lower bound    {_fmt(res.lower_bound)}")
    print(f"nodes          {res.nodes}")
    print(f"it root        {res.it_root}")
    print(f"it per node    {res.it_per_node_mean:.3f}")
    print(f"ptime          {res.preprocess_seconds:.3f}")
    print(f"time           {res.solve_seconds:.3f}")
    print(f"max violation  {res.max_constraint_violation:.3e}")
    return EXIT_CODES[res.status]


def cmd_bench(args, parser) -> int:
    paths = sorted(args.dir.glob("*.json")) if args.dir.is_dir() else []
    paths = [p for p in paths if not p.name.endswith(".result.json")]
    if not paths:
        parser.error(f"no instance files in {args.dir}")
    configs = [c.strip() for c in args.configs.split(",") if c.strip()]
    unknown = [c for c in configs if c not in bench.CONFIGS]
    if unknown or not configs:
        parser.error(f"unknown config(s): {', '.join(unknown) or '(none)'}")

    times = {}
    for config in configs:
        rows = bench.run_batch(paths, config, args.time_limit, args.jobs)
        target = args.out if len(configs) == 1 else args.out.with_name(
            f"{args.out.stem}_{config}{args.out.suffix or '.csv'}")
        bench.write_rows(target, rows)
        avg = bench.averages(rows)
        print(f"{config}: {avg.pop('solved')}/{len(rows)} solved "
              + " ".join(f"{k}={v:.4g}" for k, v in avg.items()) + f" -> {target}")
        times[config] = {r["instance"]: float(r["time"]) if bench.solved(r) else None for r in rows}
    if len(configs) > 1:
        target = args.out.with_name(f"{args.out.stem}_profile{args.out.suffix or '.csv'}")
        bench.write_rows(target, bench.performance_profile(times), bench.PROFILE_COLUMNS)
        print(f"profile -> {target}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"generate": cmd_generate, "solve": cmd_solve, "bench": cmd_bench}[args.command]
    return handler(args, parser)


if __name__ == "__main__":
    sys.exit(main())
