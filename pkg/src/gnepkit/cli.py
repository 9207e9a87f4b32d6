"""Batch command-line interface.

Subcommands:
  solve   run the penalty continuation on a problem document; writes
          <name>.trace.csv and <name>.summary.json and prints the summary.
  oracle  print the enumeration oracle's equilibrium certificate as JSON.
  check   run a verification battery (monotone | cocoercive | gradients | gne)
          and print its worst violation.
  bench   solve several documents concurrently, one output pair per run.

Exit codes: 0 success/converged, 1 configuration or document error,
2 stage budget exhausted, 3 inner solver failure, 4 enumeration budget
exceeded.  The environment variable GNEP_LOG (quiet | info | debug) controls
stderr verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .continuation import STATUS_BUDGET, STATUS_CONVERGED, STATUS_INNER_FAILURE
from .errors import GnepError, OracleBudgetError
from .nash import NepConfig
from .oracle import (
    check_bifunction_monotone,
    check_is_gne,
    check_master_map_cocoercive,
    gradient_check,
    oracle_solve,
    sample_box,
)
from .documents import (
    apply_overrides,
    load_document,
    parse_document,
    solve_spec,
    summary_dict,
    write_trace,
)

log = logging.getLogger("gnepkit")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BUDGET = 2
EXIT_INNER = 3
EXIT_ENUM_BUDGET = 4

_STATUS_EXIT = {
    STATUS_CONVERGED: EXIT_OK,
    STATUS_BUDGET: EXIT_BUDGET,
    STATUS_INNER_FAILURE: EXIT_INNER,
}

CHECK_TOLERANCES = {
    "monotone": 1e-9,
    "cocoercive": 1e-6,
    "gradients": 1e-6,
    "gne": 1e-4,
}


def _setup_logging():
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("GNEP_LOG", "quiet"), logging.WARNING
    )
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(level)


def _load_spec(path, overrides=()):
    doc = load_document(path)
    if overrides:
        doc = apply_overrides(doc, overrides)
    spec = parse_document(doc)
    for finding in spec.warnings:
        log.warning("%s: %s", spec.name, finding)
    return spec


def _run_solve(spec, out_dir):
    report = solve_spec(spec)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"{spec.name}.trace.csv"
    summary_path = out_dir / f"{spec.name}.summary.json"
    write_trace(trace_path, spec.game, report)
    summary = summary_dict(report)
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2)
        handle.write("\n")
    return report, summary


def cmd_solve(args):
    spec = _load_spec(args.document, args.set or ())
    report, summary = _run_solve(spec, args.out_dir)
    print(json.dumps(summary, indent=2))
    if report.failure:
        log.warning("%s: %s", spec.name, report.failure)
    return _STATUS_EXIT[report.status]


def cmd_oracle(args):
    spec = _load_spec(args.document)
    truth = oracle_solve(spec.game)
    print(
        json.dumps(
            {
                "x": [float(v) for v in truth.x],
                "lambda": [float(v) for v in truth.lam],
                "active_joint": list(truth.active_joint),
                "active_lower": [list(t) for t in truth.active_lower],
                "active_upper": [list(t) for t in truth.active_upper],
                "residual": truth.residual,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_check(args):
    spec = _load_spec(args.document)
    game, penalty = spec.game, spec.penalty
    tol = args.tol if args.tol is not None else CHECK_TOLERANCES[args.kind]
    if args.kind == "monotone":
        worst = check_bifunction_monotone(game, n_pairs=args.n, seed=args.seed)
    elif args.kind == "cocoercive":
        nep_cfg = spec.master_cfg.nep_cfg
        worst = max(
            check_master_map_cocoercive(game, penalty, tau, n_pairs=args.n,
                                        seed=args.seed, nep_cfg=nep_cfg)
            for tau in (1.0, 10.0)
        )
    elif args.kind == "gradients":
        rng = np.random.default_rng(args.seed)
        points = sample_box(game, rng, args.n)
        shares = np.tile(game.joint.b / game.l, (game.l, 1))
        worst = max(gradient_check(game, penalty, 1.0, shares, x) for x in points)
    else:  # gne: solve, then certify the final point
        report = solve_spec(spec)
        worst = float(check_is_gne(game, report.x).max())
    print(f"{args.kind}: max violation {worst:.6e} (tolerance {tol:g})")
    return EXIT_OK if worst <= tol else EXIT_CONFIG


def cmd_bench(args):
    specs = []
    for path in args.documents:
        specs.append((path, _load_spec(path)))
    codes = []
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_run_solve, spec, args.out_dir) for _, spec in specs]
        for (path, spec), fut in zip(specs, futures):
            try:
                report, _ = fut.result()
                code = _STATUS_EXIT[report.status]
                print(f"{spec.name}: {report.status} (exit {code})")
            except GnepError as exc:
                code = EXIT_CONFIG
                print(f"{spec.name}: error: {exc}")
            codes.append(code)
    return max(codes, default=EXIT_OK)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gnepkit",
        description="Penalty-continuation solver for games with joint constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the continuation on one document")
    p_solve.add_argument("document")
    p_solve.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="dotted-path override, e.g. schedule.k_max=2")
    p_solve.add_argument("--out-dir", default=".")
    p_solve.set_defaults(func=cmd_solve)

    p_oracle = sub.add_parser("oracle", help="print the enumeration oracle certificate")
    p_oracle.add_argument("document")
    p_oracle.set_defaults(func=cmd_oracle)

    p_check = sub.add_parser("check", help="run a verification battery")
    p_check.add_argument("document")
    p_check.add_argument("kind", choices=sorted(CHECK_TOLERANCES))
    p_check.add_argument("n", nargs="?", type=int, default=100, help="sample count")
    p_check.add_argument("seed", nargs="?", type=int, default=42)
    p_check.add_argument("--tol", type=float, default=None)
    p_check.set_defaults(func=cmd_check)

    p_bench = sub.add_parser("bench", help="solve several documents concurrently")
    p_bench.add_argument("documents", nargs="+")
    p_bench.add_argument("--jobs", type=int, default=4)
    p_bench.add_argument("--out-dir", default=".")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OracleBudgetError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENUM_BUDGET
    except GnepError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
