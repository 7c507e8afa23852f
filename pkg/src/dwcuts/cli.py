"""Command-line entry point: ``dwcuts {solve-tkp,solve-mip,check-structure,gen-tkp}``.

Exit codes: 0 proven result, 2 stopped at a limit, 1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time

from . import bnp, tkp
from .colgen import ColGenParams
from .model import ModelError, binarize_linking_integers, check_extended_chain, read_decomposed

log = logging.getLogger("dwcuts")

EXIT_OK, EXIT_ERROR, EXIT_LIMIT = 0, 1, 2


def _round(value):
    """Nine significant digits; non-finite values become null."""
    if value is None:
        return None
    if isinstance(value, bool) or isinstance(value, int):
        return value
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.9g}") + 0.0


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return _round(obj)
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def _params(args) -> ColGenParams:
    return ColGenParams(delta=args.delta, tau=args.tau, eta=args.eta, rho=args.rho, xi=args.xi, eps=args.eps,
                        threads=args.threads, warm_start_budget=args.warm_start_budget)


def run_solve(problem, dec, args, extra: dict, restore=None) -> tuple[dict, int]:
    params = _params(args)
    mode = bnp.NO_CUTS if args.no_cuts else bnp.CUTS
    start = time.perf_counter()
    state = bnp.solve(problem, dec, params, mode, max_nodes=args.max_nodes)
    wall = time.perf_counter() - start
    to_orig = problem.to_original
    root = state.root
    x = state.x
    if x is not None and restore is not None:
        x = restore(x)
    names = extra.pop("names", [v.name for v in problem.variables])
    report = {
        "status": state.status,
        "objective": to_orig(state.incumbent) if math.isfinite(state.incumbent) else None,
        "dual_bound": to_orig(state.bound) if math.isfinite(state.bound) else None,
        "gap": state.gap if math.isfinite(state.gap) else None,
        "nodes": state.nodes,
        "mode": mode,
        "params": {"delta": params.delta, "tau": params.tau, "eta": params.eta, "rho": params.rho,
                   "xi": params.xi, "eps": params.eps, "threads": params.threads,
                   "warm_start_budget": params.warm_start_budget, "max_nodes": args.max_nodes},
        "seed": args.seed,
        "wall_time": wall,
        "blocks": dec.k,
        "solution": None if x is None else {n: float(v) for n, v in zip(names, x)},
    }
    if root is not None:
        sign = -1 if problem.original_sense == "max" else 1
        report["root"] = {
            "objective": to_orig(root.objective + float(problem.objective_offset))
            if math.isfinite(root.objective) else None,
            "integral": root.integral,
            "cut_rounds": root.cut_rounds,
            "cuts_added": root.cuts_added,
            "colgen_iterations": root.colgen_iterations,
            "columns_added": root.columns_added,
            "rounds": [r.to_dict(sign) for r in root.rounds],
        }
    report.update(extra)
    code = {bnp.OPTIMAL: EXIT_OK, bnp.INFEASIBLE: EXIT_OK}.get(state.status, EXIT_LIMIT)
    return report, code


def _emit(report: dict, args):
    text = dump_report(report)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def cmd_solve_tkp(args) -> int:
    inst = tkp.read_instance(args.instance)
    problem = tkp.build_model(inst)
    dec = tkp.decompose(problem, args.block_size)
    report, code = run_solve(problem, dec, args, {"instance": str(args.instance), "block_size": args.block_size,
                                                  "items": inst.n, "capacity": inst.capacity})
    _emit(report, args)
    return code


def cmd_solve_mip(args) -> int:
    problem, dec = read_decomposed(args.model)
    names = [v.name for v in problem.variables]
    restore = None
    has_integer_links = any(problem.variables[v].is_integer and not problem.variables[v].is_binary
                            for v in dec.linking_vars())
    if args.binarize and has_integer_links:
        problem, dec, mapping = binarize_linking_integers(problem, dec)
        restore = mapping.restore
    report, code = run_solve(problem, dec, args, {"model": str(args.model), "binarized": restore is not None,
                                                  "names": names}, restore)
    _emit(report, args)
    return code


def cmd_check_structure(args) -> int:
    problem, dec = read_decomposed(args.model)
    report = check_extended_chain(dec, problem).to_dict(problem)
    report["blocks"] = dec.k
    report["linking_variables"] = [problem.variables[v].name for v in dec.linking_vars()]
    sys.stdout.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_gen_tkp(args) -> int:
    inst = tkp.generate(args.seed, args.n, args.capacity, args.horizon, tuple(args.weight_range),
                        tuple(args.profit_range), tuple(args.duration_range))
    comments = [f"generated seed={args.seed} n={args.n} capacity={args.capacity} horizon={args.horizon or args.n} "
                f"weights={args.weight_range[0]}-{args.weight_range[1]} "
                f"profits={args.profit_range[0]}-{args.profit_range[1]} "
                f"durations={args.duration_range[0]}-{args.duration_range[1]}"]
    text = tkp.format_instance(inst, comments)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _solver_flags(p: argparse.ArgumentParser):
    d = ColGenParams()
    p.add_argument("--delta", type=float, default=d.delta, help="separation threshold")
    p.add_argument("--tau", type=int, default=d.tau, help="pricing work limit (simplex iterations)")
    p.add_argument("--eta", type=float, default=d.eta, help="work limit escalation factor")
    p.add_argument("--rho", type=float, default=d.rho, help="initial stabilization penalty (0 disables)")
    p.add_argument("--xi", type=float, default=d.xi, help="penalty shrink factor")
    p.add_argument("--eps", type=float, default=d.eps, help="penalty floor")
    p.add_argument("--threads", type=int, default=1, help="pricing threads")
    p.add_argument("--warm-start-budget", type=int, default=d.warm_start_budget,
                   help="work limit for the initial compact solve")
    p.add_argument("--max-nodes", type=int, default=10_000)
    p.add_argument("--no-cuts", action="store_true", help="disable consistency cuts")
    p.add_argument("--seed", type=int, default=0, help="recorded in the report")
    p.add_argument("--json-out", help="also write the report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwcuts", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-tkp", help="solve a temporal knapsack instance")
    p.add_argument("instance")
    p.add_argument("--block-size", type=int, default=1)
    _solver_flags(p)
    p.set_defaults(func=cmd_solve_tkp)

    p = sub.add_parser("solve-mip", help="solve a decomposed MIP given as JSON")
    p.add_argument("model")
    p.add_argument("--binarize", action="store_true", help="binary-expand integer linking variables")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve_mip)

    p = sub.add_parser("check-structure", help="report the chain conditions of a decomposition")
    p.add_argument("model")
    p.set_defaults(func=cmd_check_structure)

    p = sub.add_parser("gen-tkp", help="write a random temporal knapsack instance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--horizon", type=int)
    p.add_argument("--weight-range", type=int, nargs=2, default=(1, 5))
    p.add_argument("--profit-range", type=int, nargs=2, default=(1, 20))
    p.add_argument("--duration-range", type=int, nargs=2, default=(1, 5))
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_tkp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=level, format="%(levelname)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (OSError, ValueError, ModelError, tkp.TkpFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
