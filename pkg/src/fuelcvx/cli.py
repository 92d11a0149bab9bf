"""Command-line interface.

Subcommands: ``check`` validates a problem file, ``solve`` runs the full
pipeline on one, ``sweep`` repeats it over grid sizes, ``montecarlo``
samples the bundled rendezvous scenario, and ``oracle-verify`` cross-checks
a small instance against exhaustive enumeration.

Exit codes: 0 success (solved and certified / valid / verified), 2 invalid
problem or arguments, 3 infeasible, 4 solver failure, 5 solved but not
certified.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import ValidationError
from .harness import (
    EXIT_INVALID,
    EXIT_INFEASIBLE,
    EXIT_NOT_CERTIFIED,
    EXIT_OK,
    EXIT_SOLVER_FAILURE,
    MonteCarloConfig,
    ProblemSpec,
    RendezvousScenario,
    run_montecarlo,
    run_solve,
    run_sweep,
)
from .inputset import validate
from .linsys import augment, controllability_rank, zoh_discretize
from .lpsolve import LpStatus, SolverOptions
from .oracle import OracleConfig, verify_losslessness


def _load_spec(path: str) -> ProblemSpec:
    try:
        return ProblemSpec.from_json(path)
    except FileNotFoundError:
        raise ValueError(f"problem file not found: {path}") from None


def _apply_overrides(spec: ProblemSpec, args) -> ProblemSpec:
    changes = {}
    if getattr(args, "n_steps", None) is not None:
        changes["N"] = args.n_steps
    if getattr(args, "tf", None) is not None:
        changes["t_f"] = args.tf
    if changes:
        spec = dataclasses.replace(spec, **changes)
    return spec


def _solver_options(spec: ProblemSpec, args) -> SolverOptions:
    kw = dict(spec.solver)
    if getattr(args, "tol", None) is not None:
        kw["tol_feas"] = args.tol
        kw["tol_gap"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        kw["max_iter"] = args.max_iter
    return SolverOptions(**kw)


def _cmd_check(args) -> int:
    spec = _load_spec(args.problem)
    rep = validate(spec.input_set)
    ctrl = controllability_rank(spec.system)
    aug = augment(spec.system)
    print(f"system        : n={spec.system.n} m={spec.system.m}")
    print(
        f"input set     : {spec.input_set.n_points} points, "
        f"u_max={spec.input_set.u_max:g}, {rep.message}"
    )
    print(
        f"controllable  : {ctrl.is_controllable} "
        f"(rank {ctrl.rank}/{ctrl.n}), extended pair "
        f"{aug.controllability.is_controllable} "
        f"(rank {aug.controllability.rank}/{aug.controllability.n})"
    )
    print(f"horizon       : t_f={spec.t_f:g} N={spec.N} dt={spec.t_f / spec.N:g}")
    ok = rep.valid and ctrl.is_controllable
    print(f"valid         : {ok}")
    return EXIT_OK if ok else EXIT_INVALID


def _cmd_solve(args) -> int:
    spec = _apply_overrides(_load_spec(args.problem), args)
    options = _solver_options(spec, args)
    rep = run_solve(spec, out_dir=args.out, options=options, problem_path=args.problem)
    if rep.error is not None:
        print(f"invalid problem: {rep.error}", file=sys.stderr)
        return rep.exit_code
    print(f"status            : {rep.status}")
    if rep.lp is not None:
        print(f"iterations        : {rep.lp.iterations}")
        print(f"solve time        : {rep.lp.solve_time:.3f} s")
    if rep.solution is not None:
        print(f"objective         : {rep.lp.objective:.9g}")
        print(f"terminal residual : {rep.solution.terminal_residual:.3e}")
        print(f"mean distance     : {rep.discreteness.d_bar:.3e}")
        print(f"vertex fraction   : {rep.discreteness.fraction_on_vertices:.4f}")
        print(f"hands-off measure : {rep.hands_off:.6g}")
        print(f"certified         : {rep.certificate.ok}")
    elif rep.lp is not None and rep.lp.certificate is not None:
        print(f"certificate       : {rep.lp.certificate.kind}")
    if args.out:
        print(f"artifacts         : {args.out}")
    return rep.exit_code


def _cmd_sweep(args) -> int:
    spec = _apply_overrides(_load_spec(args.problem), args)
    try:
        n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
    except ValueError:
        print(f"bad --n-list: {args.n_list!r}", file=sys.stderr)
        return EXIT_INVALID
    if not n_list:
        print("empty --n-list", file=sys.stderr)
        return EXIT_INVALID
    records = run_sweep(spec, n_list, out_dir=args.out)
    print(f"{'N':>6} {'status':<18} {'cost':>14} {'d_bar':>12} {'time':>8}")
    for rec in records:
        print(
            f"{rec['N']:>6} {rec['status']:<18} {rec['cost']:>14.6g} "
            f"{rec['d_bar']:>12.4e} {rec['solve_time']:>8.3f}"
        )
    return max((rec["exit_code"] for rec in records), default=EXIT_OK)


def _cmd_montecarlo(args) -> int:
    scenario = RendezvousScenario(u_max=args.u_max)
    cfg = MonteCarloConfig(
        n_samples=args.samples,
        seed=args.seed,
        t_f=args.tf,
        N=args.n_steps,
    )
    solver = {}
    if args.tol is not None:
        solver = {"tol_feas": args.tol, "tol_gap": args.tol}
    report = run_montecarlo(cfg, scenario, out_dir=args.out, solver=solver)
    s = report["summary"]
    print(f"samples            : {s['n_samples']} (seed {s['seed']})")
    print(f"statuses           : {s['statuses']}")
    print(
        f"solve time         : mean {s['solve_time_mean']:.3f} s, "
        f"median {s['solve_time_median']:.3f} s, max {s['solve_time_max']:.3f} s"
    )
    print(
        f"d_bar / u_max      : mean {s['d_bar_over_u_max_mean']:.4e}, "
        f"max {s['d_bar_over_u_max_max']:.4e}"
    )
    if args.out:
        print(f"artifacts          : {args.out}")
    return EXIT_OK if s["all_optimal"] else EXIT_SOLVER_FAILURE


def _cmd_oracle_verify(args) -> int:
    spec = _apply_overrides(_load_spec(args.problem), args)
    sysd = zoh_discretize(spec.system, spec.t_f / spec.N, spec.N)
    cfg = OracleConfig(
        terminal_tol=args.terminal_tol,
        max_nodes=args.max_nodes,
        objective=args.objective,
    )
    rep = verify_losslessness(sysd, spec.input_set, spec.x0, spec.xf, cfg)
    print(f"lp status     : {rep.lp_status.value}")
    print(f"oracle status : {rep.oracle_status}")
    print(f"lp cost       : {rep.lp_cost:.9g}")
    print(f"oracle cost   : {rep.oracle_cost:.9g}")
    print(f"gap           : {rep.gap:.3e} (budget {rep.eps_gap:.3e})")
    print(f"nodes visited : {rep.oracle.nodes_visited}")
    print(f"certified     : {rep.certified}")
    if rep.certified:
        return EXIT_OK
    if rep.lp_status == LpStatus.PRIMAL_INFEASIBLE or rep.oracle_status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_NOT_CERTIFIED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fuelcvx",
        description="Fuel-optimal control with discrete input sets via convex relaxation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a problem file")
    p.add_argument("problem", help="path to a problem JSON file")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("solve", help="solve one problem")
    p.add_argument("problem", help="path to a problem JSON file")
    p.add_argument("--out", help="directory for solution.csv and report.json")
    p.add_argument("--n-steps", type=int, help="override the grid size N")
    p.add_argument("--tf", type=float, help="override the horizon t_f")
    p.add_argument("--tol", type=float, help="solver feasibility/gap tolerance")
    p.add_argument("--max-iter", type=int, help="solver iteration cap")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="solve one problem across grid sizes")
    p.add_argument("problem", help="path to a problem JSON file")
    p.add_argument(
        "--n-list",
        required=True,
        help="comma-separated grid sizes, e.g. 100,200,400",
    )
    p.add_argument("--tf", type=float, help="override the horizon t_f")
    p.add_argument("--out", help="directory for sweep.csv and report.json")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser(
        "montecarlo", help="random rendezvous instances, aggregate statistics"
    )
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tf", type=float, default=300.0)
    p.add_argument("--n-steps", type=int, default=400)
    p.add_argument("--u-max", type=float, default=1.0)
    p.add_argument("--tol", type=float, help="solver feasibility/gap tolerance")
    p.add_argument("--out", help="directory for montecarlo.csv and report.json")
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser(
        "oracle-verify",
        help="cross-check a small instance against exhaustive enumeration",
    )
    p.add_argument("problem", help="path to a problem JSON file")
    p.add_argument("--terminal-tol", type=float, default=1e-6)
    p.add_argument("--max-nodes", type=int, default=100_000_000)
    p.add_argument(
        "--objective", choices=["fuel", "hands_off"], default="fuel"
    )
    p.add_argument("--n-steps", type=int, help="override the grid size N")
    p.add_argument("--tf", type=float, help="override the horizon t_f")
    p.set_defaults(func=_cmd_oracle_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
