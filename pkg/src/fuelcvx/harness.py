"""Problem containers, orbital rendezvous scenario, and batch runners.

Ties the pipeline together: a JSON-serializable :class:`ProblemSpec` feeds
:func:`run_solve` (transcribe, solve, analyze, certify, write artifacts),
:func:`run_sweep` repeats a problem across grid resolutions, and
:func:`run_montecarlo` samples initial conditions for the bundled
relative-motion rendezvous scenario with a counter-based RNG so any sample
can be reproduced in isolation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    discreteness_report,
    hands_off_measure,
    tol_vertex,
    verify_bang_bang,
)
from .errors import ValidationError
from .inputset import DiscreteInputSet
from .linsys import LtiSystem
from .lpsolve import LpStatus, SolverOptions, solve_lp
from .transcription import extract_solution, transcribe

__all__ = [
    "EXIT_OK",
    "EXIT_INVALID",
    "EXIT_INFEASIBLE",
    "EXIT_SOLVER_FAILURE",
    "EXIT_NOT_CERTIFIED",
    "ProblemSpec",
    "RendezvousScenario",
    "MonteCarloConfig",
    "RunReport",
    "cw_system",
    "rendezvous_input_set",
    "rendezvous_problem",
    "run_solve",
    "run_sweep",
    "run_montecarlo",
]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER_FAILURE = 4
EXIT_NOT_CERTIFIED = 5


@dataclass(frozen=True)
class ProblemSpec:
    """Self-contained problem definition with JSON round-trip.

    ``solver`` holds keyword overrides for :class:`SolverOptions`. ``xf``
    defaults to the origin and ``N`` to 400 when absent from a file.
    """

    system: LtiSystem
    input_set: DiscreteInputSet
    x0: np.ndarray
    xf: np.ndarray
    t_f: float
    N: int = 400
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.system.n
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        xf = np.asarray(self.xf, dtype=float).reshape(-1)
        if x0.shape != (n,) or xf.shape != (n,):
            raise ValueError(f"x0 and xf must have shape ({n},)")
        x0.setflags(write=False)
        xf.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xf", xf)
        if not (self.t_f > 0 and np.isfinite(self.t_f)):
            raise ValueError(f"t_f must be positive and finite, got {self.t_f}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**self.solver)

    def to_dict(self) -> dict:
        return {
            "A": self.system.A.tolist(),
            "B": self.system.B.tolist(),
            "input_set": {
                "m": self.input_set.m,
                "u_max": self.input_set.u_max,
                "W": self.input_set.W.tolist(),
            },
            "x0": self.x0.tolist(),
            "xf": self.xf.tolist(),
            "t_f": self.t_f,
            "N": self.N,
            "solver": dict(self.solver),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        try:
            sys_ = LtiSystem(np.asarray(d["A"], dtype=float), np.asarray(d["B"], dtype=float))
            iset = d["input_set"]
            input_set = DiscreteInputSet(
                m=int(iset["m"]),
                u_max=float(iset["u_max"]),
                W=np.asarray(iset.get("W", []), dtype=float),
            )
            x0 = np.asarray(d["x0"], dtype=float)
            n = sys_.n
            xf = np.asarray(d.get("xf", np.zeros(n)), dtype=float)
            return cls(
                system=sys_,
                input_set=input_set,
                x0=x0,
                xf=xf,
                t_f=float(d["t_f"]),
                N=int(d.get("N", 400)),
                solver=dict(d.get("solver", {})),
            )
        except KeyError as exc:
            raise ValueError(f"problem file is missing required key {exc}") from exc

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "ProblemSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RendezvousScenario:
    """Relative motion about a circular-orbit target.

    The linearized relative dynamics about a target on a circular orbit of
    radius ``R`` (gravitational parameter ``mu``) have the familiar form
    with mean motion n = sqrt(mu / R^3): the in-plane coordinates couple
    through 3 n^2 and 2 n terms and the cross-track axis is a decoupled
    oscillator. Accelerations act directly on the three velocity states
    and are drawn from the discrete thrust set built by
    :func:`rendezvous_input_set`.
    """

    R: float = 7102.8e3
    mu: float = 3.986004418e14
    u_max: float = 1.0

    @property
    def mean_motion(self) -> float:
        return float(np.sqrt(self.mu / self.R**3))


def cw_system(scenario: RendezvousScenario) -> LtiSystem:
    """Six-state relative-motion plant (position, velocity in LVLH axes)."""
    n = scenario.mean_motion
    A = np.zeros((6, 6))
    A[0:3, 3:6] = np.eye(3)
    A[3, 0] = 3.0 * n**2
    A[3, 4] = 2.0 * n
    A[4, 3] = -2.0 * n
    A[5, 2] = -(n**2)
    B = np.zeros((6, 3))
    B[3:6, :] = np.eye(3)
    return LtiSystem(A, B)


def rendezvous_input_set(scenario: RendezvousScenario) -> DiscreteInputSet:
    """Thrust set for the rendezvous: axis burns plus face and corner points.

    Beyond coast and the six signed axis burns, the set includes the six
    signed two-axis combinations at half magnitude and the two symmetric
    three-axis combinations at one-third magnitude, all on the boundary of
    the 1-norm ball: 15 points total.
    """
    u = scenario.u_max
    W = []
    for i in range(3):
        for j in range(i + 1, 3):
            w = np.zeros(3)
            w[i] = u / 2.0
            w[j] = u / 2.0
            W.append(w.copy())
            W.append(-w)
    W.append(np.full(3, u / 3.0))
    W.append(np.full(3, -u / 3.0))
    return DiscreteInputSet(m=3, u_max=u, W=np.array(W))


def rendezvous_problem(
    scenario: RendezvousScenario,
    r0,
    v0,
    t_f: float,
    N: int,
    solver: dict | None = None,
) -> ProblemSpec:
    """Problem spec for steering relative state (r0, v0) to the origin."""
    r0 = np.asarray(r0, dtype=float).reshape(3)
    v0 = np.asarray(v0, dtype=float).reshape(3)
    return ProblemSpec(
        system=cw_system(scenario),
        input_set=rendezvous_input_set(scenario),
        x0=np.concatenate([r0, v0]),
        xf=np.zeros(6),
        t_f=t_f,
        N=N,
        solver=dict(solver or {}),
    )


@dataclass(frozen=True)
class RunReport:
    """Everything :func:`run_solve` learned about one instance."""

    exit_code: int
    status: str
    lp: object
    solution: object
    discreteness: object
    certificate: object
    hands_off: float
    total_time: float
    error: str | None = None


def _status_exit(status: LpStatus) -> int:
    if status == LpStatus.OPTIMAL:
        return EXIT_OK
    if status == LpStatus.PRIMAL_INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_SOLVER_FAILURE


def _env_block(problem_path=None) -> dict:
    block = {
        "fuelcvx_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
    }
    if problem_path is not None:
        data = Path(problem_path).read_bytes()
        block["problem_sha256"] = hashlib.sha256(data).hexdigest()
    return block


def _write_solution_csv(path, sol, report) -> None:
    """One row per node: time, state, then input columns for the step that
    starts there (blank on the final node, which starts no step)."""
    n = sol.x.shape[1]
    m = sol.u.shape[1]
    header = (
        ["t"]
        + [f"x{i+1}" for i in range(n)]
        + [f"u{j+1}" for j in range(m)]
        + ["nu", "d"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(sol.N + 1):
            row = [f"{k * sol.dt:.15g}"] + [f"{v:.15g}" for v in sol.x[k]]
            if k < sol.N:
                row += [f"{v:.15g}" for v in sol.u[k]]
                row += [f"{sol.nu[k]:.15g}", f"{report.d[k]:.15g}"]
            else:
                row += [""] * (m + 2)
            writer.writerow(row)


def run_solve(
    spec: ProblemSpec,
    out_dir=None,
    options: SolverOptions | None = None,
    problem_path=None,
) -> RunReport:
    """Full pipeline on one problem; optionally writes csv/json artifacts.

    Exit code semantics: 0 solved and certified bang-bang, 2 invalid
    problem, 3 infeasible (with Farkas certificate in the report), 4 the
    solver gave up, 5 solved but the discreteness certificate failed.
    """
    t_start = time.perf_counter()
    if options is None:
        options = spec.solver_options()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def _finish(report, json_extra):
        if out is not None:
            payload = {
                "environment": _env_block(problem_path),
                "problem": spec.to_dict(),
                **json_extra,
            }
            (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
        return report

    try:
        prob = transcribe(
            spec.system, spec.input_set, spec.x0, spec.xf, spec.t_f, spec.N
        )
    except (ValidationError, ValueError) as exc:
        total = time.perf_counter() - t_start
        report = RunReport(
            exit_code=EXIT_INVALID,
            status="invalid",
            lp=None,
            solution=None,
            discreteness=None,
            certificate=None,
            hands_off=float("nan"),
            total_time=total,
            error=str(exc),
        )
        return _finish(report, {"status": "invalid", "error": str(exc)})

    res = solve_lp(prob.program, options)
    if res.status != LpStatus.OPTIMAL:
        total = time.perf_counter() - t_start
        extra = {
            "status": res.status.value,
            "lp": {
                "iterations": res.iterations,
                "solve_time": res.solve_time,
            },
        }
        if res.certificate is not None:
            cert = res.certificate
            extra["certificate"] = {
                "kind": cert.kind,
                "value": cert.value,
            }
        report = RunReport(
            exit_code=_status_exit(res.status),
            status=res.status.value,
            lp=res,
            solution=None,
            discreteness=None,
            certificate=None,
            hands_off=float("nan"),
            total_time=total,
            error=None,
        )
        return _finish(report, extra)

    sol = extract_solution(prob, res.z, status=res.status, solve_time=res.solve_time)
    disc = discreteness_report(spec.input_set, sol)
    cert = verify_bang_bang(spec.input_set, sol)
    l0 = hands_off_measure(sol, tol_vertex(spec.input_set.u_max))
    total = time.perf_counter() - t_start
    exit_code = EXIT_OK if cert.ok else EXIT_NOT_CERTIFIED

    if out is not None:
        _write_solution_csv(out / "solution.csv", sol, disc)
    extra = {
        "status": res.status.value,
        "objective": res.objective,
        "solve_time": res.solve_time,
        "total_time": total,
        "iterations": res.iterations,
        "terminal_residual": sol.terminal_residual,
        "d_bar": disc.d_bar,
        "d_bar_over_u_max": disc.d_bar / spec.input_set.u_max,
        "fraction_on_vertices": disc.fraction_on_vertices,
        "quantized_terminal_error": disc.quantized_terminal_error,
        "hands_off_measure": l0,
        "bang_bang_ok": cert.ok,
        "max_slack_gap": cert.max_slack_gap,
        "exceptions": list(cert.exceptions),
    }
    report = RunReport(
        exit_code=exit_code,
        status=res.status.value,
        lp=res,
        solution=sol,
        discreteness=disc,
        certificate=cert,
        hands_off=l0,
        total_time=total,
        error=None,
    )
    return _finish(report, extra)


def run_sweep(spec: ProblemSpec, n_list, out_dir=None) -> list[dict]:
    """Re-solve one problem over a list of grid sizes.

    Returns one record per N with cost, mean distance to the input set,
    vertex fraction, and timings. A failed N is recorded with its status
    and the sweep continues.
    """
    records = []
    for N in n_list:
        sub = ProblemSpec(
            system=spec.system,
            input_set=spec.input_set,
            x0=spec.x0,
            xf=spec.xf,
            t_f=spec.t_f,
            N=int(N),
            solver=dict(spec.solver),
        )
        rep = run_solve(sub)
        rec = {
            "N": int(N),
            "status": rep.status,
            "exit_code": rep.exit_code,
            "cost": rep.lp.objective if rep.lp is not None else float("nan"),
            "solve_time": rep.lp.solve_time if rep.lp is not None else float("nan"),
            "d_bar": rep.discreteness.d_bar if rep.discreteness else float("nan"),
            "fraction_on_vertices": (
                rep.discreteness.fraction_on_vertices
                if rep.discreteness
                else float("nan")
            ),
            "hands_off": rep.hands_off,
        }
        records.append(rec)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fields = list(records[0].keys()) if records else []
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(records)
        (out / "report.json").write_text(
            json.dumps({"environment": _env_block(), "records": records}, indent=2)
            + "\n"
        )
    return records


@dataclass(frozen=True)
class MonteCarloConfig:
    """Sampling plan for the rendezvous Monte Carlo.

    Initial positions are uniform on [-r_bound, r_bound]^3 and velocities
    on [-v_bound, v_bound]^3. Each sample k draws from a counter-based
    generator keyed by (seed, k), so results do not depend on execution
    order and any single sample can be regenerated alone.
    """

    n_samples: int = 100
    seed: int = 0
    t_f: float = 300.0
    N: int = 400
    r_bound: float = 500.0
    v_bound: float = 5.0

    def sample_x0(self, index: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(key=[self.seed, index]))
        r = rng.uniform(-self.r_bound, self.r_bound, 3)
        v = rng.uniform(-self.v_bound, self.v_bound, 3)
        return np.concatenate([r, v])


def run_montecarlo(
    cfg: MonteCarloConfig,
    scenario: RendezvousScenario | None = None,
    out_dir=None,
    solver: dict | None = None,
) -> dict:
    """Solve ``cfg.n_samples`` random rendezvous instances and aggregate.

    Returns a report dict with per-sample rows and summary statistics
    (status counts, solve-time and relative-distance means, medians,
    maxima, and histograms)."""
    if scenario is None:
        scenario = RendezvousScenario()
    rows = []
    for k in range(cfg.n_samples):
        x0 = cfg.sample_x0(k)
        spec = ProblemSpec(
            system=cw_system(scenario),
            input_set=rendezvous_input_set(scenario),
            x0=x0,
            xf=np.zeros(6),
            t_f=cfg.t_f,
            N=cfg.N,
            solver=dict(solver or {}),
        )
        rep = run_solve(spec)
        rows.append(
            {
                "sample": k,
                "status": rep.status,
                "cost": rep.lp.objective if rep.lp is not None else float("nan"),
                "solve_time": rep.lp.solve_time if rep.lp is not None else float("nan"),
                "d_bar": rep.discreteness.d_bar if rep.discreteness else float("nan"),
                "d_bar_over_u_max": (
                    rep.discreteness.d_bar / scenario.u_max
                    if rep.discreteness
                    else float("nan")
                ),
                "fraction_on_vertices": (
                    rep.discreteness.fraction_on_vertices
                    if rep.discreteness
                    else float("nan")
                ),
                "terminal_residual": (
                    rep.solution.terminal_residual if rep.solution else float("nan")
                ),
            }
        )

    def _hist(values, n_bins=10):
        vals = np.asarray(values, dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            return {"edges": [], "counts": []}
        counts, edges = np.histogram(vals, bins=n_bins)
        return {"edges": edges.tolist(), "counts": counts.tolist()}

    statuses = {}
    for r in rows:
        statuses[r["status"]] = statuses.get(r["status"], 0) + 1
    times = [r["solve_time"] for r in rows if np.isfinite(r["solve_time"])]
    dbars = [r["d_bar_over_u_max"] for r in rows if np.isfinite(r["d_bar_over_u_max"])]
    summary = {
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "t_f": cfg.t_f,
        "N": cfg.N,
        "statuses": statuses,
        "all_optimal": statuses.get(LpStatus.OPTIMAL.value, 0) == cfg.n_samples,
        "solve_time_mean": float(np.mean(times)) if times else float("nan"),
        "solve_time_median": float(np.median(times)) if times else float("nan"),
        "solve_time_max": float(np.max(times)) if times else float("nan"),
        "d_bar_over_u_max_mean": float(np.mean(dbars)) if dbars else float("nan"),
        "d_bar_over_u_max_max": float(np.max(dbars)) if dbars else float("nan"),
        "solve_time_hist": _hist(times),
        "d_bar_over_u_max_hist": _hist(dbars),
    }
    report = {"environment": _env_block(), "summary": summary, "samples": rows}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "montecarlo.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report
