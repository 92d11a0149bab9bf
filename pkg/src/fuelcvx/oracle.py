"""Exhaustive enumeration over the discrete input set, and LP cross-checks.

For small horizons the original combinatorial problem can be solved
directly: try every sequence in U^N, keep the cheapest one that lands in a
terminal ball around the target. That result is computed without touching
the LP machinery, which makes it an independent referee: if the relaxation
is exact, the LP cost must match the enumeration cost on instances both can
solve. :func:`verify_losslessness` runs that comparison and accounts for
the one systematic difference between the two (the enumeration accepts a
terminal ball, the LP an exact endpoint) through a measured cost
sensitivity.

The search is depth-first with admissible pruning: step costs are
nonnegative, so a prefix whose accumulated cost already exceeds the best
known full sequence cannot improve on it. A deterministic beam probe seeds
the incumbent so pruning bites from the start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import propagate
from .errors import ValidationError
from .inputset import DiscreteInputSet, validate
from .linsys import DiscretizedSystem
from .lpsolve import LpStatus, SolverOptions, solve_lp
from .transcription import extract_solution, transcribe

__all__ = [
    "OracleConfig",
    "OracleResult",
    "LosslessnessReport",
    "enumerate_optimal",
    "verify_losslessness",
]

_OBJECTIVES = ("fuel", "hands_off")


@dataclass(frozen=True)
class OracleConfig:
    """Enumeration parameters.

    ``terminal_tol`` is the radius of the acceptance ball around xf (the
    discrete set rarely reaches a generic target exactly). ``max_nodes``
    bounds the worst-case leaf count |U|^N; calls that could exceed it are
    refused up front rather than discovered to be hopeless at runtime.
    ``objective`` selects the accumulated step cost: "fuel" for
    dt * ||u_k||_1, "hands_off" for dt times the number of active channels.
    ``beam_width`` controls only the incumbent-seeding probe, never
    correctness.
    """

    terminal_tol: float
    max_nodes: int = 100_000_000
    objective: str = "fuel"
    beam_width: int = 64

    def __post_init__(self):
        if not (self.terminal_tol > 0 and np.isfinite(self.terminal_tol)):
            raise ValueError("terminal_tol must be positive and finite")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.objective not in _OBJECTIVES:
            raise ValueError(
                f"objective must be one of {_OBJECTIVES}, got {self.objective!r}"
            )
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


@dataclass(frozen=True)
class OracleResult:
    """Enumeration outcome.

    ``status`` is "optimal" or "infeasible" (no sequence reaches the ball).
    ``indices`` are positions in ``points`` of the input set; ties in cost
    are broken toward the lexicographically smallest index sequence, which
    makes results reproducible across runs and platforms. ``sequence`` is
    the corresponding (N, m) control array.
    """

    status: str
    sequence: np.ndarray | None
    indices: tuple | None
    cost: float
    nodes_visited: int


def _step_costs(points: np.ndarray, dt: float, objective: str) -> np.ndarray:
    if objective == "fuel":
        return dt * np.sum(np.abs(points), axis=1)
    return dt * np.count_nonzero(points, axis=1).astype(float)


def _beam_probe(A_d, Bu, x0, xf, step_cost, N, terminal_tol, width):
    """Deterministic beam search for any feasible sequence, to seed pruning.

    Scores partial sequences by the distance their free drift would miss
    the target by. Returns (cost, indices) of the best feasible sequence
    found, or None. Exactness does not depend on this finding anything.
    """
    n = A_d.shape[0]
    drift = [np.eye(n)]
    for _ in range(N):
        drift.append(A_d @ drift[-1])
    states = x0.reshape(1, n)
    costs = np.zeros(1)
    seqs = [()]
    P = Bu.shape[0]
    for depth in range(N):
        cand_states = (states @ A_d.T)[:, None, :] + Bu[None, :, :]
        cand_states = cand_states.reshape(-1, n)
        cand_costs = (costs[:, None] + step_cost[None, :]).reshape(-1)
        miss = cand_states @ drift[N - depth - 1].T - xf
        scores = np.linalg.norm(miss, axis=1)
        order = np.argsort(scores, kind="stable")[:width]
        states = cand_states[order]
        costs = cand_costs[order]
        seqs = [seqs[i // P] + (i % P,) for i in order]
    feasible = np.linalg.norm(states - xf, axis=1) <= terminal_tol
    if not np.any(feasible):
        return None
    idx = np.flatnonzero(feasible)
    best = min((costs[i], seqs[i]) for i in idx)
    return best


def enumerate_optimal(
    sysd: DiscretizedSystem,
    s: DiscreteInputSet,
    x0,
    xf,
    cfg: OracleConfig,
) -> OracleResult:
    """Exact minimum over U^N of the accumulated cost, terminal ball target.

    Raises ``ValueError`` if |U|^N exceeds ``cfg.max_nodes`` (the message
    states the budget a full search would need) and
    :class:`ValidationError` if the input set is invalid.
    """
    rep = validate(s)
    if not rep.valid:
        raise ValidationError(rep.message, kind="input_set")
    n = sysd.A_d.shape[0]
    if s.m != sysd.B_d.shape[1]:
        raise ValueError(
            f"input set dimension {s.m} does not match system input "
            f"dimension {sysd.B_d.shape[1]}"
        )
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xf = np.asarray(xf, dtype=float).reshape(-1)
    if x0.shape != (n,) or xf.shape != (n,):
        raise ValueError(f"x0 and xf must have shape ({n},)")
    N = sysd.n_steps
    P = s.n_points
    worst = P**N
    if worst > cfg.max_nodes:
        raise ValueError(
            f"search space {P}^{N} = {worst} exceeds max_nodes="
            f"{cfg.max_nodes}; rerun with max_nodes >= {worst} to allow it"
        )

    points = s.points
    A_d = sysd.A_d
    Bu = points @ sysd.B_d.T
    step_cost = _step_costs(points, sysd.dt, cfg.objective)

    # Zero-cost shortcut: if free drift reaches the ball, the all-coast
    # sequence (all indices 0) is optimal and lexicographically least.
    x_drift = x0.copy()
    for _ in range(N):
        x_drift = A_d @ x_drift
    if np.linalg.norm(x_drift - xf) <= cfg.terminal_tol:
        return OracleResult(
            status="optimal",
            sequence=np.zeros((N, s.m)),
            indices=(0,) * N,
            cost=0.0,
            nodes_visited=N,
        )

    probe = _beam_probe(
        A_d, Bu, x0, xf, step_cost, N, cfg.terminal_tol, cfg.beam_width
    )
    best_cost = np.inf
    best_seq = None
    if probe is not None:
        best_cost, best_seq = probe

    # Depth-first search over index sequences, children in index order so
    # equal-cost sequences are met in lexicographic order.
    xs = np.empty((N + 1, n))
    xs[0] = x0
    acc = np.zeros(N + 1)
    child = np.zeros(N + 1, dtype=np.int64)
    path = np.zeros(N, dtype=np.int64)
    depth = 0
    nodes = 0
    while depth >= 0:
        i = child[depth]
        if i == P:
            depth -= 1
            continue
        child[depth] += 1
        c_new = acc[depth] + step_cost[i]
        if c_new > best_cost:
            continue
        nodes += 1
        if nodes > cfg.max_nodes:
            raise ValueError(
                f"visited more than max_nodes={cfg.max_nodes} nodes; raise "
                "the budget to continue"
            )
        x_new = A_d @ xs[depth] + Bu[i]
        path[depth] = i
        if depth + 1 == N:
            if np.linalg.norm(x_new - xf) <= cfg.terminal_tol:
                seq = tuple(int(v) for v in path)
                if c_new < best_cost or (c_new == best_cost and seq < best_seq):
                    best_cost = c_new
                    best_seq = seq
            continue
        xs[depth + 1] = x_new
        acc[depth + 1] = c_new
        child[depth + 1] = 0
        depth += 1

    if best_seq is None:
        return OracleResult(
            status="infeasible",
            sequence=None,
            indices=None,
            cost=np.inf,
            nodes_visited=nodes,
        )
    return OracleResult(
        status="optimal",
        sequence=points[list(best_seq)].copy(),
        indices=tuple(best_seq),
        cost=float(best_cost),
        nodes_visited=nodes,
    )


@dataclass(frozen=True)
class LosslessnessReport:
    """LP-versus-enumeration comparison on one instance.

    ``gap`` is oracle_cost - lp_cost. The enumeration may exploit its
    terminal ball, so the comparison budget is

        eps_gap = sensitivity * terminal_tol + tol_num,

    where ``sensitivity`` is the measured rate of change of the LP cost
    per unit of terminal displacement (finite difference toward the
    enumeration endpoint) and tol_num = 1e-7 * (1 + |lp_cost|) absorbs
    solver and accumulation error. ``certified`` means
    -tol_num <= gap <= eps_gap: the relaxation neither undershot what any
    discrete sequence can do nor left a real gap above it.
    """

    certified: bool
    lp_cost: float
    oracle_cost: float
    gap: float
    sensitivity: float
    eps_gap: float
    tol_num: float
    lp_status: LpStatus
    oracle_status: str
    lp_solution: object
    oracle: OracleResult


def verify_losslessness(
    sysd: DiscretizedSystem,
    s: DiscreteInputSet,
    x0,
    xf,
    cfg: OracleConfig,
    options: SolverOptions | None = None,
) -> LosslessnessReport:
    """Solve the instance by relaxation and by enumeration, then compare."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xf = np.asarray(xf, dtype=float).reshape(-1)
    t_f = sysd.dt * sysd.n_steps
    prob = transcribe(sysd.source, s, x0, xf, t_f, sysd.n_steps)
    res = solve_lp(prob.program, options)
    sol = extract_solution(prob, res.z, status=res.status, solve_time=res.solve_time)
    orc = enumerate_optimal(sysd, s, x0, xf, cfg)

    if res.status != LpStatus.OPTIMAL or orc.status != "optimal":
        return LosslessnessReport(
            certified=False,
            lp_cost=res.objective,
            oracle_cost=orc.cost,
            gap=np.nan,
            sensitivity=np.nan,
            eps_gap=np.nan,
            tol_num=np.nan,
            lp_status=res.status,
            oracle_status=orc.status,
            lp_solution=sol,
            oracle=orc,
        )

    lp_cost = res.objective
    tol_num = 1e-7 * (1.0 + abs(lp_cost))
    gap = orc.cost - lp_cost

    # The enumeration endpoint may sit anywhere in the terminal ball; price
    # that freedom by re-solving the LP toward the point actually reached.
    xN = propagate(sysd, x0, orc.sequence)[-1]
    displacement = float(np.linalg.norm(xN - xf))
    if displacement > 0.0:
        prob2 = transcribe(sysd.source, s, x0, xN, t_f, sysd.n_steps)
        res2 = solve_lp(prob2.program, options)
        if res2.status == LpStatus.OPTIMAL:
            sensitivity = abs(res2.objective - lp_cost) / displacement
        else:
            sensitivity = np.inf
    else:
        sensitivity = 0.0

    eps_gap = sensitivity * cfg.terminal_tol + tol_num
    certified = bool(-tol_num <= gap <= eps_gap)
    return LosslessnessReport(
        certified=certified,
        lp_cost=lp_cost,
        oracle_cost=orc.cost,
        gap=gap,
        sensitivity=sensitivity,
        eps_gap=eps_gap,
        tol_num=tol_num,
        lp_status=res.status,
        oracle_status=orc.status,
        lp_solution=sol,
        oracle=orc,
    )
