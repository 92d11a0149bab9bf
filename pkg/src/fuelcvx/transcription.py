"""Transcription of the fuel-optimal problem into a sparse LP.

The continuous problem (minimize the integral of ||u||_1 subject to the
dynamics, boundary states, and inputs confined to the convex hull of the
admissible set) becomes, after exact ZOH discretization with N steps:

    minimize    dt * sum_k nu_k
    subject to  x_{k+1} = A_d x_k + B_d (up_k - um_k)        k = 0..N-1
                x_0 = x0,  x_N = xf
                sum_j (up_kj + um_kj) <= nu_k                k = 0..N-1
                nu_k <= u_max                                k = 0..N-1
                up, um, nu >= 0,  states free

with the input split u = up - um into nonnegative parts so the 1-norm is
linear. The per-step variable block is (up, um, nu), 2m + 1 entries, and the
state trajectory stays in the variable vector rather than being eliminated,
which keeps the matrices banded and the problem well scaled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .inputset import DiscreteInputSet, validate
from .linsys import (
    AugmentedSystem,
    DiscretizedSystem,
    LtiSystem,
    augment,
    controllability_rank,
    zoh_discretize,
)

__all__ = [
    "VariableLayout",
    "StandardFormProgram",
    "TranscribedProblem",
    "transcribe",
    "extract_solution",
]


@dataclass(frozen=True)
class VariableLayout:
    """Index map for the stacked LP variable vector.

    Layout: N input blocks of size 2m + 1 (up_k, um_k, nu_k), then the
    N + 1 node states. All offsets are pure arithmetic so the layout can be
    reasoned about (and tested) without touching a matrix.
    """

    n: int
    m: int
    N: int

    @property
    def input_block(self) -> int:
        """Size of one per-step input block."""
        return 2 * self.m + 1

    @property
    def n_input_vars(self) -> int:
        return self.N * self.input_block

    @property
    def n_state_vars(self) -> int:
        return (self.N + 1) * self.n

    @property
    def n_vars(self) -> int:
        return self.n_input_vars + self.n_state_vars

    def u_plus(self, k: int) -> slice:
        base = k * self.input_block
        return slice(base, base + self.m)

    def u_minus(self, k: int) -> slice:
        base = k * self.input_block + self.m
        return slice(base, base + self.m)

    def nu(self, k: int) -> int:
        return k * self.input_block + 2 * self.m

    def x(self, k: int) -> slice:
        base = self.n_input_vars + k * self.n
        return slice(base, base + self.n)


@dataclass(frozen=True)
class StandardFormProgram:
    """Sparse LP data: min c'z s.t. E z = e, G z <= g, z_i >= lb_i.

    Free variables carry lb = -inf. Matrices are CSR; the solver converts
    as it needs.
    """

    c: np.ndarray
    E: sp.csr_matrix
    e: np.ndarray
    G: sp.csr_matrix
    g: np.ndarray
    lb: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class TranscribedProblem:
    """A transcribed instance: program plus everything needed to interpret it."""

    program: StandardFormProgram
    layout: VariableLayout
    sysd: DiscretizedSystem
    augmented: AugmentedSystem
    input_set: DiscreteInputSet
    x0: np.ndarray
    xf: np.ndarray
    t_f: float


def transcribe(
    sys: LtiSystem,
    input_set: DiscreteInputSet,
    x0,
    xf,
    t_f: float,
    N: int,
) -> TranscribedProblem:
    """Build the LP for steering x0 to xf over horizon t_f in N ZOH steps.

    Raises :class:`ValidationError` if the input set is geometrically
    invalid or the pair (A, B) is uncontrollable. Controllability is what
    certifies that the Hamiltonian minimizer is unique almost everywhere,
    and hence that an optimal relaxed solution can be read back as a
    discrete one; transcribing an uncontrollable pair would silently drop
    that guarantee, so it is refused instead.
    """
    n, m = sys.n, sys.m
    if input_set.m != m:
        raise ValueError(
            f"input set dimension {input_set.m} does not match system input "
            f"dimension {m}"
        )
    rep = validate(input_set)
    if not rep.valid:
        raise ValidationError(rep.message, kind="input_set")
    ctrl = controllability_rank(sys)
    if not ctrl.is_controllable:
        raise ValidationError(
            f"pair (A, B) is uncontrollable (Kalman rank {ctrl.rank} < {n}); "
            "uniqueness of the optimal input at almost every time is not "
            "certified, so discrete recovery from the relaxed solution would "
            "be unsound",
            kind="controllability",
        )
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xf = np.asarray(xf, dtype=float).reshape(-1)
    if x0.shape != (n,) or xf.shape != (n,):
        raise ValueError(f"x0 and xf must have shape ({n},)")
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(xf))):
        raise ValueError("x0 and xf must be finite")
    if not (t_f > 0.0 and np.isfinite(t_f)):
        raise ValueError(f"t_f must be positive and finite, got {t_f}")
    N = int(N)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")

    dt = t_f / N
    sysd = zoh_discretize(sys, dt, N)
    aug = augment(sys)
    lay = VariableLayout(n=n, m=m, N=N)
    sb = lay.input_block
    x_off = lay.n_input_vars
    A_d, B_d = sysd.A_d, sysd.B_d

    # Equality block: N dynamics rows, then x_0 pin, then x_N pin.
    kk = np.arange(N)
    ii, jj = np.divmod(np.arange(n * n), n)
    ib, jb = np.divmod(np.arange(n * m), m)

    rows = [
        np.repeat(kk * n, n) + np.tile(np.arange(n), N),
        np.repeat(kk * n, n * n) + np.tile(ii, N),
        np.repeat(kk * n, n * m) + np.tile(ib, N),
        np.repeat(kk * n, n * m) + np.tile(ib, N),
        N * n + np.arange(n),
        N * n + n + np.arange(n),
    ]
    cols = [
        x_off + n + np.repeat(kk * n, n) + np.tile(np.arange(n), N),
        x_off + np.repeat(kk * n, n * n) + np.tile(jj, N),
        np.repeat(kk * sb, n * m) + np.tile(jb, N),
        np.repeat(kk * sb, n * m) + np.tile(jb, N) + m,
        x_off + np.arange(n),
        x_off + N * n + np.arange(n),
    ]
    vals = [
        np.ones(N * n),
        np.tile(-A_d.ravel(), N),
        np.tile(-B_d.ravel(), N),
        np.tile(B_d.ravel(), N),
        np.ones(n),
        np.ones(n),
    ]
    E = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=((N + 2) * n, lay.n_vars),
    )
    e = np.concatenate([np.zeros(N * n), x0, xf])

    # Inequality block: N epigraph rows, then N cap rows.
    g_rows = [
        np.repeat(kk, 2 * m),
        kk,
        N + kk,
    ]
    g_cols = [
        np.repeat(kk * sb, 2 * m) + np.tile(np.arange(2 * m), N),
        kk * sb + 2 * m,
        kk * sb + 2 * m,
    ]
    g_vals = [
        np.ones(N * 2 * m),
        -np.ones(N),
        np.ones(N),
    ]
    G = sp.csr_matrix(
        (np.concatenate(g_vals), (np.concatenate(g_rows), np.concatenate(g_cols))),
        shape=(2 * N, lay.n_vars),
    )
    g = np.concatenate([np.zeros(N), np.full(N, input_set.u_max)])

    c = np.zeros(lay.n_vars)
    c[[lay.nu(k) for k in range(N)]] = dt

    lb = np.concatenate([np.zeros(lay.n_input_vars), np.full(lay.n_state_vars, -np.inf)])

    program = StandardFormProgram(c=c, E=E, e=e, G=G, g=g, lb=lb)
    return TranscribedProblem(
        program=program,
        layout=lay,
        sysd=sysd,
        augmented=aug,
        input_set=input_set,
        x0=x0,
        xf=xf,
        t_f=float(t_f),
    )


def extract_solution(
    prob: TranscribedProblem,
    z: np.ndarray,
    status=None,
    solve_time: float = float("nan"),
    tol_comp: float | None = None,
):
    """Reassemble trajectories from the stacked LP primal vector.

    Returns an :class:`fuelcvx.analysis.Solution`. Two per-step diagnostics
    are recorded while unpacking: steps where both split halves of some
    input channel are active (min(up, um) > tol_comp, which would inflate
    nu above the true 1-norm), and steps where nu exceeds ||u_k||_1 by more
    than tol_comp. Both are empty for a clean optimum; nonempty tuples
    point at a solver that stopped short.
    """
    from .analysis import Solution

    lay = prob.layout
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (lay.n_vars,):
        raise ValueError(f"z must have shape ({lay.n_vars},), got {z.shape}")
    if tol_comp is None:
        tol_comp = 1e-6 * max(1.0, prob.input_set.u_max)

    N, m, n = lay.N, lay.m, lay.n
    up = np.empty((N, m))
    um = np.empty((N, m))
    nu = np.empty(N)
    for k in range(N):
        up[k] = z[lay.u_plus(k)]
        um[k] = z[lay.u_minus(k)]
        nu[k] = z[lay.nu(k)]
    x = z[lay.n_input_vars :].reshape(N + 1, n).copy()
    u = up - um

    overlap = np.minimum(up, um)
    split_overlaps = tuple(
        (int(k), int(j)) for k, j in np.argwhere(overlap > tol_comp)
    )
    gaps = nu - np.sum(np.abs(u), axis=1)
    slack_gap_steps = tuple(int(k) for k in np.flatnonzero(gaps > tol_comp))

    return Solution(
        u=u,
        nu=nu,
        x=x,
        dt=prob.sysd.dt,
        cost=float(prob.program.c @ z),
        status=status,
        solve_time=float(solve_time),
        sysd=prob.sysd,
        xf=prob.xf,
        split_overlaps=split_overlaps,
        slack_gap_steps=slack_gap_steps,
    )
