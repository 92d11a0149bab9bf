"""Continuous-time LTI plants, cost-state augmentation, and ZOH discretization.

The model throughout the package is

    xdot(t) = A x(t) + B u(t),   x in R^n,  u in R^m.

Fuel accounting adds one scalar state whose derivative is the epigraph
variable bounding the 1-norm of the input, so minimizing the terminal value
of that state minimizes total fuel. :func:`augment` builds that extended
pair; :func:`zoh_discretize` produces exact zero-order-hold step matrices
through a block matrix exponential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ValidationError

__all__ = [
    "LtiSystem",
    "AugmentedSystem",
    "DiscretizedSystem",
    "ControllabilityReport",
    "matrix_exponential",
    "controllability_rank",
    "augment",
    "zoh_discretize",
]


def _as_readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LtiSystem:
    """Continuous-time pair (A, B) with A n-by-n and B n-by-m.

    Arrays are copied to float64 and frozen read-only, so instances are safe
    to share across threads and reuse between solves.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ValueError(
                f"B must have {A.shape[0]} rows to match A, got shape {B.shape}"
            )
        if B.shape[1] < 1:
            raise ValueError("B must have at least one column")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(B)):
            raise ValueError("system matrices must be finite")
        object.__setattr__(self, "A", _as_readonly(A))
        object.__setattr__(self, "B", _as_readonly(B))

    @property
    def n(self) -> int:
        """State dimension."""
        return self.A.shape[0]

    @property
    def m(self) -> int:
        """Input dimension."""
        return self.B.shape[1]


@dataclass(frozen=True)
class ControllabilityReport:
    """Result of the Kalman rank test.

    ``certifies_uniqueness`` repeats ``is_controllable``: controllability of
    the pair guarantees that the optimal control problem built on it is
    normal (the pointwise minimizer of the Hamiltonian is unique almost
    everywhere), which is the property the bang-bang certificate in
    :mod:`fuelcvx.analysis` relies on.
    """

    rank: int
    n: int
    is_controllable: bool
    certifies_uniqueness: bool
    singular_values: np.ndarray
    tolerance: float

    def __post_init__(self):
        object.__setattr__(
            self, "singular_values", _as_readonly(self.singular_values)
        )


@dataclass(frozen=True)
class DiscretizedSystem:
    """Exact ZOH step matrices for a fixed step ``dt`` over ``n_steps`` steps.

    x[k+1] = A_d x[k] + B_d u[k], with u held constant on each interval.
    """

    A_d: np.ndarray
    B_d: np.ndarray
    dt: float
    n_steps: int
    source: LtiSystem

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        object.__setattr__(self, "A_d", _as_readonly(self.A_d))
        object.__setattr__(self, "B_d", _as_readonly(self.B_d))

    @property
    def horizon(self) -> float:
        """Total horizon dt * n_steps."""
        return self.dt * self.n_steps


@dataclass(frozen=True)
class AugmentedSystem:
    """Fuel-augmented pair.

    The extended state is (x, x_c) where x_c integrates the epigraph input
    nu, and the extended input is (u, nu):

        A_e = [[A, 0], [0, 0]],   B_e = [[B, 0], [0, 1]].

    ``controllability`` records the Kalman test on (A_e, B_e). When the base
    pair is controllable the extended pair is too, because nu drives the
    cost state directly; the recorded report makes that checkable rather
    than assumed.
    """

    A_e: np.ndarray
    B_e: np.ndarray
    base: LtiSystem
    controllability: ControllabilityReport = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "A_e", _as_readonly(self.A_e))
        object.__setattr__(self, "B_e", _as_readonly(self.B_e))


def matrix_exponential(M: np.ndarray) -> np.ndarray:
    """Exponential of a square matrix.

    Thin validation wrapper over :func:`scipy.linalg.expm`, which implements
    scaling-and-squaring with a degree-13 Pade approximant. Kept as the
    single entry point so every discretization in the package goes through
    one code path.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix must be finite")
    return scipy.linalg.expm(M)


def controllability_rank(sys: LtiSystem) -> ControllabilityReport:
    """Rank of the Kalman matrix [B, AB, ..., A^(n-1) B] via SVD.

    Singular values below ``max(n, n + m) * eps * sigma_max`` are treated as
    zero. The pair is controllable iff the rank equals n; see
    :class:`ControllabilityReport` for what that certifies downstream.
    """
    n, m = sys.n, sys.m
    blocks = []
    block = sys.B.copy()
    for _ in range(n):
        blocks.append(block)
        block = sys.A @ block
    kalman = np.hstack(blocks)
    sv = scipy.linalg.svdvals(kalman)
    sigma_max = sv[0] if sv.size else 0.0
    tol = max(n, n + m) * np.finfo(float).eps * sigma_max
    rank = int(np.count_nonzero(sv > tol))
    controllable = rank == n
    return ControllabilityReport(
        rank=rank,
        n=n,
        is_controllable=controllable,
        certifies_uniqueness=controllable,
        singular_values=sv,
        tolerance=tol,
    )


def augment(sys: LtiSystem) -> AugmentedSystem:
    """Append the fuel state and the epigraph input channel.

    Returns the extended pair together with its controllability report.
    Controllability of the base pair carries over to the extended one (the
    new input column reaches the new state directly); the report is computed
    rather than inferred so the claim is verified on the actual matrices.
    """
    n, m = sys.n, sys.m
    A_e = np.zeros((n + 1, n + 1))
    A_e[:n, :n] = sys.A
    B_e = np.zeros((n + 1, m + 1))
    B_e[:n, :m] = sys.B
    B_e[n, m] = 1.0
    report = controllability_rank(LtiSystem(A_e, B_e))
    return AugmentedSystem(A_e=A_e, B_e=B_e, base=sys, controllability=report)


def zoh_discretize(sys: LtiSystem, dt: float, n_steps: int = 1) -> DiscretizedSystem:
    """Exact zero-order-hold discretization with step ``dt``.

    Uses the block matrix trick: exponentiate [[A, B], [0, 0]] * dt and read

        A_d = exp(A dt),   B_d = (integral_0^dt exp(A s) ds) B

    off the top blocks. Exact for piecewise-constant inputs regardless of
    how stiff A is, since no series truncation beyond the Pade kernel is
    involved.
    """
    if not (dt > 0.0 and np.isfinite(dt)):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    n, m = sys.n, sys.m
    block = np.zeros((n + m, n + m))
    block[:n, :n] = sys.A * dt
    block[:n, n:] = sys.B * dt
    exp_block = matrix_exponential(block)
    return DiscretizedSystem(
        A_d=exp_block[:n, :n],
        B_d=exp_block[:n, n:],
        dt=float(dt),
        n_steps=int(n_steps),
        source=sys,
    )
