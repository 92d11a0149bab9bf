"""Post-solve analysis: propagation, discreteness metrics, certificates.

The relaxed LP produces controls in the cross-polytope; the theory says an
optimal relaxed control actually lands on the admissible finite set at
almost every step. This module quantifies how true that is for a concrete
numerical solution: per-step distances to the admissible set, the fraction
of steps sitting on extreme points, a nearest-point quantization with its
terminal-state penalty, and the hands-off (activation time) measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inputset import (
    DiscreteInputSet,
    augmented_extreme_points,
    distance_to_set,
    project_to_set,
)
from .linsys import DiscretizedSystem

__all__ = [
    "Solution",
    "DiscretenessReport",
    "BangBangCertificate",
    "tol_vertex",
    "propagate",
    "discreteness_report",
    "hands_off_measure",
    "verify_bang_bang",
]


def tol_vertex(u_max: float) -> float:
    """Tolerance for deciding a step sits on an extreme point."""
    return 1e-4 * max(1.0, u_max)


@dataclass(frozen=True)
class Solution:
    """One solved instance: control sequence, epigraph values, trajectory.

    ``u`` is (N, m), ``nu`` is (N,), ``x`` is (N + 1, n) with x[0] the
    initial state. ``split_overlaps`` lists (step, channel) pairs where the
    LP's positive and negative input halves were simultaneously active
    beyond tolerance; ``slack_gap_steps`` lists steps where nu exceeds
    ||u||_1 by more than tolerance. Both should be empty at a clean
    optimum.
    """

    u: np.ndarray
    nu: np.ndarray
    x: np.ndarray
    dt: float
    cost: float
    status: object
    solve_time: float
    sysd: DiscretizedSystem
    xf: np.ndarray
    split_overlaps: tuple = ()
    slack_gap_steps: tuple = ()

    def __post_init__(self):
        for name in ("u", "nu", "x", "xf"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.u.shape[0]

    @property
    def terminal_residual(self) -> float:
        """Euclidean distance between the final node state and the target."""
        return float(np.linalg.norm(self.x[-1] - self.xf))


@dataclass(frozen=True)
class DiscretenessReport:
    """How close a relaxed solution is to the admissible finite set.

    ``d`` holds per-step Euclidean distances to the nearest admissible
    point, ``d_bar`` their mean over the N steps. ``fraction_on_vertices``
    tests the pair (u_k, nu_k) against the extreme points of the augmented
    hull, which distinguishes a genuine coast (u = 0, nu = 0) from an
    epigraph artifact (u = 0 with nu > 0). ``quantized`` is the
    nearest-point rounding of u and ``quantized_terminal_error`` the
    terminal miss after re-propagating it through the dynamics.
    """

    d: np.ndarray
    d_bar: float
    fraction_on_vertices: float
    quantized: np.ndarray
    quantized_terminal_error: float
    tol_vertex: float


@dataclass(frozen=True)
class BangBangCertificate:
    """Outcome of the discreteness check on a solved instance.

    ``ok`` requires both the vertex fraction to reach the threshold and
    every per-step epigraph gap nu_k - ||u_k||_1 to stay within
    ``tol_comp``. ``exceptions`` lists the steps off the vertex set; a
    handful of switching steps is expected since the grid rarely aligns
    with the optimal switching times.
    """

    ok: bool
    fraction_on_vertices: float
    fraction_threshold: float
    exceptions: tuple
    max_slack_gap: float
    tol_comp: float
    tol_vertex: float


def propagate(sysd: DiscretizedSystem, x0, u) -> np.ndarray:
    """Roll the discrete dynamics forward; returns the (len(u)+1, n) path."""
    n = sysd.A_d.shape[0]
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},)")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.ndim != 2 or u.shape[1] != sysd.B_d.shape[1]:
        raise ValueError(
            f"u must have shape (K, {sysd.B_d.shape[1]}), got {u.shape}"
        )
    K = u.shape[0]
    x = np.empty((K + 1, n))
    x[0] = x0
    for k in range(K):
        x[k + 1] = sysd.A_d @ x[k] + sysd.B_d @ u[k]
    return x


def _vertex_mask(s: DiscreteInputSet, u: np.ndarray, nu: np.ndarray, tol: float):
    """Boolean mask of steps whose (u_k, nu_k) lies on an augmented vertex."""
    ext = augmented_extreme_points(s).vertices
    pairs = np.hstack([u, nu.reshape(-1, 1)])
    dists = np.linalg.norm(pairs[:, None, :] - ext[None, :, :], axis=2)
    return np.min(dists, axis=1) <= tol


def discreteness_report(
    s: DiscreteInputSet, sol: Solution, tol: float | None = None
) -> DiscretenessReport:
    """Distances, vertex fraction, and quantization for a solution."""
    if sol.u.shape[1] != s.m:
        raise ValueError(
            f"solution input dimension {sol.u.shape[1]} does not match set "
            f"dimension {s.m}"
        )
    if tol is None:
        tol = tol_vertex(s.u_max)
    N = sol.N
    d = np.array([distance_to_set(s, sol.u[k]) for k in range(N)])
    on_vertex = _vertex_mask(s, sol.u, sol.nu, tol)
    quantized = np.vstack([project_to_set(s, sol.u[k])[0] for k in range(N)])
    xq = propagate(sol.sysd, sol.x[0], quantized)
    q_err = float(np.linalg.norm(xq[-1] - sol.xf))
    return DiscretenessReport(
        d=d,
        d_bar=float(np.mean(d)),
        fraction_on_vertices=float(np.mean(on_vertex)),
        quantized=quantized,
        quantized_terminal_error=q_err,
        tol_vertex=tol,
    )


def hands_off_measure(sol: Solution, zero_tol: float) -> float:
    """Total activation time dt * sum_k (number of channels above zero_tol).

    This is the discrete L0 cost: the measure of time each input channel
    is switched on. Smaller is sparser; the fuel-optimal solution provably
    also minimizes this among feasible controls.
    """
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    return float(sol.dt * np.count_nonzero(np.abs(sol.u) > zero_tol))


def verify_bang_bang(
    s: DiscreteInputSet,
    sol: Solution,
    fraction_threshold: float = 0.95,
    tol: float | None = None,
    tol_comp: float | None = None,
) -> BangBangCertificate:
    """Certify that a solved instance is (numerically) bang-bang.

    Checks two things: the fraction of steps on augmented extreme points
    reaches ``fraction_threshold``, and no step's epigraph value exceeds
    its input 1-norm by more than ``tol_comp``. The second condition
    catches solutions where the relaxation was not tight, which the first
    could miss if nu collapsed anyway.
    """
    if tol is None:
        tol = tol_vertex(s.u_max)
    if tol_comp is None:
        tol_comp = 1e-6 * max(1.0, s.u_max)
    on_vertex = _vertex_mask(s, sol.u, sol.nu, tol)
    fraction = float(np.mean(on_vertex))
    gaps = sol.nu - np.sum(np.abs(sol.u), axis=1)
    max_gap = float(np.max(gaps)) if gaps.size else 0.0
    ok = fraction >= fraction_threshold and max_gap <= tol_comp
    return BangBangCertificate(
        ok=ok,
        fraction_on_vertices=fraction,
        fraction_threshold=fraction_threshold,
        exceptions=tuple(int(k) for k in np.flatnonzero(~on_vertex)),
        max_slack_gap=max_gap,
        tol_comp=tol_comp,
        tol_vertex=tol,
    )
