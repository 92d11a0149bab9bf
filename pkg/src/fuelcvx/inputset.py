"""Discrete admissible input sets and their convex hull geometry.

The admissible set is finite:

    U = {0} union {+-u_max e_i : i = 1..m} union W

where W is an optional collection of extra points inside the closed 1-norm
ball of radius u_max. Its convex hull is then the cross-polytope
{u : ||u||_1 <= u_max}, whose extreme points are exactly the 2m signed axis
vertices. That fact is what makes the convex relaxation in
:mod:`fuelcvx.transcription` exact, so this module both materializes the
geometry and validates it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "DiscreteInputSet",
    "CrossPolytope",
    "AugmentedExtremeSet",
    "InputSetReport",
    "tol_geom",
    "validate",
    "hull_extreme_points",
    "augmented_extreme_points",
    "distance_to_set",
    "project_to_set",
]


def tol_geom(u_max: float) -> float:
    """Geometric tolerance used for duplicate and membership tests."""
    return 1e-9 * max(1.0, u_max)


def _axis_vertices(m: int, u_max: float) -> np.ndarray:
    """Signed axis vertices in the fixed order +e_1, -e_1, ..., +e_m, -e_m."""
    v = np.zeros((2 * m, m))
    for i in range(m):
        v[2 * i, i] = u_max
        v[2 * i + 1, i] = -u_max
    return v


@dataclass(frozen=True)
class DiscreteInputSet:
    """Finite admissible input set {0} union {+-u_max e_i} union W.

    ``points`` materializes the full set in a deterministic order: the
    origin first, then the signed axis vertices (+e_1, -e_1, +e_2, ...),
    then the W points in the order given. Projection tie-breaking and the
    enumeration oracle both rely on that order, so it is part of the
    contract, not an implementation detail.

    The constructor enforces structure only (shapes, finiteness, no
    duplicate points within ``tol_geom`` in the 2-norm). Whether W actually
    lies inside the 1-norm ball is a geometric question answered by
    :func:`validate`.
    """

    m: int
    u_max: float
    W: np.ndarray = ()

    def __post_init__(self):
        m = int(self.m)
        u_max = float(self.u_max)
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        if not (u_max > 0.0 and np.isfinite(u_max)):
            raise ValueError(f"u_max must be positive and finite, got {u_max}")
        W = np.asarray(self.W, dtype=float)
        if W.size == 0:
            W = np.zeros((0, m))
        if W.ndim == 1:
            W = W.reshape(1, -1)
        if W.ndim != 2 or W.shape[1] != m:
            raise ValueError(
                f"W must be a (k, {m}) array of extra points, got shape {W.shape}"
            )
        if not np.all(np.isfinite(W)):
            raise ValueError("W must be finite")

        pts = np.vstack([np.zeros((1, m)), _axis_vertices(m, u_max), W])
        tol = tol_geom(u_max)
        for i in range(1, pts.shape[0]):
            d = np.linalg.norm(pts[:i] - pts[i], axis=1)
            if np.any(d <= tol):
                j = int(np.argmin(d))
                raise ValueError(
                    f"duplicate input point: entry {i} coincides with entry {j} "
                    f"within {tol:g}"
                )

        pts.setflags(write=False)
        W = W.copy()
        W.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "u_max", u_max)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "_points", pts)

    @property
    def points(self) -> np.ndarray:
        """All points of the set, shape (1 + 2m + |W|, m), fixed order."""
        return self._points

    @property
    def n_points(self) -> int:
        return self._points.shape[0]


@dataclass(frozen=True)
class InputSetReport:
    """Outcome of geometric validation of a :class:`DiscreteInputSet`."""

    valid: bool
    violations: tuple
    message: str


def validate(s: DiscreteInputSet) -> InputSetReport:
    """Check that W lies in the closed 1-norm ball of radius u_max.

    Points with ||w||_1 > u_max + tol_geom are violations: they would add
    extreme points to the hull beyond the axis vertices and break the
    exactness argument. Returns a report rather than raising so callers can
    surface all offending points at once.
    """
    tol = tol_geom(s.u_max)
    bad = []
    for idx, w in enumerate(s.W):
        n1 = float(np.sum(np.abs(w)))
        if n1 > s.u_max + tol:
            bad.append((idx, n1))
    if bad:
        detail = ", ".join(f"W[{i}] with 1-norm {n1:.6g}" for i, n1 in bad)
        msg = (
            f"{len(bad)} extra point(s) outside the 1-norm ball of radius "
            f"{s.u_max:g}: {detail}"
        )
    else:
        msg = "input set valid"
    return InputSetReport(valid=not bad, violations=tuple(bad), message=msg)


def _require_valid(s: DiscreteInputSet) -> None:
    rep = validate(s)
    if not rep.valid:
        raise ValidationError(rep.message, kind="input_set")


@dataclass(frozen=True)
class CrossPolytope:
    """The 1-norm ball {u : ||u||_1 <= u_max}, hull of the admissible set."""

    m: int
    u_max: float

    @property
    def vertices(self) -> np.ndarray:
        return _axis_vertices(self.m, self.u_max)

    def contains(self, u, tol: float = 0.0) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return float(np.sum(np.abs(u))) <= self.u_max + tol


@dataclass(frozen=True)
class AugmentedExtremeSet:
    """Extreme points of the hull of {(u, ||u||_1) : u admissible}.

    In the extended input space (u, nu) the admissible pairs are the origin
    (coast) and the saturated axis burns (+-u_max e_i, u_max): 2m + 1 points.
    A solution step is "discrete" exactly when its (u_k, nu_k) pair lands on
    one of these.
    """

    vertices: np.ndarray
    u_bar: float

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)


def hull_extreme_points(s: DiscreteInputSet) -> np.ndarray:
    """Extreme points of conv(U): the 2m signed axis vertices.

    Requires a valid set. W points never appear here: each lies in the
    closed ball and is therefore a convex combination of the vertices.
    """
    _require_valid(s)
    return _axis_vertices(s.m, s.u_max)


def augmented_extreme_points(s: DiscreteInputSet) -> AugmentedExtremeSet:
    """Extreme points in (u, nu) space; see :class:`AugmentedExtremeSet`."""
    _require_valid(s)
    m, u_max = s.m, s.u_max
    v = np.zeros((2 * m + 1, m + 1))
    v[1:, :m] = _axis_vertices(m, u_max)
    v[1:, m] = u_max
    return AugmentedExtremeSet(vertices=v, u_bar=u_max)


def distance_to_set(s: DiscreteInputSet, u) -> float:
    """Euclidean distance from u to the nearest admissible point."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (s.m,):
        raise ValueError(f"u must have shape ({s.m},), got {u.shape}")
    return float(np.min(np.linalg.norm(s.points - u, axis=1)))


def project_to_set(s: DiscreteInputSet, u) -> tuple[np.ndarray, int]:
    """Nearest admissible point and its index in ``points``.

    Exact distance ties go to the lowest index, i.e. the origin wins over
    any vertex, and vertices win over W points, in the materialized order.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (s.m,):
        raise ValueError(f"u must have shape ({s.m},), got {u.shape}")
    d = np.linalg.norm(s.points - u, axis=1)
    idx = int(np.argmin(d))
    return s.points[idx].copy(), idx
