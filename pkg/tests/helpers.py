"""Shared test-side oracles and instance generators.

Everything here is independent of the package's runtime paths on purpose:
the extreme-point test runs small feasibility LPs through scipy, and the
instance generators build problems whose answers are known by
construction, so the tests compare the library against something it did
not compute itself.
"""

import numpy as np
import scipy.optimize

from fuelcvx import DiscreteInputSet, LtiSystem
from fuelcvx.analysis import propagate
from fuelcvx.linsys import controllability_rank, zoh_discretize


def lp_extreme_mask(points):
    """Boolean mask: point i is an extreme point of conv(points).

    A point of a finite set is extreme iff it cannot be written as a
    convex combination of the other points, which is a small feasibility
    LP per point.
    """
    pts = np.asarray(points, dtype=float)
    k, m = pts.shape
    mask = np.zeros(k, dtype=bool)
    for i in range(k):
        others = np.delete(pts, i, axis=0)
        # lam >= 0, sum lam = 1, others' lam = pts[i]
        A_eq = np.vstack([others.T, np.ones(k - 1)])
        b_eq = np.concatenate([pts[i], [1.0]])
        res = scipy.optimize.linprog(
            np.zeros(k - 1),
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=[(0.0, None)] * (k - 1),
            method="highs",
        )
        mask[i] = not res.success
    return mask


def random_valid_w(rng, m, u_max, k):
    """k extra points strictly inside the 1-norm ball of radius u_max."""
    W = np.empty((k, m))
    for i in range(k):
        p = rng.normal(size=m)
        W[i] = p * (u_max * rng.uniform(0.1, 0.95) / np.sum(np.abs(p)))
    return W


def random_controllable_instance(seed, N=160, t_f=5.0, n_gen=64):
    """Random controllable pair, random valid set, reachable target.

    The target is the endpoint of a sparse vertex sequence propagated on a
    coarser n_gen-step grid, so it is feasible for the N-step transcription
    but in general position with respect to that grid.
    """
    for trial in range(50):
        rng = np.random.Generator(np.random.Philox(key=[seed, trial]))
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, 3))
        sys = LtiSystem(rng.normal(size=(n, n)) / np.sqrt(n), rng.normal(size=(n, m)))
        if not controllability_rank(sys).is_controllable:
            continue
        u_max = float(rng.uniform(0.5, 2.0))
        k_w = int(rng.integers(0, 4))
        W = random_valid_w(rng, m, u_max, k_w) if k_w else ()
        s = DiscreteInputSet(m=m, u_max=u_max, W=W)
        x0 = rng.uniform(-1.0, 1.0, n)
        verts = np.vstack([np.eye(m), -np.eye(m)]) * u_max
        idx = rng.integers(0, 2 * m, size=n_gen)
        on = rng.random(n_gen) < 0.3
        u_gen = np.zeros((n_gen, m))
        u_gen[on] = verts[idx[on]]
        sysd_gen = zoh_discretize(sys, t_f / n_gen, n_gen)
        xf = propagate(sysd_gen, x0, u_gen)[-1]
        return sys, s, x0, xf, t_f, N
    raise RuntimeError(f"no controllable draw for seed {seed}")


def boundary_pair(sys, input_set, seed, N, t_f=4.0):
    """Reachable boundary pair for a single-input plant.

    Picks a direction eta and a burn budget of M steps, then saturates the
    M steps whose unit burns make the most progress along eta, coasting
    the rest. The endpoint is an extreme point of the M-burn reachable
    set, so the generating sequence is the unique fuel optimum for the
    pair: the relaxed LP and the enumeration must both land on it. Draws
    are rejected until the selected steps are strictly separated in gain,
    which is what makes the uniqueness argument hold numerically.
    """
    n = sys.n
    sysd = zoh_discretize(sys, t_f / N, N)
    verts = np.array([[input_set.u_max], [-input_set.u_max]])
    for trial in range(100):
        rng = np.random.Generator(np.random.Philox(key=[seed, 1000 * N + trial]))
        x0 = rng.uniform(-1.0, 1.0, n)
        eta = rng.normal(size=n)
        M = int(rng.integers(2, 6 if N >= 16 else 7))
        A_pow = np.eye(n)
        gains = np.zeros(N)
        best_u = np.zeros((N, 1))
        for k in range(N - 1, -1, -1):
            row = eta @ A_pow @ sysd.B_d
            j = int(np.argmax(verts @ row))
            gains[k] = float(verts[j] @ row)
            best_u[k] = verts[j]
            A_pow = A_pow @ sysd.A_d
        order = np.argsort(gains)[::-1]
        chosen, rest = order[:M], order[M:]
        margin = gains[chosen].min() - (gains[rest].max() if rest.size else -np.inf)
        if gains[chosen].min() <= 1e-3 or margin <= 1e-3:
            continue
        u = np.zeros((N, 1))
        u[chosen] = best_u[chosen]
        xf = propagate(sysd, x0, u)[-1]
        return sysd, x0, xf, u
    raise RuntimeError(f"no separated boundary pair for seed {seed}")
