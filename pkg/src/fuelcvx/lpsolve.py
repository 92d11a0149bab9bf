"""Sparse primal-dual interior-point solver for the transcribed LPs.

Solves problems of the form

    minimize    c' z
    subject to  E z = e          (p equality rows)
                G z <= g         (q inequality rows)
                z_i >= lb_i      (only where lb_i is finite; else z_i free)

with a Mehrotra predictor-corrector method. Free variables (the state
trajectory) are handled natively instead of being split, inequality slacks
and bound multipliers are kept strictly positive, and each iteration solves
one reduced KKT system

    [ -(D_x + G' D_w G)   E' ] [dz]   [r_1]
    [        E            0  ] [dy] = [r_2]

factored once per iteration by SuperLU and reused for the predictor and
corrector right-hand sides. Every run is deterministic: there is no
randomized initialization, ordering, or perturbation anywhere in the path,
so repeated solves of the same program return bit-identical results.

Infeasible problems are classified rather than guessed at: when the main
iteration breaks down, an elastic feasibility problem (minimize the total
constraint violation) is solved, and its optimal duals furnish an exact
Farkas certificate (y, s, lam) with E'y - G's + lam = 0, s >= 0,
lam >= 0 on bounded coordinates, and e'y - g's > 0. Unbounded problems are
certified by a feasible ray along which the objective decreases.

The solver accepts any object with attributes c, E, e, G, g, lb shaped as
above (see :class:`fuelcvx.transcription.StandardFormProgram`).

References
----------
.. [1] S. Mehrotra, "On the implementation of a primal-dual interior point
       method", SIAM Journal on Optimization 2(4), 1992.
.. [2] S. J. Wright, "Primal-Dual Interior-Point Methods", SIAM, 1997.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "LpStatus",
    "SolverOptions",
    "LpResult",
    "KktReport",
    "solve_lp",
    "kkt_report",
    "dump_program",
]


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    """Termination tolerances and limits.

    ``tol_feas`` bounds the relative primal and dual residuals,
    ``tol_gap`` the relative duality gap. ``time_limit`` (seconds, wall
    clock) stops the iteration like an iteration cap would.
    """

    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200
    time_limit: float | None = None

    def __post_init__(self):
        if not (self.tol_feas > 0 and self.tol_gap > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class Certificate:
    """Proof object attached to an infeasible or unbounded result.

    For ``kind == "primal_infeasible"``: (y, s, lam) satisfy
    E'y - G's + lam = 0 with s >= 0 and lam >= 0 supported on the bounded
    coordinates, while value = e'y - g's + lb'lam > 0; any feasible point
    would force that expression nonpositive, so none exists. For
    ``kind == "unbounded"``: ``ray`` satisfies
    E ray = 0, G ray <= 0, ray >= 0 on bounded coordinates, and
    value = c'ray < 0.
    """

    kind: str
    y: np.ndarray | None = None
    s: np.ndarray | None = None
    lam: np.ndarray | None = None
    ray: np.ndarray | None = None
    value: float = 0.0


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    z: np.ndarray
    y: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    objective: float
    iterations: int
    solve_time: float
    primal_residual: float
    dual_residual: float
    gap: float
    certificate: Certificate | None = None
    trace: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class _Program:
    """Internal plain container for derived LPs (phase 1, ray check)."""

    c: np.ndarray
    E: sp.csr_matrix
    e: np.ndarray
    G: sp.csr_matrix
    g: np.ndarray
    lb: np.ndarray


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha in [0, 1] with v + alpha dv >= 0, for v > 0."""
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _assemble_kkt(H, ws) -> sp.csc_matrix:
    """Saddle matrix [[-H, E'], [E, 0]]; collapses to -H with no equalities."""
    if ws.p:
        return sp.bmat([[-H, ws.ET], [ws.E, None]], format="csc")
    return (-H).tocsc()


def _kkt_solve(factor, K, rhs):
    """Solve K sol = rhs with one step of iterative refinement."""
    sol = factor.solve(rhs)
    if not np.all(np.isfinite(sol)):
        return sol
    resid = rhs - K @ sol
    nr = np.max(np.abs(resid)) if resid.size else 0.0
    if nr > 1e-13 * (1.0 + np.max(np.abs(rhs))):
        sol = sol + factor.solve(resid)
    return sol


class _Workspace:
    """Shapes, index sets, and shifted data for one program."""

    def __init__(self, prog):
        self.c = np.asarray(prog.c, dtype=float).reshape(-1)
        self.nv = self.c.shape[0]
        self.E = sp.csr_matrix(prog.E, copy=False)
        self.G = sp.csr_matrix(prog.G, copy=False)
        self.e = np.asarray(prog.e, dtype=float).reshape(-1)
        self.g = np.asarray(prog.g, dtype=float).reshape(-1)
        self.lb = np.asarray(prog.lb, dtype=float).reshape(-1)
        self.p = self.E.shape[0]
        self.q = self.G.shape[0]
        if self.E.shape[1] != self.nv or self.G.shape[1] != self.nv:
            raise ValueError("constraint matrices do not match len(c)")
        if self.e.shape[0] != self.p or self.g.shape[0] != self.q:
            raise ValueError("right-hand sides do not match row counts")
        if self.lb.shape[0] != self.nv:
            raise ValueError("lb does not match len(c)")

        self.bounded = np.isfinite(self.lb)
        self.iB = np.flatnonzero(self.bounded)
        self.nB = self.iB.size
        self.shift = np.where(self.bounded, self.lb, 0.0)
        self.e_s = self.e - self.E @ self.shift
        self.g_s = self.g - self.G @ self.shift
        self.obj_off = float(self.c @ self.shift)
        self.ET = self.E.T.tocsr()
        self.GT = self.G.T.tocsr()
        # Row index of every stored entry of G, for cheap row scaling.
        self.G_entry_rows = np.repeat(
            np.arange(self.q), np.diff(self.G.indptr)
        )
    def scaled_gram(self, dw: np.ndarray) -> sp.csr_matrix:
        """G' diag(dw) G without forming the diagonal matrix."""
        Gs = sp.csr_matrix(
            (self.G.data * dw[self.G_entry_rows], self.G.indices, self.G.indptr),
            shape=self.G.shape,
        )
        return self.GT @ Gs


def _initial_point(ws: _Workspace):
    """Least-squares primal/dual starting point with positivity shifts."""
    nv, p, q = ws.nv, ws.p, ws.q
    ones_gram = ws.scaled_gram(np.ones(q)) if q else sp.csr_matrix((nv, nv))
    H0 = (ones_gram + sp.identity(nv, format="csr")).tocsr()
    K0 = _assemble_kkt(H0, ws)
    factor = spla.splu(K0)

    rhs_p = np.concatenate([-(ws.GT @ ws.g_s) if q else np.zeros(nv), ws.e_s])
    sol_p = factor.solve(rhs_p)
    x = sol_p[:nv]
    w = ws.g_s - ws.G @ x if q else np.zeros(0)

    rhs_d = np.concatenate([-ws.c, np.zeros(p)])
    sol_d = factor.solve(rhs_d)
    v = sol_d[:nv]
    y = -sol_d[nv:]
    s = -(ws.G @ v) if q else np.zeros(0)
    lam = np.zeros(nv)
    lam[ws.iB] = v[ws.iB]

    prim = np.concatenate([x[ws.iB], w])
    dual = np.concatenate([lam[ws.iB], s])
    if prim.size:
        dp = max(-1.5 * prim.min(), 0.0)
        dd = max(-1.5 * dual.min(), 0.0)
        ph = prim + dp
        dh = dual + dd
        dot = float(ph @ dh)
        sum_dh = float(dh.sum())
        sum_ph = float(ph.sum())
        if dot <= 0.0 or sum_dh <= 0.0 or sum_ph <= 0.0:
            prim = np.maximum(prim, 1.0)
            dual = np.maximum(dual, 1.0)
        else:
            prim = prim + (dp + 0.5 * dot / sum_dh)
            dual = dual + (dd + 0.5 * dot / sum_ph)
        x[ws.iB] = prim[: ws.nB]
        w = prim[ws.nB :]
        lam[ws.iB] = dual[: ws.nB]
        s = dual[ws.nB :]
    return x, w, y, s, lam


def _dual_polish(ws: _Workspace, x, w, y, s, lam, gap_budget, act_mask=None):
    """Refit (y, s) against the basic columns and rebuild lam.

    Late in the iteration the primal is converged and the basis is
    readable off the iterate, but the multipliers carry roundoff amplified
    by divisions with near-zero slacks, so the dual residual can stall
    just above tolerance. At an optimum the reduced cost
    c - E'y + G's vanishes on every free or basic column and equals
    lam >= 0 on the columns held at their bound, while s vanishes on rows
    with slack. This solves, by damped least squares centered at the
    current point, the stationarity equations restricted to the free and
    basic columns with s supported on the tight rows, then sets lam to the
    positive part of the resulting reduced costs.

    Two classification errors are repaired across rounds. A column judged
    at its bound whose refit multiplier comes out below its coordinate is
    moved back into the equation set. A near-degenerate column judged
    basic whose equation the fit cannot satisfy shows up as a positive
    least-squares residual; such columns are dropped for good, which is
    legal (the positive reduced cost becomes its multiplier) and, under
    the complementarity budget guard, costs nothing measurable in the
    duality gap. The honest residual of the returned triple is left to
    the caller to judge. Returns (y, s, lam) or None when the refit is
    unavailable.
    """
    if ws.q:
        act_r = np.flatnonzero((s > w) if act_mask is None else act_mask)
    else:
        act_r = np.zeros(0, dtype=int)
    y_cur, s_act = y, s[act_r]
    lam_cur = lam
    dropped = np.zeros(ws.nv, dtype=bool)
    spent = 0.0
    best = None
    best_resid = np.inf
    # Columns whose coordinate is tiny cannot be classified by comparing
    # against their multiplier; both are noise and the comparison is a coin
    # flip. Each such column carries a small genuine reduced cost, and
    # fitting its equation as if that cost were zero bends the constraint
    # multipliers coherently, which the duality gap picks up against the
    # large state coordinates. They are excluded from the fit outright;
    # their complementarity products are on the order of the barrier
    # parameter and cost nothing measurable. The threshold scales with the
    # whole iterate because the free coordinates are where the bent
    # multipliers do their damage.
    tau = 1e-6 * (1.0 + (float(np.max(np.abs(x))) if x.size else 0.0))
    for rnd in range(8):
        nonbasic = dropped.copy()
        nonbasic[ws.iB] |= (lam_cur[ws.iB] > x[ws.iB]) | (x[ws.iB] < tau)
        cols = np.flatnonzero(~nonbasic)
        blocks = []
        if ws.p:
            blocks.append(ws.ET[cols])
        if act_r.size:
            blocks.append(-ws.G[act_r].T.tocsr()[cols])
        if not blocks:
            return None
        M = sp.hstack(blocks, format="csr")
        u0 = np.concatenate([y_cur, s_act])
        resid0 = ws.c[cols] - M @ u0
        # The duality gap charges each equation's residual in proportion to
        # its coordinate, so the fit minimizes the coordinate-weighted
        # residual: heavy columns come out nearly exact and the slack is
        # parked on columns that cannot hurt the gap. Damping keeps the
        # refit well posed under active-set degeneracy and anchors it at
        # the current multipliers instead of a min-norm point, which also
        # pins the dual objective near the iterate's own value instead of
        # letting it drift along the fit's null directions.
        wts = 1.0 + np.abs(x[cols])
        Mw = sp.diags(wts) @ M
        aug = sp.bmat(
            [[sp.identity(cols.size), Mw], [Mw.T, -1e-6 * sp.identity(M.shape[1])]],
            format="csc",
        )
        try:
            factor = spla.splu(aug)
        except RuntimeError:
            return best
        rhs = np.concatenate([wts * resid0, np.zeros(M.shape[1])])
        sol = factor.solve(rhs)
        for _ in range(2):
            sol = sol + factor.solve(rhs - aug @ sol)
        if not np.all(np.isfinite(sol)):
            return best
        du = sol[cols.size :]
        r_ls = resid0 - M @ du
        y_new = y_cur + du[: ws.p] if ws.p else np.zeros(0)
        s_new = np.zeros(ws.q)
        if act_r.size:
            s_new[act_r] = np.maximum(s_act + du[ws.p :], 0.0)
        reduced = (
            ws.c
            - (ws.ET @ y_new if ws.p else 0.0)
            + (ws.GT @ s_new if ws.q else 0.0)
        )
        # lam lives only on the columns held at their bound; absorbing fit
        # noise into multipliers on basic columns would poison the duality
        # gap through their complementarity products.
        lam_new = np.zeros(ws.nv)
        nb = np.flatnonzero(nonbasic & ws.bounded)
        lam_new[nb] = np.maximum(reduced[nb], 0.0)
        r_full = reduced - lam_new
        r_max = float(np.max(np.abs(r_full))) if r_full.size else 0.0
        if r_max < best_resid:
            best = (y_new, s_new, lam_new)
            best_resid = r_max
        y_cur, s_act, lam_cur = y_new, s_new[act_r], lam_new
        rmax_ls = float(np.max(np.abs(r_ls))) if r_ls.size else 0.0
        if rmax_ls < 1e-12:
            break
        # Greedy drop under a cumulative complementarity budget: half the
        # gap budget is reserved for the products the drops introduce, the
        # rest for genuine slack terms. Worst offenders go first.
        cand = np.flatnonzero((r_ls > 0.25 * rmax_ls) & ws.bounded[cols])
        added = 0
        for k in cand[np.argsort(-r_ls[cand])]:
            contrib = max(float(x[cols[k]] * r_ls[k]), 0.0)
            if spent + contrib <= 0.5 * gap_budget:
                dropped[cols[k]] = True
                spent += contrib
                added += 1
        # The refreshed multipliers reclassify columns on the next pass, so
        # one extra round is worthwhile even when nothing was dropped.
        if added == 0 and rnd > 0:
            break
    return best


def _degenerate_finish(ws: _Workspace, x, w, y, s, lam, gap_budget):
    """Snap a jammed near-optimal primal onto the active face.

    On heavily degenerate instances the iteration can freeze with both
    residuals inside tolerance while the complementarity products sit a
    factor above the gap budget: thousands of bounded coordinates hover a
    few orders above their bound with multipliers to match, every product
    pinned near the barrier parameter, and the step lengths collapse. No
    refit of the multipliers can remove that mass; the coordinates
    themselves have to reach the bound. This zeroes every bounded
    coordinate below the classification threshold, restores the equality
    constraints with a minimum-norm correction on the remaining columns,
    then refits the multipliers against the snapped point, where the
    classification is unambiguous. The caller re-checks the full
    optimality conditions on the returned candidate. Returns
    (x, w, y, s, lam) or None.
    """
    if ws.p == 0 or ws.nB == 0:
        return None
    tau = 1e-6 * (1.0 + (float(np.max(np.abs(x))) if x.size else 0.0))
    zero = np.zeros(ws.nv, dtype=bool)
    zero[ws.iB] = x[ws.iB] < tau
    if not np.any(zero):
        return None
    keep = np.flatnonzero(~zero)
    x_f = np.where(zero, 0.0, x)
    t = ws.e_s - ws.E @ x_f
    Ek = ws.ET[keep].T.tocsc()
    # Rows already at (or near) their bound must not absorb the correction;
    # they are pinned at their current slack. The pin is soft because at a
    # degenerate vertex these rows need not be independent of the equality
    # block. The same rows carry the multiplier support in the refit below:
    # on jammed instances the weakly active rows, which the strict
    # classification by s > w misses, hold small but load-bearing
    # multipliers.
    if ws.q:
        near = (s > w) | (w < 1e-2 * (1.0 + float(np.max(np.abs(ws.g_s)))))
        pin = np.flatnonzero(near)
    else:
        near = None
        pin = np.zeros(0, dtype=int)
    if pin.size:
        Ga = ws.G[pin].tocsc()[:, keep]
        aug = sp.bmat(
            [
                [sp.identity(keep.size), Ek.T, Ga.T],
                [Ek, None, None],
                [Ga, None, -1e-10 * sp.identity(pin.size)],
            ],
            format="csc",
        )
        t_a = ws.g_s[pin] - w[pin] - ws.G[pin] @ x_f
        rhs = np.concatenate([np.zeros(keep.size), t, t_a])
    else:
        aug = sp.bmat(
            [[sp.identity(keep.size), Ek.T], [Ek, None]], format="csc"
        )
        rhs = np.concatenate([np.zeros(keep.size), t])
    try:
        factor = spla.splu(aug)
    except RuntimeError:
        return None
    sol = factor.solve(rhs)
    sol = sol + factor.solve(rhs - aug @ sol)
    if not np.all(np.isfinite(sol)):
        return None
    x_f[keep] += sol[: keep.size]
    if np.any(x_f[ws.iB] < 0.0):
        return None
    if ws.q:
        w_f = ws.g_s - ws.G @ x_f
        if float(np.min(w_f)) < -1e-9 * (1.0 + float(np.max(np.abs(ws.g_s)))):
            return None
        w_f = np.maximum(w_f, 0.0)
    else:
        w_f = np.zeros(0)
    pol = _dual_polish(ws, x_f, w_f, y, s, lam, gap_budget, act_mask=near)
    if pol is not None:
        y_f, s_f, lam_f = pol
    else:
        reduced = (
            ws.c
            - (ws.ET @ y if ws.p else 0.0)
            + (ws.GT @ s if ws.q else 0.0)
        )
        lam_f = np.zeros(ws.nv)
        lam_f[zero] = np.maximum(reduced[zero], 0.0)
        y_f, s_f = y, s
    return x_f, w_f, y_f, s_f, lam_f


def _ipm(ws: _Workspace, options: SolverOptions):
    """Core predictor-corrector loop in shifted coordinates.

    Returns (status, x, w, y, s, lam, iterations, trace) where status is
    OPTIMAL or a raw breakdown label ("limit", "stall", "nan") left for the
    caller to classify.
    """
    t0 = time.perf_counter()
    nv, p, q = ws.nv, ws.p, ws.q
    iB, nB = ws.iB, ws.nB
    n_comp = nB + q
    scale_e = 1.0 + (np.max(np.abs(ws.e_s)) if p else 0.0)
    scale_g = 1.0 + (np.max(np.abs(ws.g_s)) if q else 0.0)
    scale_c = 1.0 + np.max(np.abs(ws.c))

    x, w, y, s, lam = _initial_point(ws)
    trace = []
    best = np.inf
    best_iter = 0
    best_point = (x.copy(), w.copy(), y.copy(), s.copy(), lam.copy())
    status = "limit"
    it = 0
    frozen = 0
    mu_prev = np.inf

    for it in range(1, options.max_iter + 1):
        r_p = ws.e_s - ws.E @ x if p else np.zeros(0)
        r_w = ws.g_s - ws.G @ x - w if q else np.zeros(0)
        r_d = ws.c - (ws.ET @ y if p else 0.0) + (ws.GT @ s if q else 0.0) - lam
        mu = (float(x[iB] @ lam[iB]) + float(w @ s)) / n_comp
        frozen = frozen + 1 if mu > 0.9 * mu_prev else 0
        mu_prev = mu

        pobj = float(ws.c @ x) + ws.obj_off
        dobj = (
            (float(ws.e_s @ y) if p else 0.0)
            - (float(ws.g_s @ s) if q else 0.0)
            + ws.obj_off
        )
        pinf = max(
            (np.max(np.abs(r_p)) / scale_e) if p else 0.0,
            (np.max(np.abs(r_w)) / scale_g) if q else 0.0,
        )
        dinf = np.max(np.abs(r_d)) / scale_c
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        trace.append((it, pobj, dobj, mu, pinf, dinf))

        if not np.isfinite(pobj) or not np.isfinite(mu):
            status = "nan"
            break
        if pinf <= options.tol_feas and dinf <= options.tol_feas and gap <= options.tol_gap:
            status = "optimal"
            break
        if (
            pinf <= options.tol_feas
            and mu * n_comp <= options.tol_gap * (1.0 + abs(pobj))
            and (dinf > options.tol_feas or it - best_iter >= 5)
        ):
            polished = _dual_polish(
                ws, x, w, y, s, lam, options.tol_gap * (1.0 + abs(pobj))
            )
            if polished is not None:
                y_p, s_p, lam_p = polished
                r_d_p = (
                    ws.c
                    - (ws.ET @ y_p if p else 0.0)
                    + (ws.GT @ s_p if q else 0.0)
                    - lam_p
                )
                dinf_p = np.max(np.abs(r_d_p)) / scale_c
                dobj_p = (
                    (float(ws.e_s @ y_p) if p else 0.0)
                    - (float(ws.g_s @ s_p) if q else 0.0)
                    + ws.obj_off
                )
                gap_p = abs(pobj - dobj_p) / (1.0 + abs(pobj))
                if dinf_p <= options.tol_feas and gap_p <= options.tol_gap:
                    y, s, lam = y_p, s_p, lam_p
                    status = "optimal"
                    break
        if frozen >= 3 and pinf <= options.tol_feas and dinf <= options.tol_feas:
            # Step lengths have collapsed with both residuals converged:
            # the leftover gap is complementarity mass that only a primal
            # move can shed.
            frozen = -7
            fin = _degenerate_finish(
                ws, x, w, y, s, lam, options.tol_gap * (1.0 + abs(pobj))
            )
            if fin is not None:
                x_f, w_f, y_f, s_f, lam_f = fin
                r_p_f = ws.e_s - ws.E @ x_f if p else np.zeros(0)
                r_w_f = ws.g_s - ws.G @ x_f - w_f if q else np.zeros(0)
                r_d_f = (
                    ws.c
                    - (ws.ET @ y_f if p else 0.0)
                    + (ws.GT @ s_f if q else 0.0)
                    - lam_f
                )
                pobj_f = float(ws.c @ x_f) + ws.obj_off
                dobj_f = (
                    (float(ws.e_s @ y_f) if p else 0.0)
                    - (float(ws.g_s @ s_f) if q else 0.0)
                    + ws.obj_off
                )
                pinf_f = max(
                    (np.max(np.abs(r_p_f)) / scale_e) if p else 0.0,
                    (np.max(np.abs(r_w_f)) / scale_g) if q else 0.0,
                )
                dinf_f = np.max(np.abs(r_d_f)) / scale_c
                gap_f = abs(pobj_f - dobj_f) / (1.0 + abs(pobj_f))
                if (
                    pinf_f <= options.tol_feas
                    and dinf_f <= options.tol_feas
                    and gap_f <= options.tol_gap
                ):
                    x, w, y, s, lam = x_f, w_f, y_f, s_f, lam_f
                    status = "optimal"
                    break
        merit = pinf + dinf + gap
        if merit < best:
            best = merit
            best_iter = it
            best_point = (x.copy(), w.copy(), y.copy(), s.copy(), lam.copy())
        elif it - best_iter > 30 or merit > 1e8 * best:
            status = "stall"
            break
        if options.time_limit is not None and time.perf_counter() - t0 > options.time_limit:
            status = "limit"
            break

        d_x = np.zeros(nv)
        d_x[iB] = lam[iB] / x[iB]
        if q:
            dw_diag = s / w
            H = ws.scaled_gram(dw_diag)
            H = H + sp.diags(d_x)
        else:
            H = sp.diags(d_x).tocsr()
        K = _assemble_kkt(H, ws)
        try:
            factor = spla.splu(K)
        except RuntimeError:
            delta = 1e-10 * (1.0 + float(np.max(np.abs(H.diagonal()))))
            reg = sp.diags(
                np.concatenate([np.full(nv, -delta), np.zeros(p)])
            ).tocsc()
            try:
                factor = spla.splu(K + reg)
            except RuntimeError:
                status = "nan"
                break

        def newton(rd_v, rp_v, rw_v, rc_x, rc_w):
            rhs1 = rd_v.copy()
            if q:
                rhs1 += ws.GT @ ((rc_w - s * rw_v) / w)
            tmp = np.zeros(nv)
            tmp[iB] = rc_x / x[iB]
            rhs1 -= tmp
            rhs = np.concatenate([rhs1, rp_v])
            sol = _kkt_solve(factor, K, rhs)
            dx = sol[:nv]
            dy = sol[nv:]
            if q:
                dw = rw_v - ws.G @ dx
                ds = (rc_w - s * dw) / w
            else:
                dw = np.zeros(0)
                ds = np.zeros(0)
            dlam = np.zeros(nv)
            dlam[iB] = (rc_x - lam[iB] * dx[iB]) / x[iB]
            return dx, dw, dy, ds, dlam

        xmax = 1.0 + float(np.max(np.abs(x)))

        def insane(v):
            return not np.all(np.isfinite(v)) or float(np.max(np.abs(v))) > 1e14 * xmax

        # Predictor: pure Newton toward mu = 0.
        rc_x_aff = -(x[iB] * lam[iB])
        rc_w_aff = -(w * s)
        dx_a, dw_a, dy_a, ds_a, dl_a = newton(r_d, r_p, r_w, rc_x_aff, rc_w_aff)
        if insane(dx_a):
            # The scaling matrices have gone rank deficient faster than the
            # factorization can cope; the "solution" is astronomically
            # large garbage that would either freeze the step length or
            # wreck feasibility if a rounding fluke let it through. Retry
            # once with a regularized factor (refinement still targets the
            # true matrix). Only the negative-definite block is shifted:
            # touching the equality rows would let the retried direction
            # drift off the dynamics constraints, and a later gap check
            # would pay for that through the y-weighted residual.
            delta = 1e-10 * (1.0 + float(np.max(np.abs(H.diagonal()))))
            reg = sp.diags(
                np.concatenate([np.full(nv, -delta), np.zeros(p)])
            ).tocsc()
            try:
                factor = spla.splu(K + reg)
            except RuntimeError:
                status = "stall"
                break
            dx_a, dw_a, dy_a, ds_a, dl_a = newton(r_d, r_p, r_w, rc_x_aff, rc_w_aff)
            if insane(dx_a):
                status = "stall"
                break
        a_p = min(_max_step(x[iB], dx_a[iB]), _max_step(w, dw_a))
        a_d = min(_max_step(lam[iB], dl_a[iB]), _max_step(s, ds_a))
        mu_aff = (
            float((x[iB] + a_p * dx_a[iB]) @ (lam[iB] + a_d * dl_a[iB]))
            + float((w + a_p * dw_a) @ (s + a_d * ds_a))
        ) / n_comp
        sigma = min(max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 0.0), 1.0)

        # Floor the target so complementarity cannot collapse orders of
        # magnitude below what the gap tolerance asks for.  Letting the
        # pairwise products race to machine zero while infeasibility lags
        # destroys the conditioning of the scaling matrices and the late
        # iterations stop making progress on the residuals.  The floor only
        # applies once the primal is feasible; holding products up while a
        # feasibility step is still needed pits the centering term against
        # that step and the iteration grinds to a halt.
        mu_t = sigma * mu
        if pinf <= options.tol_feas:
            mu_floor = 0.01 * options.tol_gap * (1.0 + abs(pobj)) / n_comp
            mu_t = max(mu_t, mu_floor)

        # Corrector: recenter and compensate the predictor's curvature.
        rc_x = mu_t - x[iB] * lam[iB] - dx_a[iB] * dl_a[iB]
        rc_w = mu_t - w * s - dw_a * ds_a
        dx, dw, dy, ds, dlam = newton(r_d, r_p, r_w, rc_x, rc_w)
        if insane(dx):
            dx, dw, dy, ds, dlam = dx_a, dw_a, dy_a, ds_a, dl_a

        a_p = min(_max_step(x[iB], dx[iB]), _max_step(w, dw))
        a_d = min(_max_step(lam[iB], dlam[iB]), _max_step(s, ds))

        # Centrality correctors: pairwise products far outside a band
        # around the target shorten the steps badly on near-degenerate
        # faces. Each pass re-targets the stragglers at a slightly
        # enlarged trial step, reusing the factorization, and is kept only
        # if it lengthens the combined step.
        zero_d, zero_p, zero_w = np.zeros(nv), np.zeros(p), np.zeros(q)
        for _ in range(2):
            at_p = min(a_p + 0.1, 1.0)
            at_d = min(a_d + 0.1, 1.0)
            pb = (x[iB] + at_p * dx[iB]) * (lam[iB] + at_d * dlam[iB])
            tb = np.clip(pb, 0.1 * mu_t, 10.0 * mu_t) - pb
            if q:
                pr = (w + at_p * dw) * (s + at_d * ds)
                tr = np.clip(pr, 0.1 * mu_t, 10.0 * mu_t) - pr
            else:
                tr = np.zeros(0)
            cx, cw, cy, cs, cl = newton(zero_d, zero_p, zero_w, tb, tr)
            if insane(cx):
                break
            nx, nw = dx + cx, dw + cw
            ny, ns_, nl = dy + cy, ds + cs, dlam + cl
            na_p = min(_max_step(x[iB], nx[iB]), _max_step(w, nw))
            na_d = min(_max_step(lam[iB], nl[iB]), _max_step(s, ns_))
            if na_p + na_d < a_p + a_d + 0.01:
                break
            dx, dw, dy, ds, dlam = nx, nw, ny, ns_, nl
            a_p, a_d = na_p, na_d

        eta = 0.9995
        a_p = eta * a_p
        a_d = eta * a_d
        x = x + a_p * dx
        w = w + a_p * dw
        # A step out of an ill-conditioned factorization can carry large
        # errors in its dual components while looking ordinary in norm, and
        # one such step replaces a feasible dual with noise. Once the dual
        # residual is inside the bar, keep it there: shrink the dual step
        # until the trial point stays feasible. Giving up on the dual move
        # entirely still leaves a valid pure-primal step.
        if dinf <= options.tol_feas:
            for a_try in (a_d, 0.3 * a_d, 0.1 * a_d, 0.0):
                y_t = y + a_try * dy
                s_t = s + a_try * ds
                lam_t = lam + a_try * dlam
                r_d_t = (
                    ws.c
                    - (ws.ET @ y_t if p else 0.0)
                    + (ws.GT @ s_t if q else 0.0)
                    - lam_t
                )
                if np.max(np.abs(r_d_t)) / scale_c <= options.tol_feas:
                    break
            y, s, lam = y_t, s_t, lam_t
        else:
            y = y + a_d * dy
            s = s + a_d * ds
            lam = lam + a_d * dlam
    else:
        status = "limit"

    if status != "optimal":
        # Hand back the lowest-merit iterate seen, not whatever noise the
        # final step produced.
        x, w, y, s, lam = best_point
    return status, x, w, y, s, lam, it, trace


def _solve_no_cone(ws: _Workspace, options: SolverOptions, t0: float):
    """Equality-constrained path: no inequalities and no finite bounds.

    Least squares settles all three questions: feasibility of E z = e,
    membership of c in range(E') (else the problem is unbounded along the
    projection of -c onto the nullspace), and the optimizer itself.
    """
    nv, p = ws.nv, ws.p
    if p == 0:
        if np.any(ws.c != 0.0):
            ray = -np.sign(ws.c)
            cert = Certificate(kind="unbounded", ray=ray, value=float(ws.c @ ray))
            return LpResult(
                status=LpStatus.DUAL_INFEASIBLE,
                z=np.zeros(nv),
                y=np.zeros(0),
                s=np.zeros(0),
                lam=np.zeros(nv),
                objective=-np.inf,
                iterations=0,
                solve_time=time.perf_counter() - t0,
                primal_residual=0.0,
                dual_residual=0.0,
                gap=np.inf,
                certificate=cert,
            )
        return LpResult(
            status=LpStatus.OPTIMAL,
            z=np.zeros(nv),
            y=np.zeros(0),
            s=np.zeros(0),
            lam=np.zeros(nv),
            objective=0.0,
            iterations=0,
            solve_time=time.perf_counter() - t0,
            primal_residual=0.0,
            dual_residual=0.0,
            gap=0.0,
        )

    E = ws.E.toarray() if sp.issparse(ws.E) else np.asarray(ws.E)
    x, _, _, _ = np.linalg.lstsq(E, ws.e, rcond=None)
    resid = ws.e - E @ x
    nres = float(np.max(np.abs(resid))) if resid.size else 0.0
    scale_e = 1.0 + float(np.max(np.abs(ws.e)))
    if nres > options.tol_feas * scale_e:
        yc = resid / np.linalg.norm(resid)
        cert = Certificate(
            kind="primal_infeasible",
            y=yc,
            s=np.zeros(0),
            lam=np.zeros(nv),
            value=float(ws.e @ yc),
        )
        return LpResult(
            status=LpStatus.PRIMAL_INFEASIBLE,
            z=x,
            y=yc,
            s=np.zeros(0),
            lam=np.zeros(nv),
            objective=np.nan,
            iterations=0,
            solve_time=time.perf_counter() - t0,
            primal_residual=nres / scale_e,
            dual_residual=0.0,
            gap=np.inf,
            certificate=cert,
        )
    y, _, _, _ = np.linalg.lstsq(E.T, ws.c, rcond=None)
    r_d = ws.c - E.T @ y
    ndd = float(np.max(np.abs(r_d))) if r_d.size else 0.0
    if ndd > options.tol_feas * (1.0 + float(np.max(np.abs(ws.c)))):
        ray = -r_d
        cert = Certificate(kind="unbounded", ray=ray, value=float(ws.c @ ray))
        return LpResult(
            status=LpStatus.DUAL_INFEASIBLE,
            z=x,
            y=y,
            s=np.zeros(0),
            lam=np.zeros(nv),
            objective=-np.inf,
            iterations=0,
            solve_time=time.perf_counter() - t0,
            primal_residual=nres / scale_e,
            dual_residual=0.0,
            gap=np.inf,
            certificate=cert,
        )
    return LpResult(
        status=LpStatus.OPTIMAL,
        z=x,
        y=y,
        s=np.zeros(0),
        lam=np.zeros(nv),
        objective=float(ws.c @ x),
        iterations=0,
        solve_time=time.perf_counter() - t0,
        primal_residual=nres / scale_e,
        dual_residual=ndd / (1.0 + float(np.max(np.abs(ws.c)))),
        gap=0.0,
    )


def _phase1_program(ws: _Workspace) -> _Program:
    """Elastic feasibility LP: minimize total violation of E z = e, G z <= g.

    Variables are (z, tp, tm, tw) with tp, tm the split equality elastics
    and tw the inequality elastics; the minimum is zero exactly when the
    original constraints are feasible.
    """
    nv, p, q = ws.nv, ws.p, ws.q
    Ip = sp.identity(p, format="csr")
    blocks = [ws.E, Ip, -Ip]
    if q:
        blocks.append(sp.csr_matrix((p, q)))
    E1 = sp.hstack(blocks, format="csr")
    if q:
        G1 = sp.hstack(
            [ws.G, sp.csr_matrix((q, 2 * p)), -sp.identity(q, format="csr")],
            format="csr",
        )
        g1 = ws.g_s
    else:
        G1 = sp.csr_matrix((0, nv + 2 * p))
        g1 = np.zeros(0)
    c1 = np.concatenate([np.zeros(nv), np.ones(2 * p + q)])
    lb1 = np.concatenate(
        [np.where(ws.bounded, 0.0, -np.inf), np.zeros(2 * p + q)]
    )
    return _Program(c=c1, E=E1, e=ws.e_s.copy(), G=G1, g=g1, lb=lb1)


def _ray_program(ws: _Workspace) -> _Program:
    """Recession-direction LP: minimize c'd over the feasible cone, boxed.

    Feasible directions satisfy E d = 0, G d <= 0, d >= 0 on bounded
    coordinates; the box |d| <= 1 makes the check finite. A strictly
    negative optimum certifies an unbounded objective.
    """
    nv, q = ws.nv, ws.q
    I = sp.identity(nv, format="csr")
    G_parts = [ws.G] if q else []
    G_parts += [I, -I]
    Gr = sp.vstack(G_parts, format="csr")
    gr = np.concatenate([np.zeros(q), np.ones(nv), np.ones(nv)])
    lbr = np.where(ws.bounded, 0.0, -np.inf)
    return _Program(
        c=ws.c.copy(),
        E=ws.E,
        e=np.zeros(ws.p),
        G=Gr,
        g=gr,
        lb=lbr,
    )


def _classify_breakdown(ws, options, raw_status, partial, t0):
    """Decide between infeasible, unbounded, and a plain failure.

    ``partial`` is the best iterate from the failed main solve; it is
    returned (shifted back) so callers can inspect how far the solver got.
    """
    x, w, y, s, lam, it, trace = partial
    phase1 = solve_lp(_phase1_program(ws), options, _derived=True)
    scale = 1.0 + (np.max(np.abs(ws.e_s)) if ws.p else 0.0) + (
        np.max(np.abs(ws.g_s)) if ws.q else 0.0
    )
    z_back = x + ws.shift
    if phase1.status == LpStatus.OPTIMAL and phase1.objective > 1e-7 * scale:
        y1 = phase1.y
        s1 = phase1.s[: ws.q] if ws.q else np.zeros(0)
        lam1 = np.zeros(ws.nv)
        lam1[ws.iB] = phase1.lam[ws.iB]
        value = (
            (float(ws.e_s @ y1) if ws.p else 0.0)
            - (float(ws.g_s @ s1) if ws.q else 0.0)
        )
        cert = Certificate(
            kind="primal_infeasible", y=y1, s=s1, lam=lam1, value=value
        )
        return LpResult(
            status=LpStatus.PRIMAL_INFEASIBLE,
            z=z_back,
            y=y1,
            s=s1,
            lam=lam1,
            objective=np.nan,
            iterations=it,
            solve_time=time.perf_counter() - t0,
            primal_residual=np.nan,
            dual_residual=np.nan,
            gap=np.inf,
            certificate=cert,
            trace=tuple(trace),
        )
    if phase1.status == LpStatus.OPTIMAL:
        ray_res = solve_lp(_ray_program(ws), options, _derived=True)
        if (
            ray_res.status == LpStatus.OPTIMAL
            and ray_res.objective < -1e-7 * (1.0 + np.max(np.abs(ws.c)))
        ):
            ray = ray_res.z
            cert = Certificate(kind="unbounded", ray=ray, value=float(ws.c @ ray))
            return LpResult(
                status=LpStatus.DUAL_INFEASIBLE,
                z=z_back,
                y=y,
                s=s,
                lam=lam,
                objective=-np.inf,
                iterations=it,
                solve_time=time.perf_counter() - t0,
                primal_residual=np.nan,
                dual_residual=np.nan,
                gap=np.inf,
                certificate=cert,
                trace=tuple(trace),
            )
    status = (
        LpStatus.ITERATION_LIMIT if raw_status == "limit" else LpStatus.NUMERICAL_FAILURE
    )
    return LpResult(
        status=status,
        z=z_back,
        y=y,
        s=s,
        lam=lam,
        objective=float(ws.c @ x) + ws.obj_off,
        iterations=it,
        solve_time=time.perf_counter() - t0,
        primal_residual=np.nan,
        dual_residual=np.nan,
        gap=np.inf,
        trace=tuple(trace),
    )


def solve_lp(program, options: SolverOptions | None = None, _derived: bool = False) -> LpResult:
    """Solve the LP and return a status, a point, duals, and diagnostics.

    The returned multipliers follow the convention

        c - E'y + G's - lam = 0,   s >= 0,   lam >= 0 on bounded coords,

    so for an OPTIMAL result the reported residuals (and
    :func:`kkt_report`) are small by construction. An Optimal status
    guarantees: equality residual within tol_feas * (1 + max|e|),
    inequality violation within tol_feas * (1 + max|g|), bounds satisfied
    exactly, and relative duality gap within tol_gap.
    """
    if options is None:
        options = SolverOptions()
    t0 = time.perf_counter()
    ws = _Workspace(program)

    if ws.nB + ws.q == 0:
        return _solve_no_cone(ws, options, t0)

    raw, x, w, y, s, lam, it, trace = _ipm(ws, options)
    if raw == "optimal":
        r_p = ws.e_s - ws.E @ x if ws.p else np.zeros(0)
        r_w = ws.g_s - ws.G @ x - w if ws.q else np.zeros(0)
        r_d = ws.c - (ws.ET @ y if ws.p else 0.0) + (ws.GT @ s if ws.q else 0.0) - lam
        pobj = float(ws.c @ x) + ws.obj_off
        dobj = (
            (float(ws.e_s @ y) if ws.p else 0.0)
            - (float(ws.g_s @ s) if ws.q else 0.0)
            + ws.obj_off
        )
        return LpResult(
            status=LpStatus.OPTIMAL,
            z=x + ws.shift,
            y=y,
            s=s,
            lam=lam,
            objective=pobj,
            iterations=it,
            solve_time=time.perf_counter() - t0,
            primal_residual=max(
                (np.max(np.abs(r_p)) if ws.p else 0.0),
                (np.max(np.abs(r_w)) if ws.q else 0.0),
            ),
            dual_residual=float(np.max(np.abs(r_d))),
            gap=abs(pobj - dobj) / (1.0 + abs(pobj)),
            trace=tuple(trace),
        )
    if _derived:
        # A derived (phase-1 or ray) solve that cannot finish is reported
        # plainly; the caller treats it as inconclusive.
        return LpResult(
            status=LpStatus.NUMERICAL_FAILURE
            if raw in ("nan", "stall")
            else LpStatus.ITERATION_LIMIT,
            z=x + ws.shift,
            y=y,
            s=s,
            lam=lam,
            objective=float(ws.c @ x) + ws.obj_off,
            iterations=it,
            solve_time=time.perf_counter() - t0,
            primal_residual=np.nan,
            dual_residual=np.nan,
            gap=np.inf,
            trace=tuple(trace),
        )
    return _classify_breakdown(ws, options, raw, (x, w, y, s, lam, it, trace), t0)


@dataclass(frozen=True)
class KktReport:
    """Recomputed optimality measures for a (program, result) pair.

    All residuals are absolute infinity norms; the ``*_rel`` fields divide
    by the natural scale (1 + max|e|, 1 + max|g|, 1 + max|c|). The dual
    convention matches :func:`solve_lp`: dual feasibility is
    ||c - E'y + G's - lam||_inf with s >= 0, complementarity pairs s with
    the inequality slack g - Gz and lam with z - lb, and the dual objective
    is e'y - g's + sum over bounded i of lb_i lam_i.
    """

    eq_residual: float
    eq_residual_rel: float
    ineq_violation: float
    ineq_violation_rel: float
    bound_violation: float
    dual_residual: float
    dual_residual_rel: float
    dual_sign_violation: float
    comp_ineq: float
    comp_bound: float
    primal_objective: float
    dual_objective: float
    gap_rel: float


def kkt_report(program, result: LpResult) -> KktReport:
    """Recompute all KKT residuals from scratch; see :class:`KktReport`."""
    c = np.asarray(program.c, dtype=float).reshape(-1)
    E = sp.csr_matrix(program.E)
    G = sp.csr_matrix(program.G)
    e = np.asarray(program.e, dtype=float).reshape(-1)
    g = np.asarray(program.g, dtype=float).reshape(-1)
    lb = np.asarray(program.lb, dtype=float).reshape(-1)
    z, y, s, lam = result.z, result.y, result.s, result.lam
    p, q = E.shape[0], G.shape[0]
    bounded = np.isfinite(lb)

    r_e = (e - E @ z) if p else np.zeros(0)
    slack = (g - G @ z) if q else np.zeros(0)
    r_d = c - (E.T @ y if p else 0.0) + (G.T @ s if q else 0.0) - lam

    eq_res = float(np.max(np.abs(r_e))) if p else 0.0
    ineq_vio = float(np.max(-slack)) if q else 0.0
    ineq_vio = max(ineq_vio, 0.0)
    bound_vio = float(np.max((lb - z)[bounded])) if bounded.any() else 0.0
    bound_vio = max(bound_vio, 0.0)
    dual_res = float(np.max(np.abs(r_d)))
    sign_vio = 0.0
    if q:
        sign_vio = max(sign_vio, float(np.max(-s)))
    if bounded.any():
        sign_vio = max(sign_vio, float(np.max(-lam[bounded])))
    if (~bounded).any():
        sign_vio = max(sign_vio, float(np.max(np.abs(lam[~bounded]))))
    comp_ineq = float(np.max(np.abs(s * slack))) if q else 0.0
    comp_bound = (
        float(np.max(np.abs(lam[bounded] * (z[bounded] - lb[bounded]))))
        if bounded.any()
        else 0.0
    )
    pobj = float(c @ z)
    dobj = (
        (float(e @ y) if p else 0.0)
        - (float(g @ s) if q else 0.0)
        + (float(lb[bounded] @ lam[bounded]) if bounded.any() else 0.0)
    )
    scale_e = 1.0 + (float(np.max(np.abs(e))) if p else 0.0)
    scale_g = 1.0 + (float(np.max(np.abs(g))) if q else 0.0)
    scale_c = 1.0 + float(np.max(np.abs(c)))
    return KktReport(
        eq_residual=eq_res,
        eq_residual_rel=eq_res / scale_e,
        ineq_violation=ineq_vio,
        ineq_violation_rel=ineq_vio / scale_g,
        bound_violation=bound_vio,
        dual_residual=dual_res,
        dual_residual_rel=dual_res / scale_c,
        dual_sign_violation=max(sign_vio, 0.0),
        comp_ineq=comp_ineq,
        comp_bound=comp_bound,
        primal_objective=pobj,
        dual_objective=dobj,
        gap_rel=abs(pobj - dobj) / (1.0 + abs(pobj)),
    )


def dump_program(program, path) -> None:
    """Write the program to a text file for external inspection.

    Format: a header line with variable and row counts, then one section
    per component. Vectors list only nonzero (or finite, for lb) entries as
    ``index value`` pairs; matrices list ``row col value`` triplets. All
    values use repr-round-trip precision.
    """
    c = np.asarray(program.c, dtype=float).reshape(-1)
    E = sp.coo_matrix(program.E)
    G = sp.coo_matrix(program.G)
    e = np.asarray(program.e, dtype=float).reshape(-1)
    g = np.asarray(program.g, dtype=float).reshape(-1)
    lb = np.asarray(program.lb, dtype=float).reshape(-1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"lp n_vars={c.size} n_eq={E.shape[0]} n_ineq={G.shape[0]} "
            f"nnz_eq={E.nnz} nnz_ineq={G.nnz}\n"
        )
        fh.write("c\n")
        for i in np.flatnonzero(c):
            fh.write(f"{i} {float(c[i])!r}\n")
        fh.write("E\n")
        for r, cc, v in zip(E.row, E.col, E.data):
            fh.write(f"{r} {cc} {float(v)!r}\n")
        fh.write("e\n")
        for i in np.flatnonzero(e):
            fh.write(f"{i} {float(e[i])!r}\n")
        fh.write("G\n")
        for r, cc, v in zip(G.row, G.col, G.data):
            fh.write(f"{r} {cc} {float(v)!r}\n")
        fh.write("g\n")
        for i in np.flatnonzero(g):
            fh.write(f"{i} {float(g[i])!r}\n")
        fh.write("lb\n")
        for i in np.flatnonzero(np.isfinite(lb)):
            fh.write(f"{i} {float(lb[i])!r}\n")
