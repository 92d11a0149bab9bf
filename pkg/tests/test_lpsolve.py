"""Interior-point solver: statuses, certificates, duality, diagnostics."""

import dataclasses

import numpy as np
import pytest
import scipy.optimize
import scipy.sparse as sp
from numpy.testing import assert_allclose

from fuelcvx import (
    LpStatus,
    SolverOptions,
    kkt_report,
    solve_lp,
    transcribe,
)
from fuelcvx.lpsolve import _Program, dump_program


def _program(c, E=None, e=None, G=None, g=None, lb=None):
    """Assemble a small dense program without transcription boilerplate."""
    c = np.asarray(c, dtype=float)
    n = c.size
    def mat(M):
        if M is None:
            return sp.csr_matrix((0, n))
        return sp.csr_matrix(np.atleast_2d(np.asarray(M, dtype=float)))
    def vec(v):
        if v is None:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(v, dtype=float))
    if lb is None:
        lb = np.full(n, -np.inf)
    return _Program(c=c, E=mat(E), e=vec(e), G=mat(G), g=vec(g),
                    lb=np.asarray(lb, dtype=float))


def test_free_variable_single_inequality():
    # min x s.t. -x <= -1
    res = solve_lp(_program([1.0], G=[[-1.0]], g=[-1.0]))
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(1.0, abs=1e-6)
    assert res.z[0] == pytest.approx(1.0, abs=1e-6)


def test_conflicting_equalities_give_farkas_certificate():
    # x = 1 and x = 2 cannot both hold.
    prog = _program([0.0], E=[[1.0], [1.0]], e=[1.0, 2.0])
    res = solve_lp(prog)
    assert res.status is LpStatus.PRIMAL_INFEASIBLE
    cert = res.certificate
    assert cert is not None and cert.kind == "primal_infeasible"
    assert cert.value > 0
    # The multiplier combination must annihilate the columns.
    resid = prog.E.T @ cert.y - prog.G.T @ cert.s + cert.lam
    assert np.max(np.abs(resid)) <= 1e-6 * max(1.0, np.max(np.abs(cert.y)))
    assert np.all(cert.s >= -1e-9)
    assert np.all(cert.lam >= -1e-9)


def test_unbounded_below_gives_ray():
    # min -x with x >= 0 runs away along +x.
    prog = _program([-1.0], lb=[0.0])
    res = solve_lp(prog)
    assert res.status is LpStatus.DUAL_INFEASIBLE
    cert = res.certificate
    assert cert is not None and cert.kind == "unbounded"
    ray = cert.ray
    assert float(prog.c @ ray) < 0
    assert np.all(ray[np.isfinite(prog.lb)] >= -1e-9)


def test_empty_cone_problem_solves_trivially():
    res = solve_lp(_program([0.0, 0.0]))
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == 0.0
    assert_allclose(res.z, 0.0)


def test_equality_only_free_variables():
    # min x1 + x2 s.t. x1 + x2 = 3: objective is fixed on the feasible set.
    res = solve_lp(_program([1.0, 1.0], E=[[1.0, 1.0]], e=[3.0]))
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(3.0, abs=1e-7)


def test_equality_only_unbounded_objective():
    # min x1 with x1 + x2 = 3: c has a component off the row space.
    res = solve_lp(_program([1.0, 0.0], E=[[1.0, 1.0]], e=[3.0]))
    assert res.status is LpStatus.DUAL_INFEASIBLE


def test_infeasible_transcription_detected(double_integrator, set_1d):
    # Far target, one second, unit inputs: nowhere near reachable.
    prob = transcribe(double_integrator, set_1d, [50.0, 0.0], [0.0, 0.0], 1.0, 8)
    res = solve_lp(prob.program)
    assert res.status is LpStatus.PRIMAL_INFEASIBLE
    assert res.certificate is not None
    assert res.certificate.value > 1.0


def test_double_integrator_known_optimum(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    res = solve_lp(prob.program)
    assert res.status is LpStatus.OPTIMAL
    # Cross-check against an independent simplex-based solve.
    ref = scipy.optimize.linprog(
        prob.program.c,
        A_eq=prob.program.E,
        b_eq=prob.program.e,
        A_ub=prob.program.G.toarray(),
        b_ub=prob.program.g,
        bounds=[
            (lo if np.isfinite(lo) else None, None) if np.isfinite(lo) else (None, None)
            for lo in prob.program.lb
        ],
        method="highs",
    )
    assert ref.status == 0
    assert res.objective == pytest.approx(ref.fun, abs=1e-7)
    assert res.objective == pytest.approx(4.0 / 15.0, abs=1e-7)


def test_solve_is_deterministic(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    a = solve_lp(prob.program)
    b = solve_lp(prob.program)
    assert a.iterations == b.iterations
    assert np.array_equal(a.z, b.z)


def test_objective_scaling_scales_solution_value(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    base = solve_lp(prob.program)
    scaled = dataclasses.replace(prob.program, c=prob.program.c * 10.0)
    res = solve_lp(scaled)
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(10.0 * base.objective, rel=1e-6)
    assert np.max(np.abs(res.z - base.z)) <= 1e-5


def test_kkt_report_clean_at_optimum(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    res = solve_lp(prob.program)
    rep = kkt_report(prob.program, res)
    tol = 10 * SolverOptions().tol_feas
    assert rep.eq_residual_rel <= tol
    assert rep.ineq_violation_rel <= tol
    assert rep.bound_violation <= tol
    assert rep.dual_residual_rel <= tol
    assert rep.dual_sign_violation <= tol
    assert rep.gap_rel <= 10 * SolverOptions().tol_gap
    assert rep.primal_objective == pytest.approx(rep.dual_objective, abs=1e-6)


def test_kkt_report_zero_problem_all_zero():
    prog = _program([0.0, 0.0])
    res = solve_lp(prog)
    rep = kkt_report(prog, res)
    assert rep.eq_residual == 0.0
    assert rep.ineq_violation == 0.0
    assert rep.dual_residual == 0.0
    assert rep.comp_ineq == 0.0
    assert rep.comp_bound == 0.0


def test_kkt_report_flags_suboptimal_point(double_integrator, set_1d):
    """A feasible but non-optimal point shows up in the complementarity row."""
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 8)
    res = solve_lp(prob.program)
    lay = prob.layout
    z = np.array(res.z)
    # Inflate one epigraph variable: still feasible, no longer complementary.
    z[lay.nu(3)] += 0.7
    fake = dataclasses.replace(res, z=z)
    rep = kkt_report(prob.program, fake)
    assert rep.ineq_violation <= 1e-9
    assert rep.comp_ineq > 0.1


def test_weak_duality_along_trace(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    res = solve_lp(prob.program)
    assert len(res.trace) == res.iterations
    tol = SolverOptions().tol_feas
    for it, pobj, dobj, mu, pinf, dinf in res.trace:
        if pinf <= tol and dinf <= tol:
            assert dobj <= pobj + 1e-6 * (1.0 + abs(pobj))
    its = [row[0] for row in res.trace]
    assert its == list(range(1, res.iterations + 1))


def test_options_validation():
    with pytest.raises(ValueError, match="positive"):
        SolverOptions(tol_feas=0.0)
    with pytest.raises(ValueError, match="positive"):
        SolverOptions(tol_gap=-1e-9)
    with pytest.raises(ValueError, match="max_iter"):
        SolverOptions(max_iter=0)


def test_iteration_limit_reported(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    res = solve_lp(prob.program, SolverOptions(max_iter=1))
    assert res.status is LpStatus.ITERATION_LIMIT
    assert res.iterations == 1


def test_time_limit_reported(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    res = solve_lp(prob.program, SolverOptions(time_limit=1e-9))
    assert res.status is LpStatus.ITERATION_LIMIT
    assert res.iterations <= 2


def test_tight_tolerances_tighten_the_answer(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    res = solve_lp(prob.program, SolverOptions(tol_feas=1e-11, tol_gap=1e-11))
    assert res.status is LpStatus.OPTIMAL
    assert abs(res.objective - 4.0 / 15.0) <= 1e-9


def test_dump_program_round_trips_counts(tmp_path, double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 2.0, 4)
    path = tmp_path / "prog.txt"
    dump_program(prob.program, path)
    text = path.read_text()
    lines = text.splitlines()
    head = lines[0].split()
    assert head[0] == "lp"
    fields = dict(kv.split("=") for kv in head[1:])
    assert int(fields["n_vars"]) == prob.program.n_vars
    assert int(fields["n_eq"]) == prob.program.E.shape[0]
    assert int(fields["n_ineq"]) == prob.program.G.shape[0]
    assert int(fields["nnz_eq"]) == prob.program.E.nnz
    assert int(fields["nnz_ineq"]) == prob.program.G.nnz
    # Each section header appears once and entries parse back to floats.
    for name in ("c", "E", "e", "G", "g", "lb"):
        assert sum(1 for ln in lines if ln == name) == 1
    e_at = lines.index("E")
    row, col, val = lines[e_at + 1].split()
    assert float(val) == prob.program.E.tocoo().data[0]
    assert int(row) == prob.program.E.tocoo().row[0]
    assert int(col) == prob.program.E.tocoo().col[0]


def test_rendezvous_instance_solves_cleanly():
    from fuelcvx.harness import RendezvousScenario, rendezvous_problem

    scen = RendezvousScenario()
    spec = rendezvous_problem(scen, [-50.0, -100.0, -50.0], [0.0, 0.0, 0.0], 200.0, 100)
    prob = transcribe(spec.system, spec.input_set, spec.x0, spec.xf, spec.t_f, spec.N)
    res = solve_lp(prob.program)
    assert res.status is LpStatus.OPTIMAL
    assert res.gap <= SolverOptions().tol_gap * 10
