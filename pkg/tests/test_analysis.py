"""Post-solve analysis: propagation, discreteness scoring, certification."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fuelcvx import (
    LtiSystem,
    Solution,
    discreteness_report,
    hands_off_measure,
    solve_lp,
    transcribe,
    verify_bang_bang,
)
from fuelcvx.analysis import propagate, tol_vertex
from fuelcvx.linsys import zoh_discretize
from fuelcvx.transcription import extract_solution


def _solution(u, nu=None, x=None, dt=1.0, cost=None, **kw):
    u = np.asarray(u, dtype=float)
    N, m = u.shape
    if nu is None:
        nu = np.sum(np.abs(u), axis=1)
    if x is None:
        x = np.zeros((N + 1, 2))
    if cost is None:
        cost = dt * float(np.sum(nu))
    n = np.asarray(x).shape[1]
    defaults = dict(
        status="optimal",
        cost=cost,
        solve_time=0.0,
        split_overlaps=(),
        slack_gap_steps=(),
        xf=np.zeros(n),
        dt=dt,
        sysd=zoh_discretize(LtiSystem(np.zeros((n, n)), np.zeros((n, m))), dt, N),
    )
    defaults.update(kw)
    return Solution(u=u, nu=np.asarray(nu, dtype=float), x=np.asarray(x, dtype=float),
                    **defaults)


def test_propagate_constant_input_zero_dynamics():
    sysd = zoh_discretize(LtiSystem(np.zeros((2, 2)), np.eye(2)), 0.5, 4)
    u = np.ones((4, 2))
    x = propagate(sysd, [0.0, 0.0], u)
    assert_allclose(x[-1], [2.0, 2.0], atol=1e-12)


def test_propagate_double_integrator_one_step(double_integrator):
    sysd = zoh_discretize(double_integrator, 1.0, 1)
    x = propagate(sysd, [0.0, 0.0], [[1.0]])
    assert_allclose(x[1], [0.5, 1.0], atol=1e-12)


def test_propagate_shape_checks(double_integrator):
    sysd = zoh_discretize(double_integrator, 1.0, 4)
    with pytest.raises(ValueError, match="shape"):
        propagate(sysd, [0.0, 0.0, 0.0], np.zeros((4, 1)))
    with pytest.raises(ValueError, match="shape"):
        propagate(sysd, [0.0, 0.0], np.zeros((4, 2)))


def test_discreteness_all_on_vertices(double_integrator, set_1d):
    sysd = zoh_discretize(double_integrator, 1.0, 3)
    sol = _solution([[1.0], [0.0], [-1.0]], dt=1.0)
    rep = discreteness_report(set_1d, sol)
    assert rep.d_bar == 0.0
    assert rep.fraction_on_vertices == 1.0
    assert_allclose(rep.d, 0.0)
    assert rep.quantized.shape == sol.u.shape


def test_discreteness_mixed_steps(set_1d):
    # One interior step out of three: distances (0.4, 0, 0).
    sol = _solution([[0.4], [1.0], [0.0]], dt=1.0)
    rep = discreteness_report(set_1d, sol)
    assert_allclose(rep.d, [0.4, 0.0, 0.0])
    assert rep.d_bar == pytest.approx(0.4 / 3)
    assert rep.fraction_on_vertices == pytest.approx(2.0 / 3)
    # Quantization snaps the interior step to the nearest admissible point.
    assert_allclose(rep.quantized[:, 0], [0.0, 1.0, 0.0])


def test_discreteness_quantized_terminal_error(double_integrator, set_1d):
    prob = transcribe(double_integrator, set_1d, [0.5, 0.0], [0.0, 0.0], 4.0, 16)
    res = solve_lp(prob.program)
    sol = extract_solution(prob, res.z, status=res.status)
    rep = discreteness_report(set_1d, sol)
    # Re-propagate the snapped sequence by hand and compare endpoints.
    xq = propagate(prob.sysd, prob.x0, rep.quantized)
    err = np.linalg.norm(xq[-1] - prob.xf)
    assert rep.quantized_terminal_error == pytest.approx(err, abs=1e-12)


def test_discreteness_custom_tol(set_1d):
    sol = _solution([[0.99999]], dt=1.0)
    strict = discreteness_report(set_1d, sol, tol=1e-9)
    loose = discreteness_report(set_1d, sol, tol=1e-3)
    assert strict.fraction_on_vertices == 0.0
    assert loose.fraction_on_vertices == 1.0


def test_hands_off_zero_input_is_zero():
    sol = _solution(np.zeros((5, 2)), dt=0.5)
    assert hands_off_measure(sol, 1e-9) == 0.0


def test_hands_off_counts_active_steps():
    sol = _solution([[1.0], [0.0], [0.0], [-1.0]], dt=1.0)
    # Two silent steps of the four.
    assert hands_off_measure(sol, 1e-6) == pytest.approx(2.0)


def test_hands_off_rejects_negative_tol():
    sol = _solution(np.zeros((2, 1)))
    with pytest.raises(ValueError, match="zero_tol"):
        hands_off_measure(sol, -1e-3)


def test_verify_bang_bang_clean_case(double_integrator, set_1d):
    sysd = zoh_discretize(double_integrator, 1.0, 4)
    sol = _solution([[1.0], [0.0], [0.0], [-1.0]], dt=1.0)
    cert = verify_bang_bang(set_1d, sol)
    assert cert.ok
    assert cert.fraction_on_vertices == 1.0
    assert cert.exceptions == ()
    assert cert.max_slack_gap == 0.0


def test_verify_bang_bang_tolerates_sparse_exceptions(set_1d):
    u = np.zeros((100, 1))
    u[0] = 1.0
    u[50] = 0.37
    sol = _solution(u, dt=1.0)
    cert = verify_bang_bang(set_1d, sol)
    assert cert.ok
    assert cert.exceptions == (50,)
    assert cert.fraction_on_vertices == pytest.approx(0.99)


def test_verify_bang_bang_fails_below_threshold(set_1d):
    u = np.zeros((10, 1))
    u[::2] = 0.5
    sol = _solution(u, dt=1.0)
    cert = verify_bang_bang(set_1d, sol)
    assert not cert.ok
    assert cert.fraction_on_vertices == pytest.approx(0.5)


def test_verify_bang_bang_rejects_slack_gap(set_1d):
    # The inputs sit on vertices, but one epigraph variable is inflated.
    # The check runs on the lifted pair (u, nu), so the gap both lowers the
    # vertex fraction and shows up as a complementarity failure.
    u = np.array([[1.0], [0.0]])
    nu = np.array([1.0, 0.8])
    sol = _solution(u, nu=nu, dt=1.0, slack_gap_steps=(1,))
    cert = verify_bang_bang(set_1d, sol)
    assert not cert.ok
    assert cert.exceptions == (1,)
    assert cert.max_slack_gap == pytest.approx(0.8)


def test_solution_terminal_residual():
    x = np.zeros((3, 2))
    x[-1] = [3.0, 4.0]
    sol = _solution(np.zeros((2, 1)), x=x, xf=np.zeros(2))
    assert sol.terminal_residual == pytest.approx(5.0)
    assert sol.N == 2


def test_solution_arrays_read_only():
    sol = _solution([[1.0], [0.0]])
    with pytest.raises(ValueError):
        sol.u[0, 0] = 2.0
    with pytest.raises(ValueError):
        sol.x[0, 0] = 2.0


def test_tol_vertex_scales_with_magnitude():
    assert tol_vertex(1.0) == pytest.approx(1e-4)
    assert tol_vertex(100.0) == pytest.approx(1e-2)
    assert tol_vertex(0.01) == pytest.approx(1e-4)
