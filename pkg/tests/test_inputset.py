"""Discrete input sets: construction, validation, hull geometry, projection."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fuelcvx import (
    CrossPolytope,
    DiscreteInputSet,
    ValidationError,
    augmented_extreme_points,
    distance_to_set,
    hull_extreme_points,
    project_to_set,
    validate,
)
from fuelcvx.harness import RendezvousScenario, rendezvous_input_set
from helpers import lp_extreme_mask, random_valid_w


def test_points_order_is_the_documented_one(set_2d_with_w):
    pts = set_2d_with_w.points
    assert pts.shape == (7, 2)
    assert_allclose(pts[0], [0.0, 0.0])
    assert_allclose(pts[1], [1.0, 0.0])
    assert_allclose(pts[2], [-1.0, 0.0])
    assert_allclose(pts[3], [0.0, 1.0])
    assert_allclose(pts[4], [0.0, -1.0])
    assert_allclose(pts[5], [0.5, 0.5])
    assert_allclose(pts[6], [-0.25, 0.25])


def test_constructor_rejects_bad_arguments():
    with pytest.raises(ValueError, match="m must"):
        DiscreteInputSet(m=0, u_max=1.0)
    with pytest.raises(ValueError, match="u_max"):
        DiscreteInputSet(m=1, u_max=0.0)
    with pytest.raises(ValueError, match="u_max"):
        DiscreteInputSet(m=1, u_max=np.nan)
    with pytest.raises(ValueError, match="shape"):
        DiscreteInputSet(m=2, u_max=1.0, W=[[1.0, 0.0, 0.0]])
    with pytest.raises(ValueError, match="finite"):
        DiscreteInputSet(m=1, u_max=1.0, W=[[np.inf]])


def test_constructor_rejects_duplicates():
    # A W point that coincides with a vertex.
    with pytest.raises(ValueError, match="duplicate"):
        DiscreteInputSet(m=2, u_max=1.0, W=[[1.0, 0.0]])
    # Two identical W points.
    with pytest.raises(ValueError, match="duplicate"):
        DiscreteInputSet(m=2, u_max=1.0, W=[[0.3, 0.3], [0.3, 0.3]])


def test_validate_rendezvous_set():
    s = rendezvous_input_set(RendezvousScenario())
    rep = validate(s)
    assert rep.valid
    assert s.n_points == 15


def test_validate_flags_point_outside_ball():
    s = DiscreteInputSet(m=2, u_max=1.0, W=[[0.7, 0.7]])
    rep = validate(s)
    assert not rep.valid
    assert rep.violations == ((0, pytest.approx(1.4)),)
    assert "1.4" in rep.message


def test_validate_axis_only_set():
    s = DiscreteInputSet(m=1, u_max=2.0)
    assert validate(s).valid
    assert_allclose(s.points, [[0.0], [2.0], [-2.0]])


def test_validate_accepts_boundary_point():
    # 1-norm exactly u_max: on the hull boundary but not a new vertex.
    s = DiscreteInputSet(m=2, u_max=1.0, W=[[0.5, 0.5]])
    assert validate(s).valid


def test_hull_extreme_points_ignores_w(set_2d_with_w):
    ext = hull_extreme_points(set_2d_with_w)
    assert ext.shape == (4, 2)
    assert_allclose(ext, [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    assert_allclose(np.sum(np.abs(ext), axis=1), 1.0)


def test_hull_extreme_points_m1():
    ext = hull_extreme_points(DiscreteInputSet(m=1, u_max=3.0))
    assert_allclose(ext, [[3.0], [-3.0]])


def test_hull_extreme_points_refuses_invalid_set():
    s = DiscreteInputSet(m=2, u_max=1.0, W=[[0.9, 0.9]])
    with pytest.raises(ValidationError) as exc:
        hull_extreme_points(s)
    assert exc.value.kind == "input_set"


def test_hull_matches_lp_vertex_oracle():
    """Extreme points found by per-point feasibility LPs match the closed form."""
    rng = np.random.default_rng(17)
    for m in (1, 2, 3):
        u_max = float(rng.uniform(0.5, 2.0))
        W = random_valid_w(rng, m, u_max, int(rng.integers(1, 4)))
        s = DiscreteInputSet(m=m, u_max=u_max, W=W)
        mask = lp_extreme_mask(s.points)
        lp_vertices = s.points[mask]
        closed_form = hull_extreme_points(s)
        assert lp_vertices.shape == closed_form.shape
        # Same set of points regardless of ordering.
        for v in closed_form:
            assert np.min(np.linalg.norm(lp_vertices - v, axis=1)) <= 1e-9


def test_augmented_extreme_points_m1():
    ext = augmented_extreme_points(DiscreteInputSet(m=1, u_max=1.0))
    assert_allclose(ext.vertices, [[0.0, 0.0], [1.0, 1.0], [-1.0, 1.0]])
    assert ext.u_bar == 1.0


def test_augmented_extreme_points_count_and_tightness():
    for m in (1, 2, 3, 4):
        s = DiscreteInputSet(m=m, u_max=1.5)
        ext = augmented_extreme_points(s)
        assert ext.vertices.shape == (2 * m + 1, m + 1)
        nu = ext.vertices[:, m]
        one_norms = np.sum(np.abs(ext.vertices[:, :m]), axis=1)
        assert_allclose(nu, one_norms, rtol=0, atol=0)


def test_distance_to_set_members_are_zero(set_2d_with_w):
    for p in set_2d_with_w.points:
        assert distance_to_set(set_2d_with_w, p) == 0.0


def test_distance_to_set_values(set_1d):
    assert distance_to_set(set_1d, [0.4]) == pytest.approx(0.4)
    s = DiscreteInputSet(m=2, u_max=1.0)
    assert distance_to_set(s, [0.5, 0.5]) == pytest.approx(np.sqrt(0.5))


def test_distance_to_set_lipschitz(set_2d_with_w):
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = rng.uniform(-2.0, 2.0, 2)
        b = rng.uniform(-2.0, 2.0, 2)
        da = distance_to_set(set_2d_with_w, a)
        db = distance_to_set(set_2d_with_w, b)
        assert abs(da - db) <= np.linalg.norm(a - b) + 1e-12


def test_distance_to_set_dimension_check(set_1d):
    with pytest.raises(ValueError, match="shape"):
        distance_to_set(set_1d, [0.1, 0.2])


def test_project_to_set_near_vertex():
    s = DiscreteInputSet(m=2, u_max=1.0)
    p, idx = project_to_set(s, [0.999, 0.0])
    assert_allclose(p, [1.0, 0.0])
    assert idx == 1


def test_project_to_set_origin():
    s = DiscreteInputSet(m=2, u_max=1.0)
    p, idx = project_to_set(s, [0.0, 0.0])
    assert_allclose(p, [0.0, 0.0])
    assert idx == 0


def test_project_to_set_tie_breaks_to_lowest_index():
    s = DiscreteInputSet(m=2, u_max=1.0)
    # (0.5, 0.5) is equidistant from the origin, +e1, and +e2; the origin
    # sits first in the materialized order and wins.
    p, idx = project_to_set(s, [0.5, 0.5])
    assert_allclose(p, [0.0, 0.0])
    assert idx == 0
    # (0.75, 0.75) ties only between +e1 and +e2; +e1 comes first.
    p, idx = project_to_set(s, [0.75, 0.75])
    assert_allclose(p, [1.0, 0.0])
    assert idx == 1


def test_cross_polytope_membership():
    c = CrossPolytope(m=2, u_max=1.0)
    assert c.contains([0.5, -0.5])
    assert c.contains([1.0, 0.0])
    assert not c.contains([0.8, 0.3])
    assert c.contains([0.8, 0.3], tol=0.2)
    assert_allclose(c.vertices, [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
