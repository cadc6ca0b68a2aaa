import numpy as np
import pytest

from barycentric_ot.exceptions import DimensionMismatch, NotConverged
from barycentric_ot.models import TransportPlan
from barycentric_ot.services.linprog import w2_squared
from barycentric_ot.services.measures import barycenter
from barycentric_ot.services.wot_solver import (
    BarycentricSolver, extract_projection, objective_value, solve_barycentric
)
from tests.conftest import measure, random_measure


def product_plan(mu, nu) -> TransportPlan:
    return TransportPlan(row_measure=mu, col_measure=nu, matrix=np.outer(mu.weights, nu.weights))


def test_two_atom_example(two_atoms):
    mu, nu = two_atoms
    solution = solve_barycentric(mu, nu, tol=1e-12)
    assert solution.converged
    assert solution.value == pytest.approx(0.25, abs=1e-9)
    np.testing.assert_allclose(solution.barycenters[:, 0], [0.5, 1.5], atol=1e-5)
    assert solution.plan.marginal_residual() <= 1e-9


def test_identical_measures_have_zero_cost(rng):
    mu = random_measure(rng, 5, 2)
    solution = solve_barycentric(mu, mu, tol=1e-12)
    assert solution.converged
    assert solution.value == pytest.approx(0.0, abs=1e-9)


def test_dirac_source_sees_only_the_mean(symmetric_pair, shifted_pair):
    assert solve_barycentric(*symmetric_pair).value == pytest.approx(0.0, abs=1e-15)
    assert solve_barycentric(*shifted_pair).value == pytest.approx(0.25, abs=1e-15)


def test_objective_value_of_product_plan(two_atoms):
    mu, nu = two_atoms
    assert objective_value(product_plan(mu, nu)) == pytest.approx(0.5)


def test_objective_value_of_identity_plan():
    mu = measure([[0.0], [1.0]], [0.5, 0.5])
    plan = TransportPlan(row_measure=mu, col_measure=mu, matrix=0.5 * np.eye(2))
    assert objective_value(plan) == 0.0


def test_extract_projection(two_atoms):
    solution = solve_barycentric(*two_atoms, tol=1e-12)
    projection = extract_projection(solution)
    np.testing.assert_allclose(np.sort(projection.measure.points[:, 0]), [0.5, 1.5], atol=1e-5)
    np.testing.assert_allclose(projection.measure.weights, [0.5, 0.5])
    np.testing.assert_array_equal(projection.sources, two_atoms[0].points)
    assert set(projection.atom_index.tolist()) == {0, 1}


def test_projection_of_a_dirac_source_is_the_dirac_at_the_mean(symmetric_pair):
    projection = extract_projection(solve_barycentric(*symmetric_pair))
    assert projection.measure.size == 1
    assert projection.measure.points[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_iteration_cap_marks_solution_unconverged(two_atoms):
    solution = solve_barycentric(*two_atoms, tol=1e-12, max_iters=1)
    assert not solution.converged
    assert solution.iterations == 1
    with pytest.raises(NotConverged):
        extract_projection(solution)


def test_plain_frank_wolfe_agrees_with_away_steps(rng):
    mu = random_measure(rng, 4, 2)
    nu = random_measure(rng, 3, 2)
    with_away = solve_barycentric(mu, nu, tol=1e-12)
    plain = solve_barycentric(mu, nu, tol=1e-4, away_steps=False)
    assert plain.converged
    assert with_away.value - 1e-9 <= plain.value <= with_away.value + 1e-4


@pytest.mark.parametrize("start", ["product", "random_vertex"])
def test_starting_point_does_not_change_the_value(rng, start):
    mu = random_measure(rng, 4, 2)
    nu = random_measure(rng, 5, 2)
    reference = solve_barycentric(mu, nu, tol=1e-12).value
    assert solve_barycentric(mu, nu, tol=1e-12, start=start, seed=3).value == pytest.approx(reference, abs=1e-9)


def test_explicit_starting_plan(two_atoms):
    mu, nu = two_atoms
    start = TransportPlan(row_measure=mu, col_measure=nu, matrix=0.5 * np.eye(2))
    solution = solve_barycentric(mu, nu, tol=1e-12, start=start)
    assert solution.value == pytest.approx(0.25, abs=1e-9)


def test_unknown_start_is_rejected(two_atoms):
    with pytest.raises(ValueError):
        solve_barycentric(*two_atoms, start="corner")


def test_dimensions_must_agree(triangle, two_atoms):
    with pytest.raises(DimensionMismatch):
        solve_barycentric(two_atoms[0], triangle)


def test_value_is_sandwiched(rng):
    for d in (1, 2, 3):
        mu = random_measure(rng, 4, d)
        nu = random_measure(rng, 4, d, loc=0.3)
        value = solve_barycentric(mu, nu).value
        mean_gap = float(np.sum((barycenter(mu) - barycenter(nu)) ** 2))
        assert mean_gap - 1e-9 <= value <= w2_squared(mu, nu).value + 1e-6


def test_default_tolerance_scales_with_moments(two_atoms):
    mu, nu = two_atoms
    assert BarycentricSolver().default_tol(mu, nu) == pytest.approx(1e-8 * (1.0 + 0.5 + 2.0))
