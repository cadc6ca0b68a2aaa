import math

import numpy as np
import pytest

from barycentric_ot.exceptions import NotConverged
from barycentric_ot.models import DualPotential, MaxAffineFunction
from barycentric_ot.services.dual import (
    build_dual_potential, conjugate_at, dual_certifier, duality_gap, q2_at
)
from barycentric_ot.services.wot_solver import solve_barycentric
from tests.conftest import random_measure


def pieces(slopes, offsets) -> MaxAffineFunction:
    return MaxAffineFunction(
        slopes=np.asarray(slopes, dtype=float).reshape(len(offsets), -1),
        offsets=np.asarray(offsets, dtype=float),
    )


def dual_value(mu, nu, f: MaxAffineFunction) -> float:
    q2 = np.array([q2_at(f, x) for x in mu.points])
    return float(mu.weights @ q2 - nu.weights @ f.evaluate(nu.points))


def test_conjugate_examples():
    hinge = pieces([0.0, 1.0], [0.0, -1.0])
    assert conjugate_at(hinge, [0.5]) == pytest.approx(0.5)
    assert conjugate_at(hinge, [2.0]) == math.inf
    assert conjugate_at(pieces([0.7], [0.3]), [0.7]) == pytest.approx(-0.3)


def test_biconjugate_recovers_the_function(rng):
    for d in (1, 2):
        g = pieces(rng.standard_normal((5, d)), rng.standard_normal(5))
        tangents = np.array([conjugate_at(g, a) for a in g.slopes])
        assert np.all(tangents <= -g.offsets + 1e-9)
        for y in rng.standard_normal((10, d)):
            biconjugate = float(np.max(g.slopes @ y - tangents))
            assert biconjugate == pytest.approx(g.evaluate(y), abs=1e-9)


def test_q2_of_zero_is_zero():
    zero = pieces([0.0], [0.0])
    for x in (-1.0, 0.0, 2.5):
        assert q2_at(zero, [x]) == pytest.approx(0.0, abs=1e-15)


def test_q2_of_affine_function():
    # inf_y a y + c + (y - x)^2 = a x + c - a^2 / 4
    f = pieces([1.0], [0.3])
    assert q2_at(f, [2.0]) == pytest.approx(2.05)


def test_q2_bracket_is_tight(rng):
    f = pieces(rng.standard_normal((4, 2)), rng.standard_normal(4))
    for x in rng.standard_normal((5, 2)):
        bracket = dual_certifier.q2_bracket(f, x)
        assert bracket.lower <= bracket.upper
        assert bracket.upper - bracket.lower <= 1e-9


def test_two_atom_certificate(two_atoms):
    mu, nu = two_atoms
    solution = solve_barycentric(mu, nu, tol=1e-12)
    potential = build_dual_potential(solution)
    np.testing.assert_allclose(np.sort(potential.brenier.slopes[:, 0]), [0.0, 1.0])
    np.testing.assert_allclose(potential.f_circ.evaluate(np.array([[0.0], [2.0]])), [2.0, 0.0], atol=1e-5)

    certificate = duality_gap(mu, nu, solution, potential)
    assert certificate.certified
    assert abs(certificate.gap) <= 1e-6
    assert certificate.dual_value == pytest.approx(0.25, abs=1e-6)
    np.testing.assert_allclose(certificate.q2_values, [1.75, 0.75], atol=1e-5)


def test_phi_on_two_atom_example(two_atoms):
    potential = build_dual_potential(solve_barycentric(*two_atoms, tol=1e-12))
    assert dual_certifier.phi_at(potential, [1.0]) == pytest.approx(0.125, abs=1e-4)
    assert dual_certifier.phi_at(potential, [0.0]) == pytest.approx(-0.875, abs=1e-4)


def test_dirac_certificate(shifted_pair):
    mu, nu = shifted_pair
    solution = solve_barycentric(mu, nu)
    potential = build_dual_potential(solution)
    np.testing.assert_allclose(potential.brenier.slopes, [[0.5]])
    assert duality_gap(mu, nu, solution, potential).gap == pytest.approx(0.0, abs=1e-8)


def test_identical_measures_certificate(rng):
    mu = random_measure(rng, 4, 2)
    solution = solve_barycentric(mu, mu, tol=1e-12)
    certificate = duality_gap(mu, mu, solution, build_dual_potential(solution))
    assert certificate.certified
    assert abs(certificate.gap) <= 1e-6


def test_random_instances_are_certified(rng):
    for d in (1, 2):
        mu = random_measure(rng, 4, d)
        nu = random_measure(rng, 3, d, spread=2.0)
        solution = solve_barycentric(mu, nu, tol=1e-11)
        certificate = duality_gap(mu, nu, solution, build_dual_potential(solution))
        assert certificate.gap >= -1e-8
        assert certificate.certified


def test_gap_is_invariant_under_constant_shift(two_atoms):
    mu, nu = two_atoms
    solution = solve_barycentric(mu, nu, tol=1e-12)
    potential = build_dual_potential(solution)
    f = potential.f_circ
    shifted = DualPotential(
        f_circ=MaxAffineFunction(slopes=f.slopes, offsets=f.offsets + 3.0),
        brenier=potential.brenier,
    )
    original = duality_gap(mu, nu, solution, potential).gap
    assert duality_gap(mu, nu, solution, shifted).gap == pytest.approx(original, abs=1e-9)


def test_weak_duality_for_arbitrary_functions(rng):
    mu = random_measure(rng, 4, 2)
    nu = random_measure(rng, 4, 2)
    value = solve_barycentric(mu, nu).value
    for _ in range(10):
        f = pieces(2.0 * rng.standard_normal((3, 2)), rng.standard_normal(3))
        assert dual_value(mu, nu, f) <= value + 1e-8


def test_dual_potential_needs_convergence(two_atoms):
    solution = solve_barycentric(*two_atoms, tol=1e-12, max_iters=1)
    with pytest.raises(NotConverged):
        build_dual_potential(solution)
