"""
Dual certificate service.
Builds the polyhedral dual optimizer f° and the Brenier potential h of a
barycentric solution, evaluates conjugates and the infimum convolution
Q2 f°, and computes the duality gap.
"""

import math
import numpy as np

from barycentric_ot.config import settings
from barycentric_ot.exceptions import DegeneratePotentials, NotConverged, OutsideDomain
from barycentric_ot.models import (
    DiscreteMeasure, DualCertificate, DualPotential, LpStatus, MaxAffineFunction,
    Q2Evaluation, WotSolution
)
from barycentric_ot.services.linprog import solve_lp, solve_transport, w2_squared
from barycentric_ot.services.qp import solve_simplex_qp
from barycentric_ot.services.wot_solver import extract_projection
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


class DualCertifier:
    """Certifies barycentric solutions through the dual problem."""

    def build_dual_potential(self, solution: WotSolution) -> DualPotential:
        """
        Args:
            solution: converged Frank-Wolfe output

        Returns:
            DualPotential with
            f°(y) = max_i (2 (x_i - b_i) . y + alpha_i), alpha the row
            potentials of the linearized transport problem at the solution,
            and h(z) = max_i (x_i . z + beta_i) from the W2 potentials
            between mu and mu_bar.

        Raises:
            NotConverged: solution did not reach its tolerance
            DegeneratePotentials: x_i is not a subgradient of h at b_i
        """
        if not solution.converged:
            raise NotConverged("dual potential needs a converged solution")
        mu = solution.plan.row_measure
        nu = solution.plan.col_measure
        x, b = mu.points, solution.barycenters

        gradient = 2.0 * (b - x) @ nu.points.T
        linearized = solve_transport(gradient, mu, nu)
        f_circ = MaxAffineFunction(slopes=2.0 * (x - b), offsets=linearized.row_potentials.copy())

        projection = extract_projection(solution)
        quadratic = w2_squared(mu, projection.measure)
        beta = (quadratic.row_potentials - np.einsum("ij,ij->i", x, x)) / 2.0
        brenier = MaxAffineFunction(slopes=np.array(x), offsets=beta)

        z = projection.measure.points
        matrix = quadratic.plan.matrix
        support = matrix > settings.support_eps * mu.weights[:, None]
        h_at_z = brenier.evaluate(z)
        worst = 0.0
        for i, k in zip(*np.nonzero(support)):
            slack = float(h_at_z[k] - (x[i] @ z[k] + beta[i]))
            worst = max(worst, slack)
        if worst > settings.subgradient_tol:
            raise DegeneratePotentials(f"subgradient condition violated by {worst:.3e}")

        logger.debug(f"Dual potential built with {mu.size} pieces, subgradient slack {worst:.2e}")
        return DualPotential(f_circ=f_circ, brenier=brenier)

    def conjugate_at(self, g: MaxAffineFunction, z: np.ndarray) -> float:
        """g*(z) = min{-sum l_k c_k : sum l_k a_k = z, l in the simplex}; +inf outside conv{a_k}."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        k = g.offsets.size
        a_eq = np.vstack([g.slopes.T, np.ones((1, k))])
        b_eq = np.concatenate([z, [1.0]])
        result = solve_lp(-g.offsets, a_eq, b_eq)
        if result.status is LpStatus.INFEASIBLE:
            return math.inf
        return float(result.value)

    def q2_bracket(self, f: MaxAffineFunction, x: np.ndarray) -> Q2Evaluation:
        """
        Bracket Q2 f(x) = inf_y f(y) + |y - x|^2.

        The weights l of the pieces solve
        max_l  l'(Ax + c) - |A'l|^2 / 4  over the simplex;
        with g = A'l the lower bound is g.x - f*(g) - |g|^2/4 and the
        upper bound is f(y*) + |y* - x|^2 at y* = x - g/2.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a, c = f.slopes, f.offsets
        qp = solve_simplex_qp((a @ a.T) / 2.0, -(a @ x + c))
        g = a.T @ qp.x
        conjugate = self.conjugate_at(f, g)
        if not math.isfinite(conjugate):
            raise OutsideDomain(f"conjugate infinite at {g.tolist()}")
        y_star = x - g / 2.0
        lower = float(g @ x - conjugate - g @ g / 4.0)
        upper = float(f.evaluate(y_star) + (y_star - x) @ (y_star - x))
        return Q2Evaluation(lower=lower, upper=max(upper, lower), minimizer=y_star)

    def q2_at(self, f: MaxAffineFunction, x: np.ndarray) -> float:
        return self.q2_bracket(f, x).lower

    def phi_at(self, potential: DualPotential, x: np.ndarray) -> float:
        """phi = h* evaluated as (|x|^2 - Q2 f°(x)) / 2."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float((x @ x - self.q2_at(potential.f_circ, x)) / 2.0)

    def duality_gap(
        self,
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        solution: WotSolution,
        potential: DualPotential,
    ) -> DualCertificate:
        """
        gap = value - (sum_i mu_i Q2 f°(x_i) - sum_j nu_j f°(y_j)).

        Certified iff gap <= 1e-6 (1 + value).
        """
        f = potential.f_circ
        q2_values = np.array([self.q2_at(f, point) for point in mu.points])
        f_on_nu = f.evaluate(nu.points)
        dual_value = math.fsum(mu.weights * q2_values) - math.fsum(nu.weights * f_on_nu)
        gap = solution.value - dual_value
        if gap < -1e-8 * (1.0 + abs(solution.value)):
            logger.warning(f"Weak duality violated by {-gap:.3e}")
        certified = gap <= settings.certificate_tol * (1.0 + solution.value)
        logger.info(f"Duality gap {gap:.3e} (certified={certified})")
        return DualCertificate(
            gap=gap,
            primal_value=solution.value,
            dual_value=dual_value,
            q2_values=q2_values,
            f_on_nu=f_on_nu,
            certified=certified,
        )


# Global certifier instance
dual_certifier = DualCertifier()


def build_dual_potential(solution: WotSolution) -> DualPotential:
    return dual_certifier.build_dual_potential(solution)


def conjugate_at(g: MaxAffineFunction, z) -> float:
    return dual_certifier.conjugate_at(g, z)


def q2_at(f: MaxAffineFunction, x) -> float:
    return dual_certifier.q2_at(f, x)


def duality_gap(mu, nu, solution, potential) -> DualCertificate:
    return dual_certifier.duality_gap(mu, nu, solution, potential)
