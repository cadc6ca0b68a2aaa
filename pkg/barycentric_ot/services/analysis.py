"""
Analysis service.
Executable structure checks for barycentric solutions: c2-monotonicity of
plans, regularity of the barycenter map, equality of W2^2 and T2, and the
submartingale structure on the line.
"""

import math
from typing import Optional
import numpy as np

from barycentric_ot.config import settings
from barycentric_ot.exceptions import PreconditionIcxFails, UnsupportedDimension
from barycentric_ot.models import (
    CheckReport, DiscreteMeasure, EqualityReport, TransportPlan, WotSolution
)
from barycentric_ot.services.linprog import w2_squared
from barycentric_ot.services.measures import second_moment
from barycentric_ot.services.order import check_icx_order_1d, check_stochastic_order_1d
from barycentric_ot.services.wot_solver import barycentric_solver
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


def default_scale(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return 1.0 + second_moment(mu) + second_moment(nu)


class StructureChecks:
    """Checks returning CheckReport; passed iff worst_violation <= tolerance."""

    def c2_monotonicity(self, plan: TransportPlan, tol: Optional[float] = None) -> CheckReport:
        """
        For atoms i != i', a in supp p_i and b in supp p_i':
        <(b_i - x_i) - (b_i' - x_i'), b - a> >= -tol.
        """
        mu, nu = plan.row_measure, plan.col_measure
        tol = tol if tol is not None else settings.regularity_tol * default_scale(mu, nu)
        displacement = plan.barycenters() - mu.points
        supports = [
            np.flatnonzero(plan.matrix[i] > settings.support_eps * mu.weights[i])
            for i in range(mu.size)
        ]

        worst, witness = 0.0, None
        for i in range(mu.size):
            for k in range(mu.size):
                if i == k:
                    continue
                scores = nu.points @ (displacement[i] - displacement[k])
                a = supports[i][np.argmax(scores[supports[i]])]
                b = supports[k][np.argmin(scores[supports[k]])]
                value = float(scores[b] - scores[a])
                if -value > worst:
                    worst = -value
                    witness = {
                        "pair": [i, k],
                        "a": nu.points[a].tolist(),
                        "b": nu.points[b].tolist(),
                        "value": value,
                    }

        return CheckReport(
            name="c2_monotone", passed=worst <= tol, worst_violation=worst, tolerance=tol, witness=witness
        )

    def map_regularity(
        self, sources: np.ndarray, images: np.ndarray, tol: Optional[float] = None
    ) -> CheckReport:
        """1-Lipschitz and |b_i - b_j|^2 <= <b_i - b_j, x_i - x_j> over all pairs."""
        x = np.atleast_2d(np.asarray(sources, dtype=float))
        b = np.atleast_2d(np.asarray(images, dtype=float))
        tol = tol if tol is not None else settings.regularity_tol

        worst, witness = 0.0, None
        for i in range(x.shape[0]):
            for j in range(i + 1, x.shape[0]):
                dx, db = x[i] - x[j], b[i] - b[j]
                lipschitz = float(np.linalg.norm(db) - np.linalg.norm(dx))
                monotone = float(db @ db - db @ dx)
                for kind, excess in (("lipschitz", lipschitz), ("monotone", monotone)):
                    if excess > worst:
                        worst = excess
                        witness = {"pair": [i, j], "kind": kind, "value": excess}

        return CheckReport(
            name="lipschitz", passed=worst <= tol, worst_violation=worst, tolerance=tol, witness=witness
        )

    def equality_w2_t2(
        self, mu: DiscreteMeasure, nu: DiscreteMeasure, tol: Optional[float] = None
    ) -> EqualityReport:
        """
        Compare W2^2(mu, nu) with T2(nu|mu); when they agree, also require
        W2(mu_bar, nu) <= projection_distance_tol.
        """
        tol = tol if tol is not None else settings.equality_tol
        w2 = w2_squared(mu, nu).value
        solver_tol = 1e-2 * settings.projection_distance_tol ** 2
        solution = barycentric_solver.solve(mu, nu, tol=solver_tol)
        threshold = tol * (1.0 + w2)
        difference = abs(w2 - solution.value)
        passed = difference <= threshold

        distance = None
        if passed:
            mu_bar = barycentric_solver.extract_projection(solution).measure
            distance = math.sqrt(max(w2_squared(mu_bar, nu).value, 0.0))
            passed = distance <= settings.projection_distance_tol

        logger.info(f"W2^2={w2:.10g}, T2={solution.value:.10g}, passed={passed}")
        return EqualityReport(
            name="equality_w2_t2",
            passed=passed,
            worst_violation=difference,
            tolerance=threshold,
            w2_squared=w2,
            barycentric_value=solution.value,
            projection_distance=distance,
        )

    def submartingale_1d(
        self, mu: DiscreteMeasure, nu: DiscreteMeasure, solution: Optional[WotSolution] = None
    ) -> CheckReport:
        """
        b_i >= x_i - tol for every atom and mu <=_s mu_bar, with
        tol = sqrt(fw_gap) + 1e-6.

        Raises:
            UnsupportedDimension: d != 1
            PreconditionIcxFails: mu is not below nu in increasing convex order
        """
        if mu.dim != 1 or nu.dim != 1:
            raise UnsupportedDimension("submartingale check is 1D only")
        if not check_icx_order_1d(mu, nu).holds:
            raise PreconditionIcxFails("mu is not dominated by nu in increasing convex order")
        solution = solution if solution is not None else barycentric_solver.solve(mu, nu)

        tol = math.sqrt(solution.fw_gap) + 1e-6
        deficits = mu.points[:, 0] - solution.barycenters[:, 0]
        worst_index = int(np.argmax(deficits))
        worst = max(float(deficits[worst_index]), 0.0)

        mu_bar = barycentric_solver.extract_projection(solution).measure
        stochastic = check_stochastic_order_1d(mu, mu_bar, shift=tol)
        passed = worst <= tol and stochastic.holds
        marginal = passed and worst > 0.0
        if marginal:
            logger.warning(f"Submartingale check passes only within slack: deficit {worst:.3e}")

        witness = {"atom": worst_index, "x": float(mu.points[worst_index, 0]),
                   "b": float(solution.barycenters[worst_index, 0]),
                   "stochastic_order": stochastic.holds}
        return CheckReport(
            name="submartingale",
            passed=passed,
            worst_violation=worst,
            tolerance=tol,
            witness=witness,
            marginal=marginal,
        )


# Global checks instance
structure_checks = StructureChecks()


def check_c2_monotonicity(plan: TransportPlan, tol: Optional[float] = None) -> CheckReport:
    return structure_checks.c2_monotonicity(plan, tol=tol)


def check_map_regularity(sources, images, tol: Optional[float] = None) -> CheckReport:
    return structure_checks.map_regularity(sources, images, tol=tol)


def check_equality_w2_t2(mu, nu, tol: Optional[float] = None) -> EqualityReport:
    return structure_checks.equality_w2_t2(mu, nu, tol=tol)


def check_submartingale_1d(mu, nu, solution: Optional[WotSolution] = None) -> CheckReport:
    return structure_checks.submartingale_1d(mu, nu, solution=solution)
