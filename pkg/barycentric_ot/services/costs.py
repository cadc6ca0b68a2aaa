"""
Weak cost service.
The c_lambda family and its reduction to the quadratic barycentric problem,
kernel cost callbacks, and a brute-force oracle for tiny instances.
"""

import itertools
import math
from typing import Callable, List, Optional
import numpy as np
from scipy.optimize import minimize

from barycentric_ot.config import settings
from barycentric_ot.exceptions import NegativeLambda, TooLarge, UnsupportedDimension
from barycentric_ot.models import (
    DiscreteMeasure, LambdaReduction, LambdaSolution, OracleResult, TransportPlan
)
from barycentric_ot.services.linprog import monotone_coupling_1d, random_vertex, transport_constraints
from barycentric_ot.services.measures import scale, second_moment, variance
from barycentric_ot.services.wot_solver import barycentric_solver
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


# cost(x, p, y) with p a probability vector over the atoms y
KernelCost = Callable[[np.ndarray, np.ndarray, np.ndarray], float]


class QuadraticBarycentricCost:
    """c(x, p) = |sum_j p_j y_j - x|^2."""

    def __call__(self, x: np.ndarray, p: np.ndarray, y: np.ndarray) -> float:
        d = p @ y - x
        return float(d @ d)

    def gradient(self, x: np.ndarray, p: np.ndarray, y: np.ndarray) -> np.ndarray:
        return 2.0 * y @ (p @ y - x)


class LambdaCost:
    """c_lambda(x, p) = (lambda - 1) int |y - x|^2 dp + |int y dp - x|^2."""

    def __init__(self, lam: float):
        if lam < 0.0:
            raise NegativeLambda(f"lambda must be nonnegative, got {lam!r}")
        self.lam = lam

    def __call__(self, x: np.ndarray, p: np.ndarray, y: np.ndarray) -> float:
        spread = np.sum((y - x) ** 2, axis=1)
        d = p @ y - x
        return float((self.lam - 1.0) * (p @ spread) + d @ d)

    def gradient(self, x: np.ndarray, p: np.ndarray, y: np.ndarray) -> np.ndarray:
        spread = np.sum((y - x) ** 2, axis=1)
        return (self.lam - 1.0) * spread + 2.0 * y @ (p @ y - x)


class ZeroCost:
    def __call__(self, x, p, y) -> float:
        return 0.0

    def gradient(self, x, p, y) -> np.ndarray:
        return np.zeros(p.size)


def _finite_difference_gradient(cost: KernelCost, x, p, y, step: float = 1e-7) -> np.ndarray:
    grad = np.empty(p.size)
    for j in range(p.size):
        e = np.zeros(p.size)
        e[j] = step
        grad[j] = (cost(x, p + e, y) - cost(x, p - e, y)) / (2.0 * step)
    return grad


class WeakCostOracle:
    """Brute-force minimization of int c(x, p_x) dmu over the transport polytope."""

    def _objective(self, cost: KernelCost, mu: DiscreteMeasure, nu: DiscreteMeasure):
        n, m = mu.size, nu.size
        has_gradient = hasattr(cost, "gradient")

        def value(flat: np.ndarray) -> float:
            matrix = flat.reshape(n, m)
            return math.fsum(
                mu.weights[i] * cost(mu.points[i], matrix[i] / mu.weights[i], nu.points)
                for i in range(n)
            )

        def gradient(flat: np.ndarray) -> np.ndarray:
            matrix = flat.reshape(n, m)
            rows = []
            for i in range(n):
                p = matrix[i] / mu.weights[i]
                if has_gradient:
                    rows.append(cost.gradient(mu.points[i], p, nu.points))
                else:
                    rows.append(_finite_difference_gradient(cost, mu.points[i], p, nu.points))
            return np.concatenate(rows)

        return value, gradient

    def vertices(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> List[np.ndarray]:
        """Every vertex of the transport polytope, by basis enumeration."""
        n, m = mu.size, nu.size
        a = transport_constraints(n, m)[:-1]
        b = np.concatenate([mu.weights, nu.weights])[:-1]
        rank = n + m - 1
        found = {}
        for columns in itertools.combinations(range(n * m), rank):
            basis = a[:, columns]
            if abs(np.linalg.det(basis)) < 1e-12:
                continue
            values = np.linalg.solve(basis, b)
            if values.min() < -1e-12:
                continue
            flat = np.zeros(n * m)
            flat[list(columns)] = np.maximum(values, 0.0)
            found[np.round(flat, 12).tobytes()] = flat
        return list(found.values())

    def minimize(
        self,
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        cost: KernelCost,
        restarts: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> OracleResult:
        """
        Args:
            mu: source measure
            nu: target measure
            cost: kernel cost, convex in p; may expose gradient(x, p, y)
            restarts: random interior starts (default from settings)
            seed: random seed

        Raises:
            TooLarge: n * m exceeds the oracle cap
        """
        n, m = mu.size, nu.size
        if n * m > settings.oracle_max_size:
            raise TooLarge(f"{n}x{m} instance exceeds the oracle cap of {settings.oracle_max_size} entries")
        restarts = settings.oracle_restarts if restarts is None else restarts
        rng = np.random.default_rng(settings.seed if seed is None else seed)

        value, gradient = self._objective(cost, mu, nu)
        a = transport_constraints(n, m)[:-1]
        b = np.concatenate([mu.weights, nu.weights])[:-1]
        constraints = [{"type": "eq", "fun": lambda f: a @ f - b, "jac": lambda f: a}]
        bounds = [(0.0, 1.0)] * (n * m)

        starts = [np.outer(mu.weights, nu.weights).ravel()]
        for _ in range(restarts):
            corners = np.array([random_vertex(mu, nu, rng).matrix.ravel() for _ in range(min(n * m, 4))])
            starts.append(rng.dirichlet(np.ones(corners.shape[0])) @ corners)

        candidates = []
        if n <= 3 and m <= 3:
            candidates.extend(self.vertices(mu, nu))
        for start in starts:
            result = minimize(
                value, start, jac=gradient, method="SLSQP", bounds=bounds,
                constraints=constraints, options={"ftol": 1e-15, "maxiter": 1000},
            )
            candidates.append(np.maximum(result.x, 0.0))

        best_value, best_plan = math.inf, None
        for flat in candidates:
            residual = float(np.abs(a @ flat - b).max())
            if residual > 1e-8:
                continue
            v = value(flat)
            if v < best_value - 1e-13 * (1.0 + abs(best_value)) or best_plan is None:
                best_value, best_plan = v, flat
        logger.debug(f"Oracle over {len(candidates)} candidates: {best_value:.12g}")
        return OracleResult(value=best_value, plan=best_plan.reshape(n, m))


class LambdaFamily:
    """c_lambda costs through T_{c_lambda}(nu|mu) = C(lambda) + T2(nu|mu_lambda)."""

    def reduce(self, mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float) -> LambdaReduction:
        if lam < 0.0:
            raise NegativeLambda(f"lambda must be nonnegative, got {lam!r}")
        constant = -lam * (lam - 1.0) * second_moment(mu) + (lam - 1.0) * second_moment(nu)
        return LambdaReduction(lam=lam, scaled_measure=scale(mu, lam), constant=constant)

    def solve(self, mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float, **options) -> LambdaSolution:
        """
        Value and optimal plan for c_lambda.

        For lambda > 0 the kernel of x is the kernel of lambda x in the
        quadratic problem from mu_lambda; for lambda = 0 the product plan
        is optimal with value -Var(nu).
        """
        reduction = self.reduce(mu, nu, lam)
        if lam == 0.0:
            plan = TransportPlan(row_measure=mu, col_measure=nu, matrix=np.outer(mu.weights, nu.weights))
            return LambdaSolution(value=-variance(nu), plan=plan, reduction=reduction)

        solution = barycentric_solver.solve(reduction.scaled_measure, nu, **options)
        if not solution.converged:
            logger.warning(f"c_lambda solve for lambda={lam} did not converge")
        # x -> lambda x is injective, so rows keep their order
        plan = TransportPlan(row_measure=mu, col_measure=nu, matrix=solution.plan.matrix)
        return LambdaSolution(
            value=reduction.constant + solution.value,
            plan=plan,
            reduction=reduction,
            converged=solution.converged,
        )


# Global instances
weak_cost_oracle = WeakCostOracle()
lambda_family = LambdaFamily()


def reduce_lambda(mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float) -> LambdaReduction:
    return lambda_family.reduce(mu, nu, lam)


def solve_lambda(mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float, **options) -> LambdaSolution:
    return lambda_family.solve(mu, nu, lam, **options)


def brute_force_weak_cost(mu, nu, cost: KernelCost, restarts=None, seed=None) -> OracleResult:
    return weak_cost_oracle.minimize(mu, nu, cost, restarts=restarts, seed=seed)


def plan_cost(plan: TransportPlan, cost: KernelCost) -> float:
    """int c(x, p_x) dmu for a given plan."""
    mu, nu = plan.row_measure, plan.col_measure
    kernels = plan.kernels()
    return math.fsum(mu.weights[i] * cost(mu.points[i], kernels[i], nu.points) for i in range(mu.size))


def theta_cost_via_projection_1d(
    mu: DiscreteMeasure, mu_bar: DiscreteMeasure, theta: Callable[[np.ndarray], np.ndarray]
) -> float:
    """
    Transport cost of the even convex theta between mu and its projection
    on the line, through the quantile coupling.
    """
    if mu.dim != 1 or mu_bar.dim != 1:
        raise UnsupportedDimension("theta identity is stated on the line only")
    plan = monotone_coupling_1d(mu, mu_bar)
    displacement = mu_bar.points[:, 0][None, :] - mu.points[:, 0][:, None]
    return float(np.sum(plan.matrix * theta(displacement)))
