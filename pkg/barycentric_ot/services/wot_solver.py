"""
Barycentric weak transport solver.
Frank-Wolfe over the transport polytope with exact line search, optional
away steps, and extraction of the projection onto the convex-order ball.
"""

from typing import List, Optional, Union
import numpy as np

from barycentric_ot.config import settings
from barycentric_ot.exceptions import NotConverged, NumericBreakdown
from barycentric_ot.models import DiscreteMeasure, Projection, TransportPlan, WotSolution
from barycentric_ot.services.linprog import random_vertex, rank_one_minimizer_1d, solve_transport
from barycentric_ot.services.measures import diameter, merge_close, same_dimension, second_moment
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


StartPlan = Union[str, TransportPlan, np.ndarray]


class _ActiveSet:
    """Convex combination of plans; vertices are keyed by their support."""

    def __init__(self, start: np.ndarray, key: Optional[bytes]):
        self.atoms: List[np.ndarray] = [start]
        self.keys: List[Optional[bytes]] = [key]
        self.weights: List[float] = [1.0]

    def plan(self) -> np.ndarray:
        return sum(w * a for w, a in zip(self.weights, self.atoms))

    def add_toward(self, vertex: np.ndarray, key: bytes, gamma: float) -> None:
        if gamma >= 1.0:
            self.atoms, self.keys, self.weights = [vertex], [key], [1.0]
            return
        self.weights = [(1.0 - gamma) * w for w in self.weights]
        if key in self.keys:
            self.weights[self.keys.index(key)] += gamma
        else:
            self.atoms.append(vertex)
            self.keys.append(key)
            self.weights.append(gamma)

    def move_away(self, index: int, gamma: float, gamma_max: float) -> None:
        self.weights = [(1.0 + gamma) * w for w in self.weights]
        self.weights[index] -= gamma
        if gamma >= gamma_max or self.weights[index] <= 0.0:
            del self.atoms[index], self.keys[index], self.weights[index]
            total = sum(self.weights)
            self.weights = [w / total for w in self.weights]


def _vertex_key(matrix: np.ndarray) -> bytes:
    # a vertex of the transport polytope is determined by its support
    return np.packbits(matrix > 0.0).tobytes()


class BarycentricSolver:
    """Solver for T2(nu|mu) = inf over couplings of sum_i mu_i |b_i - x_i|^2."""

    def objective_value(self, plan: TransportPlan) -> float:
        """Barycentric cost of a plan."""
        displacement = plan.barycenters() - plan.row_measure.points
        return float(plan.row_measure.weights @ np.einsum("ij,ij->i", displacement, displacement))

    def default_tol(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return settings.fw_tol_scale * (1.0 + second_moment(mu) + second_moment(nu))

    def _linear_minimizer(self, scores: np.ndarray, mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
        """Vertex minimizing <G, s> with G_ij = scores_i . y_j."""
        if mu.dim == 1:
            return rank_one_minimizer_1d(scores[:, 0], mu, nu)
        gradient = scores @ nu.points.T
        return solve_transport(gradient, mu, nu).plan.matrix

    def _starting_plan(self, start: StartPlan, mu: DiscreteMeasure, nu: DiscreteMeasure, seed: int):
        if isinstance(start, TransportPlan):
            return np.array(start.matrix, dtype=float), None
        if isinstance(start, np.ndarray):
            return np.array(start, dtype=float).reshape(mu.size, nu.size), None
        if start == "product":
            return np.outer(mu.weights, nu.weights), None
        if start == "random_vertex":
            matrix = random_vertex(mu, nu, np.random.default_rng(seed)).matrix
            return matrix, _vertex_key(matrix)
        raise ValueError(f"unknown start {start!r}")

    def solve(
        self,
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        tol: Optional[float] = None,
        max_iters: Optional[int] = None,
        start: StartPlan = "product",
        away_steps: Optional[bool] = None,
        seed: Optional[int] = None,
    ) -> WotSolution:
        """
        Run Frank-Wolfe until the duality gap <G, pi - s> drops below tol.

        Args:
            mu: source measure (rows)
            nu: target measure (columns)
            tol: gap tolerance, default 1e-8 (1 + M2(mu) + M2(nu))
            max_iters: iteration cap
            start: "product", "random_vertex" or an explicit plan
            away_steps: use away steps (default from settings)
            seed: seed for the random-vertex start

        Returns:
            WotSolution; converged=False marks a best iterate after the cap
        """
        same_dimension(mu, nu)
        tol = tol if tol is not None else self.default_tol(mu, nu)
        max_iters = max_iters if max_iters is not None else settings.fw_max_iters
        away_steps = settings.fw_away_steps if away_steps is None else away_steps
        seed = settings.seed if seed is None else seed

        x = mu.points
        y = nu.points
        w = mu.weights
        matrix, key = self._starting_plan(start, mu, nu, seed)
        active = _ActiveSet(matrix, key)

        def barycenters(pi: np.ndarray) -> np.ndarray:
            return (pi @ y) / w[:, None]

        def value_of(b: np.ndarray) -> float:
            d = b - x
            return float(w @ np.einsum("ij,ij->i", d, d))

        b = barycenters(matrix)
        value = value_of(b)
        gap = np.inf
        converged = False
        iteration = 0

        for iteration in range(1, max_iters + 1):
            scores = 2.0 * (b - x)
            gradient = scores @ y.T
            vertex = self._linear_minimizer(scores, mu, nu)
            gap = float(np.sum(gradient * (matrix - vertex)))
            if gap <= tol:
                converged = True
                break

            direction = vertex - matrix
            gamma_max = 1.0
            away_index = -1
            if away_steps and len(active.atoms) > 1:
                inner = [float(np.sum(gradient * a)) for a in active.atoms]
                away_index = int(np.argmax(inner))
                away_gap = inner[away_index] - float(np.sum(gradient * matrix))
                if away_gap > gap:
                    alpha = active.weights[away_index]
                    direction = matrix - active.atoms[away_index]
                    gamma_max = alpha / (1.0 - alpha)
                else:
                    away_index = -1

            delta_b = (direction @ y) / w[:, None]
            slope = 2.0 * float(w @ np.einsum("ij,ij->i", b - x, delta_b))
            curvature = float(w @ np.einsum("ij,ij->i", delta_b, delta_b))
            if curvature <= 0.0:
                gamma = gamma_max if slope < 0.0 else 0.0
            else:
                gamma = min(max(-slope / (2.0 * curvature), 0.0), gamma_max)

            if away_steps:
                if away_index >= 0:
                    active.move_away(away_index, gamma, gamma_max)
                else:
                    active.add_toward(vertex, _vertex_key(vertex), gamma)
                new_matrix = active.plan()
            else:
                new_matrix = matrix + gamma * direction

            new_b = barycenters(new_matrix)
            new_value = value_of(new_b)
            if new_value > value + 1e-12 * (1.0 + value):
                raise NumericBreakdown(
                    f"objective increased from {value!r} to {new_value!r} at iteration {iteration}"
                )
            matrix, b, value = new_matrix, new_b, new_value

        plan = TransportPlan(row_measure=mu, col_measure=nu, matrix=matrix)
        if converged:
            logger.info(
                f"Barycentric solve {mu.size}x{nu.size} (d={mu.dim}): "
                f"value={value:.10g}, gap={gap:.2e}, iterations={iteration}"
            )
        else:
            logger.warning(
                f"Frank-Wolfe stopped after {max_iters} iterations with gap {gap:.3e} > tol {tol:.3e}"
            )

        return WotSolution(
            plan=plan,
            barycenters=plan.barycenters(),
            value=self.objective_value(plan),
            fw_gap=max(gap, 0.0),
            iterations=iteration,
            converged=converged,
            tol=tol,
        )

    def extract_projection(self, solution: WotSolution) -> Projection:
        """
        Push mu forward by x_i -> b_i, merging images closer than
        1e-7 (1 + diam nu).

        Raises:
            NotConverged: the solution did not reach its tolerance
        """
        if not solution.converged:
            raise NotConverged(
                f"projection needs a converged solution (gap {solution.fw_gap:.3e} > {solution.tol:.3e})"
            )
        mu = solution.plan.row_measure
        nu = solution.plan.col_measure
        eps = settings.merge_eps_scale * (1.0 + diameter(nu))
        measure, labels = merge_close(solution.barycenters, mu.weights, eps)
        return Projection(
            measure=measure,
            sources=mu.points,
            images=solution.barycenters,
            source_weights=mu.weights,
            atom_index=labels,
        )


# Global solver instance
barycentric_solver = BarycentricSolver()


def solve_barycentric(mu: DiscreteMeasure, nu: DiscreteMeasure, **options) -> WotSolution:
    return barycentric_solver.solve(mu, nu, **options)


def extract_projection(solution: WotSolution) -> Projection:
    return barycentric_solver.extract_projection(solution)


def objective_value(plan: TransportPlan) -> float:
    return barycentric_solver.objective_value(plan)
