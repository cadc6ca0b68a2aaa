"""
Linear programming service.
Dense two-phase simplex method, the transport LP built on it, and the exact
W2 solver with Kantorovich potentials.
"""

import math
from typing import List, Optional, Sequence, Tuple
import numpy as np
from scipy.spatial.distance import cdist

from barycentric_ot.config import settings
from barycentric_ot.exceptions import IterationLimit, NumericBreakdown
from barycentric_ot.models import (
    DiscreteMeasure, LpSolution, LpStatus, TransportPlan, TransportSolution
)
from barycentric_ot.services.measures import same_dimension
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


Bound = Tuple[Optional[float], Optional[float]]


class SimplexTableau:
    """
    Dense tableau for min c'x s.t. Ax = b, x >= 0.

    Holds mutable pivoting state, so each instance performs exactly one solve.
    Phase one drives artificial variables to zero; rows whose artificial
    cannot leave the basis are linearly dependent and are dropped.
    """

    def __init__(
        self,
        costs: np.ndarray,
        a_eq: np.ndarray,
        b_eq: np.ndarray,
        pivot_tol: Optional[float] = None,
        feasibility_tol: Optional[float] = None,
        max_iters: Optional[int] = None,
        bland_after: Optional[int] = None,
    ):
        self.costs = np.asarray(costs, dtype=float)
        self.a_eq = np.asarray(a_eq, dtype=float).reshape(-1, self.costs.size)
        self.b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
        self.pivot_tol = pivot_tol if pivot_tol is not None else settings.lp_pivot_tol
        self.feasibility_tol = (
            feasibility_tol if feasibility_tol is not None else settings.lp_feasibility_tol
        )
        self.max_iters = max_iters if max_iters is not None else settings.lp_max_iters
        self.bland_after = bland_after if bland_after is not None else settings.lp_bland_after
        self.iterations = 0
        self._used = False

    def _pivot(self, tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
        tableau[row] /= tableau[row, col]
        column = tableau[:, col].copy()
        column[row] = 0.0
        tableau -= np.outer(column, tableau[row])
        tableau[:, col] = 0.0
        tableau[row, col] = 1.0
        basis[row] = col

    def _run(self, tableau: np.ndarray, basis: np.ndarray, n_cols: int, tol: float) -> LpStatus:
        m = tableau.shape[0] - 1
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= self.max_iters:
                raise IterationLimit(f"simplex exceeded {self.max_iters} pivots")

            reduced = tableau[m, :n_cols]
            if bland:
                candidates = np.flatnonzero(reduced < -tol)
                if candidates.size == 0:
                    return LpStatus.OPTIMAL
                col = int(candidates[0])
            else:
                col = int(np.argmin(reduced))
                if reduced[col] >= -tol:
                    return LpStatus.OPTIMAL

            column = tableau[:m, col]
            eligible = column > self.pivot_tol
            if not eligible.any():
                return LpStatus.UNBOUNDED

            rhs = np.maximum(tableau[:m, -1], 0.0)
            ratios = np.full(m, np.inf)
            ratios[eligible] = rhs[eligible] / column[eligible]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + self.pivot_tol)
            if bland:
                row = int(ties[np.argmin(basis[ties])])
            else:
                row = int(ties[np.argmax(column[ties])])

            if best <= self.pivot_tol:
                degenerate += 1
                if not bland and degenerate > self.bland_after:
                    logger.debug(f"Switching to Bland's rule after {degenerate} degenerate pivots")
                    bland = True

            self._pivot(tableau, basis, row, col)
            self.iterations += 1

    def solve(self) -> LpSolution:
        """
        Run both phases.

        Returns:
            LpSolution in the standard-form variables; duals y satisfy
            c - A'y >= 0 at optimality.

        Raises:
            NumericBreakdown: residuals of the final vertex out of bounds
            IterationLimit: pivot budget exhausted
        """
        if self._used:
            raise RuntimeError("SimplexTableau instances are single-use")
        self._used = True

        a, b, c = self.a_eq, self.b_eq, self.costs
        m, n = a.shape
        sign = np.where(b < 0.0, -1.0, 1.0)
        a_signed = a * sign[:, None]
        b_signed = b * sign

        tableau = np.zeros((m + 1, n + m + 1))
        tableau[:m, :n] = a_signed
        tableau[:m, n:n + m] = np.eye(m)
        tableau[:m, -1] = b_signed
        tableau[m, :n] = -a_signed.sum(axis=0)
        tableau[m, -1] = -b_signed.sum()
        basis = np.arange(n, n + m)

        scale = 1.0 + float(np.abs(b_signed).sum())
        self._run(tableau, basis, n, self.feasibility_tol)
        infeasibility = -tableau[m, -1]
        if infeasibility > self.feasibility_tol * scale:
            logger.debug(f"Phase one ended with infeasibility {infeasibility:.3e}")
            return LpSolution(status=LpStatus.INFEASIBLE, iterations=self.iterations)

        # drive remaining artificials out of the basis
        keep = []
        for row in range(m):
            if basis[row] < n:
                keep.append(row)
                continue
            candidates = np.abs(tableau[row, :n])
            col = int(np.argmax(candidates)) if n else 0
            if n and candidates[col] > self.pivot_tol:
                self._pivot(tableau, basis, row, col)
                keep.append(row)

        rows = keep + [m]
        tableau = tableau[np.ix_(rows, list(range(n)) + [n + m])]
        basis = basis[keep]

        tableau[-1, :] = 0.0
        tableau[-1, :n] = c
        for row, var in enumerate(basis):
            tableau[-1] -= c[var] * tableau[row]

        cost_scale = max(1.0, float(np.abs(c).max())) if n else 1.0
        status = self._run(tableau, basis, n, settings.reduced_cost_tol * cost_scale)
        if status is LpStatus.UNBOUNDED:
            return LpSolution(status=status, iterations=self.iterations)

        x = np.zeros(n)
        x[basis] = np.maximum(tableau[:-1, -1], 0.0)

        duals = np.zeros(m)
        if keep:
            basis_matrix = a_signed[np.ix_(keep, basis)]
            try:
                duals[keep] = np.linalg.solve(basis_matrix.T, c[basis])
            except np.linalg.LinAlgError as exc:
                raise NumericBreakdown(f"singular final basis: {exc}") from exc
        duals *= sign

        residual = float(np.abs(a @ x - b).max()) if m else 0.0
        if residual > 1e-7 * (1.0 + float(np.abs(b).max())):
            raise NumericBreakdown(f"primal residual {residual:.3e} after {self.iterations} pivots")

        value = float(c @ x)
        gap = abs(value - float(b @ duals))
        if gap > 1e-8 * (1.0 + abs(value)) * max(1.0, float(np.abs(c).sum())):
            raise NumericBreakdown(f"duality gap {gap:.3e} at declared optimum")

        return LpSolution(
            status=LpStatus.OPTIMAL,
            x=x,
            duals=duals,
            value=value,
            duality_gap=gap,
            iterations=self.iterations,
        )


def solve_lp(
    costs: Sequence[float],
    a_eq: Optional[np.ndarray] = None,
    b_eq: Optional[Sequence[float]] = None,
    bounds: Optional[Sequence[Bound]] = None,
    feasibility_tol: Optional[float] = None,
) -> LpSolution:
    """
    Minimize c'x subject to A_eq x = b_eq and per-variable bounds.

    Bounds default to x >= 0; `None` on either side means unbounded. The
    problem is rewritten in standard form (shifts, reflections, splits and
    upper-bound slack rows) and solved by SimplexTableau.

    Args:
        costs: objective coefficients
        a_eq: equality matrix, shape (m, n); may be omitted
        b_eq: right-hand side
        bounds: (lower, upper) per variable
        feasibility_tol: phase-one acceptance, relative to 1 + |b|_1

    Returns:
        LpSolution in the caller's variables; duals refer to the rows of a_eq
    """
    c = np.asarray(costs, dtype=float).reshape(-1)
    n = c.size
    a = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float).reshape(-1, n)
    b = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    if bounds is None:
        bounds = [(0.0, None)] * n
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NumericBreakdown("LP data must be finite")

    # x_j = offset_j + sum_k coef * x'_k over standard columns k
    columns: List[np.ndarray] = []
    std_costs: List[float] = []
    owners: List[Tuple[int, float]] = []
    offsets = np.zeros(n)
    upper_rows: List[Tuple[int, float]] = []
    for j, (low, high) in enumerate(bounds):
        if low is not None and math.isfinite(low):
            offsets[j] = low
            columns.append(a[:, j]); std_costs.append(c[j]); owners.append((j, 1.0))
            if high is not None and math.isfinite(high):
                upper_rows.append((len(columns) - 1, high - low))
        elif high is not None and math.isfinite(high):
            offsets[j] = high
            columns.append(-a[:, j]); std_costs.append(-c[j]); owners.append((j, -1.0))
        else:
            columns.append(a[:, j]); std_costs.append(c[j]); owners.append((j, 1.0))
            columns.append(-a[:, j]); std_costs.append(-c[j]); owners.append((j, -1.0))

    n_std = len(columns)
    n_total = n_std + len(upper_rows)
    a_std = np.zeros((a.shape[0] + len(upper_rows), n_total))
    if n_std:
        a_std[:a.shape[0], :n_std] = np.column_stack(columns)
    b_std = np.concatenate([b - a @ offsets, np.array([u for _, u in upper_rows])])
    for r, (k, _) in enumerate(upper_rows):
        a_std[a.shape[0] + r, k] = 1.0
        a_std[a.shape[0] + r, n_std + r] = 1.0
    c_std = np.concatenate([np.array(std_costs), np.zeros(len(upper_rows))])

    result = SimplexTableau(c_std, a_std, b_std, feasibility_tol=feasibility_tol).solve()
    if result.status is not LpStatus.OPTIMAL:
        return result

    x = offsets.copy()
    for k, (j, coef) in enumerate(owners):
        x[j] += coef * result.x[k]

    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x,
        duals=result.duals[:a.shape[0]],
        value=float(c @ x),
        duality_gap=result.duality_gap,
        iterations=result.iterations,
    )


def transport_constraints(n: int, m: int) -> np.ndarray:
    """Row-sum then column-sum constraints on a row-major n x m plan."""
    return np.vstack([
        np.kron(np.eye(n), np.ones((1, m))),
        np.kron(np.ones((1, n)), np.eye(m)),
    ])


def solve_transport(
    cost: np.ndarray, mu: DiscreteMeasure, nu: DiscreteMeasure
) -> TransportSolution:
    """
    Exact transport LP.

    Returns:
        Vertex plan, value and potentials (u, v) with u_i + v_j <= C_ij,
        tight on the support, normalized so that v_m = 0.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = mu.size, nu.size
    if cost.shape != (n, m):
        raise NumericBreakdown(f"cost matrix shape {cost.shape} does not match ({n}, {m})")

    result = solve_lp(
        cost.ravel(),
        transport_constraints(n, m),
        np.concatenate([mu.weights, nu.weights]),
    )
    if result.status is not LpStatus.OPTIMAL:
        raise NumericBreakdown(f"transport LP reported {result.status.value}")

    matrix = result.x.reshape(n, m)
    u = result.duals[:n] + result.duals[-1]
    v = result.duals[n:] - result.duals[-1]

    plan = TransportPlan(row_measure=mu, col_measure=nu, matrix=matrix)
    residual = plan.marginal_residual()
    if residual > settings.marginal_tol:
        raise NumericBreakdown(f"transport marginal residual {residual:.3e}")
    reduced = cost - u[:, None] - v[None, :]
    scale = max(1.0, float(np.abs(cost).max()))
    if reduced.min() < -settings.reduced_cost_tol * scale * 10:
        raise NumericBreakdown(f"negative reduced cost {reduced.min():.3e}")

    return TransportSolution(
        plan=plan,
        value=float(np.sum(cost * matrix)),
        row_potentials=u,
        col_potentials=v,
    )


def north_west_corner(
    row_weights: np.ndarray,
    col_weights: np.ndarray,
    row_order: np.ndarray,
    col_order: np.ndarray,
) -> np.ndarray:
    """North-west corner rule on the given row and column orderings."""
    n, m = row_weights.size, col_weights.size
    matrix = np.zeros((n, m))
    i = j = 0
    row_left = row_weights[row_order[0]]
    col_left = col_weights[col_order[0]]
    while i < n and j < m:
        mass = min(row_left, col_left)
        matrix[row_order[i], col_order[j]] += mass
        row_left -= mass
        col_left -= mass
        if row_left <= col_left:
            i += 1
            if i < n:
                row_left = row_weights[row_order[i]]
        else:
            j += 1
            if j < m:
                col_left = col_weights[col_order[j]]
    return matrix


def monotone_coupling_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportPlan:
    """Quantile coupling of two measures on the line."""
    matrix = north_west_corner(
        mu.weights, nu.weights,
        np.argsort(mu.points[:, 0], kind="stable"),
        np.argsort(nu.points[:, 0], kind="stable"),
    )
    return TransportPlan(row_measure=mu, col_measure=nu, matrix=matrix)


def rank_one_minimizer_1d(
    row_scores: np.ndarray, mu: DiscreteMeasure, nu: DiscreteMeasure
) -> np.ndarray:
    """
    Minimizing vertex for the cost C_ij = s_i * y_j on the line.

    Sorting rows by s ascending and columns by y descending makes C a Monge
    matrix, where the north-west corner vertex is optimal.
    """
    return north_west_corner(
        mu.weights, nu.weights,
        np.argsort(row_scores, kind="stable"),
        np.argsort(-nu.points[:, 0], kind="stable"),
    )


def squared_distances(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    return cdist(mu.points, nu.points, "sqeuclidean")


def w2_squared(mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportSolution:
    """
    Squared quadratic Wasserstein distance with plan and potentials.

    Raises:
        DimensionMismatch: measures live in different dimensions
        NumericBreakdown: LP failure or 1D cross-check mismatch
    """
    same_dimension(mu, nu)
    cost = squared_distances(mu, nu)
    solution = solve_transport(cost, mu, nu)

    if mu.dim == 1:
        quantile = monotone_coupling_1d(mu, nu)
        reference = float(np.sum(cost * quantile.matrix))
        if abs(reference - solution.value) > 1e-9 * (1.0 + reference):
            raise NumericBreakdown(
                f"W2 cross-check failed: LP {solution.value!r} vs quantile {reference!r}"
            )

    logger.debug(f"W2^2 between {mu.size} and {nu.size} atoms: {solution.value:.6g}")
    return solution


def random_vertex(
    mu: DiscreteMeasure, nu: DiscreteMeasure, rng: np.random.Generator
) -> TransportPlan:
    """A vertex of the transport polytope picked by a random linear cost."""
    return solve_transport(rng.standard_normal((mu.size, nu.size)), mu, nu).plan
