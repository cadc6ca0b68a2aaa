"""
Quadratic programming service.
Primal active-set method for convex quadratics over the probability simplex.
"""

from typing import Optional
import numpy as np
from scipy.linalg import null_space

from barycentric_ot.exceptions import IterationLimit, NumericBreakdown
from barycentric_ot.models import QpResult
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


class SimplexQpSolver:
    """
    Minimize 1/2 x'Px + q'x subject to x >= 0, sum(x) = 1, with P PSD.

    The working set holds the coordinates fixed at zero. On each face the
    equality-constrained step comes from the KKT system; a singular face
    that admits no stationary point yields a zero-curvature descent ray,
    which the ratio test always blocks because the simplex is bounded.
    """

    def __init__(self, step_tol: float = 1e-13, multiplier_tol: float = 1e-12):
        self.step_tol = step_tol
        self.multiplier_tol = multiplier_tol

    def _face_step(self, p: np.ndarray, g: np.ndarray, free: np.ndarray):
        """Step d on the free coordinates, and whether it is a full Newton step."""
        k = free.size
        if k == 1:
            return np.zeros(1), True
        p_ff = p[np.ix_(free, free)]
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = p_ff
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([-g[free], [0.0]])
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        scale = 1.0 + float(np.abs(rhs).max())
        if np.abs(kkt @ sol - rhs).max() <= 1e-10 * scale:
            return sol[:k], True

        # no stationary point on this face: descend along zero curvature
        basis = null_space(np.vstack([p_ff, np.ones((1, k))]))
        if basis.size == 0:
            raise NumericBreakdown("inconsistent KKT system on a nonsingular face")
        ray = -basis @ (basis.T @ g[free])
        if np.abs(ray).max() <= self.step_tol:
            raise NumericBreakdown("zero-curvature face without descent")
        return ray, False

    def solve(
        self,
        p: np.ndarray,
        q: np.ndarray,
        start: Optional[np.ndarray] = None,
        max_iters: Optional[int] = None,
    ) -> QpResult:
        """
        Args:
            p: symmetric PSD matrix, shape (K, K)
            q: linear term, shape (K,)
            start: feasible starting point; uniform weights if omitted
            max_iters: iteration cap, default 50K + 100

        Returns:
            QpResult with the minimizer and its KKT residual
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float).reshape(-1)
        n = q.size
        p = (p + p.T) / 2.0
        max_iters = max_iters if max_iters is not None else 50 * n + 100

        if start is None:
            x = np.full(n, 1.0 / n)
        else:
            x = np.maximum(np.asarray(start, dtype=float).reshape(-1), 0.0)
            x /= x.sum()
        fixed = x <= 0.0
        x[fixed] = 0.0

        for iteration in range(max_iters):
            g = p @ x + q
            free = np.flatnonzero(~fixed)
            step, newton = self._face_step(p, g, free)

            if newton and np.abs(step).max() <= self.step_tol:
                nu = float(g[free].mean())
                multipliers = g - nu
                bound = np.flatnonzero(fixed)
                if bound.size == 0:
                    break
                worst = bound[np.argmin(multipliers[bound])]
                if multipliers[worst] >= -self.multiplier_tol * (1.0 + abs(nu)):
                    break
                fixed[worst] = False
                continue

            alpha = 1.0 if newton else np.inf
            blocking = -1
            decreasing = step < 0.0
            if decreasing.any():
                ratios = -x[free][decreasing] / step[decreasing]
                k = int(np.argmin(ratios))
                if ratios[k] < alpha:
                    alpha = float(ratios[k])
                    blocking = int(free[decreasing][k])
            if not np.isfinite(alpha):
                raise NumericBreakdown("unbounded direction on the simplex")

            x[free] += alpha * step
            if blocking >= 0:
                x[blocking] = 0.0
                fixed[blocking] = True
            x[fixed] = 0.0
            x = np.maximum(x, 0.0)
            x /= x.sum()
        else:
            raise IterationLimit(f"simplex QP exceeded {max_iters} iterations")

        g = p @ x + q
        support = x > 0.0
        nu = float(g[support].mean())
        residual = max(
            float(np.abs(g[support] - nu).max()),
            float(np.maximum(nu - g[~support], 0.0).max()) if (~support).any() else 0.0,
        )
        value = float(0.5 * x @ p @ x + q @ x)
        logger.debug(f"Simplex QP: K={n}, iterations={iteration}, kkt={residual:.2e}")
        return QpResult(x=x, value=value, kkt_residual=residual, iterations=iteration)


# Global solver instance
simplex_qp = SimplexQpSolver()


def solve_simplex_qp(p, q, start=None, max_iters=None) -> QpResult:
    return simplex_qp.solve(p, q, start=start, max_iters=max_iters)
