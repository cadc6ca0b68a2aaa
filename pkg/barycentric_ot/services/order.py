"""
Order service.
Convex order via the martingale-coupling LP, one-dimensional stochastic and
increasing convex order, and composition of barycenter map and martingale
kernel into a coupling of the original measures.
"""

import math
from typing import Optional
import numpy as np

from barycentric_ot.config import settings
from barycentric_ot.exceptions import (
    MapAtomMissing, NumericBreakdown, OrderViolated, UnsupportedDimension
)
from barycentric_ot.models import (
    DiscreteMeasure, LpStatus, MaxAffineFunction, OrderCertificate, OrderRelation,
    TransportPlan, ViolationRecord
)
from barycentric_ot.services.linprog import solve_lp, transport_constraints
from barycentric_ot.services.measures import barycenter, diameter, same_dimension
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


def _require_line(*measures: DiscreteMeasure) -> None:
    for m in measures:
        if m.dim != 1:
            raise UnsupportedDimension(f"order check is 1D only, got dimension {m.dim}")


def _merged_atoms(mu: DiscreteMeasure, nu: DiscreteMeasure, shift: float = 0.0) -> np.ndarray:
    return np.unique(np.concatenate([mu.points[:, 0], nu.points[:, 0] + shift]))


class OrderChecker:
    """Decides convex, increasing convex and stochastic order."""

    def convex_order(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> OrderCertificate:
        """
        Minimize the mu-weighted L1 barycenter residual over couplings.

        A zero optimum yields a martingale coupling. A positive optimum
        yields, from the LP duals, a convex f(y) = max_i (w_i . y + u_i)
        whose mu-integral exceeds its nu-integral.
        """
        same_dimension(mu, nu)
        n, m, d = mu.size, nu.size, mu.dim
        n_plan = n * m
        n_slack = n * d

        # barycenter rows: sum_j pi_ij y_jk - s+_ik + s-_ik = mu_i x_ik
        bary = np.zeros((n_slack, n_plan + 2 * n_slack))
        for i in range(n):
            for k in range(d):
                row = i * d + k
                bary[row, i * m:(i + 1) * m] = nu.points[:, k]
                bary[row, n_plan + row] = -1.0
                bary[row, n_plan + n_slack + row] = 1.0
        marginals = np.hstack([transport_constraints(n, m), np.zeros((n + m, 2 * n_slack))])
        a_eq = np.vstack([marginals, bary])
        b_eq = np.concatenate([mu.weights, nu.weights, (mu.weights[:, None] * mu.points).ravel()])
        costs = np.concatenate([np.zeros(n_plan), np.ones(2 * n_slack)])

        result = solve_lp(costs, a_eq, b_eq)
        if result.status is not LpStatus.OPTIMAL:
            raise NumericBreakdown(f"convex-order LP reported {result.status.value}")

        plan = TransportPlan(row_measure=mu, col_measure=nu, matrix=result.x[:n_plan].reshape(n, m))
        residuals = np.linalg.norm(plan.barycenters() - mu.points, axis=1)
        worst = float(residuals.max())

        if worst <= settings.order_exact_tol:
            return OrderCertificate(relation=OrderRelation.CONVEX, holds=True, witness=plan, residual=worst)
        if worst <= settings.order_marginal_tol:
            logger.warning(f"Convex order holds only marginally: barycenter residual {worst:.3e}")
            return OrderCertificate(
                relation=OrderRelation.CONVEX, holds=True, witness=plan, residual=worst, marginal=True
            )

        duals = result.duals
        offsets = duals[:n]
        slopes = duals[n + m:].reshape(n, d)
        separating = MaxAffineFunction(slopes=slopes, offsets=offsets)
        amount = float(mu.weights @ separating.evaluate(mu.points) - nu.weights @ separating.evaluate(nu.points))
        logger.info(f"Convex order fails: residual {worst:.3e}, separating gap {amount:.3e}")
        return OrderCertificate(
            relation=OrderRelation.CONVEX,
            holds=False,
            violation=ViolationRecord(amount=amount, separating_function=separating),
            residual=worst,
        )

    def stochastic_order_1d(
        self, mu: DiscreteMeasure, nu: DiscreteMeasure, shift: float = 0.0
    ) -> OrderCertificate:
        """mu <=_s (nu shifted by `shift`) iff CDF_mu >= CDF_nu on the merged atoms."""
        _require_line(mu, nu)
        x, y = mu.points[:, 0], nu.points[:, 0] + shift
        worst, where = 0.0, None
        for t in _merged_atoms(mu, nu, shift):
            excess = math.fsum(nu.weights[y <= t]) - math.fsum(mu.weights[x <= t])
            if excess > worst:
                worst, where = excess, float(t)
        if worst > settings.cdf_tol:
            return OrderCertificate(
                relation=OrderRelation.STOCHASTIC,
                holds=False,
                violation=ViolationRecord(threshold=where, amount=worst),
                residual=worst,
            )
        return OrderCertificate(relation=OrderRelation.STOCHASTIC, holds=True, residual=worst)

    def icx_order_1d(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> OrderCertificate:
        """Stop-loss dominance at every kink plus the mean comparison."""
        _require_line(mu, nu)
        x, y = mu.points[:, 0], nu.points[:, 0]
        worst = float(barycenter(mu)[0] - barycenter(nu)[0])
        where = -math.inf
        for k in _merged_atoms(mu, nu):
            excess = (
                math.fsum(mu.weights * np.maximum(x - k, 0.0))
                - math.fsum(nu.weights * np.maximum(y - k, 0.0))
            )
            if excess > worst:
                worst, where = excess, float(k)
        if worst > settings.icx_tol:
            return OrderCertificate(
                relation=OrderRelation.ICX,
                holds=False,
                violation=ViolationRecord(threshold=where, amount=worst),
                residual=worst,
            )
        return OrderCertificate(relation=OrderRelation.ICX, holds=True, residual=max(worst, 0.0))

    def martingale_coupling(self, mu_bar: DiscreteMeasure, nu: DiscreteMeasure) -> TransportPlan:
        certificate = self.convex_order(mu_bar, nu)
        if not certificate.holds:
            raise OrderViolated(
                f"no martingale coupling: barycenter residual {certificate.residual:.3e}"
            )
        return certificate.witness

    def compose_chain(
        self,
        mu: DiscreteMeasure,
        images: np.ndarray,
        kernel: TransportPlan,
        atom_index: Optional[np.ndarray] = None,
    ) -> TransportPlan:
        """
        Chain x_i -> b(x_i) -> y: pi_ij = mu_i q_{b(x_i), j}.

        Args:
            mu: source measure
            images: b(x_i) for every atom, shape (n, d)
            kernel: martingale coupling from mu_bar to nu
            atom_index: mu_bar atom of every image, when already known

        Raises:
            MapAtomMissing: an image matches no atom of mu_bar
        """
        images = np.asarray(images, dtype=float).reshape(mu.size, -1)
        source = kernel.row_measure
        if atom_index is None:
            tol = settings.merge_eps_scale * (1.0 + diameter(kernel.col_measure))
            atom_index = np.empty(mu.size, dtype=int)
            for i, image in enumerate(images):
                distances = np.linalg.norm(source.points - image, axis=1)
                k = int(np.argmin(distances))
                if distances[k] > tol:
                    raise MapAtomMissing(f"image {image.tolist()} of atom {i} is not an atom of the kernel source")
                atom_index[i] = k
        elif np.any(atom_index < 0) or np.any(atom_index >= source.size):
            raise MapAtomMissing("atom index outside the kernel source")

        matrix = mu.weights[:, None] * kernel.kernels()[atom_index]
        return TransportPlan(row_measure=mu, col_measure=kernel.col_measure, matrix=matrix)


# Global checker instance
order_checker = OrderChecker()


def check_convex_order(mu: DiscreteMeasure, nu: DiscreteMeasure) -> OrderCertificate:
    return order_checker.convex_order(mu, nu)


def check_stochastic_order_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, shift: float = 0.0) -> OrderCertificate:
    return order_checker.stochastic_order_1d(mu, nu, shift=shift)


def check_icx_order_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> OrderCertificate:
    return order_checker.icx_order_1d(mu, nu)


def build_martingale_coupling(mu_bar: DiscreteMeasure, nu: DiscreteMeasure) -> TransportPlan:
    return order_checker.martingale_coupling(mu_bar, nu)


def compose_chain(mu, images, kernel, atom_index=None) -> TransportPlan:
    return order_checker.compose_chain(mu, images, kernel, atom_index=atom_index)
