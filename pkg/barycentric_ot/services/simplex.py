"""
Simplex projection service.
When nu lives on the vertices of a simplex, the projection of mu onto the
convex-order ball is the pushforward of mu under x -> proj(x + v) for a
translation v that matches barycenters.
"""

from typing import Optional, Tuple
import numpy as np
from scipy.linalg import orth
from scipy.optimize import brentq

from barycentric_ot.config import settings
from barycentric_ot.exceptions import (
    BarycenterOnBoundary, DegenerateSimplex, NoConvergence, NumericBreakdown
)
from barycentric_ot.models import DiscreteMeasure, Projection, SimplexInstance, SimplexProjection
from barycentric_ot.services.linprog import w2_squared
from barycentric_ot.services.measures import barycenter, diameter, merge_close, same_dimension
from barycentric_ot.services.qp import solve_simplex_qp
from barycentric_ot.utils.logger import get_logger

logger = get_logger(__name__)


class SimplexProjector:
    """Closed-form projection for targets supported on simplex vertices."""

    def instance_from_measure(self, nu: DiscreteMeasure) -> SimplexInstance:
        """
        Raises:
            DegenerateSimplex: atoms of nu are not affinely independent
        """
        vertices = np.array(nu.points)
        if nu.size > nu.dim + 1:
            raise DegenerateSimplex(f"{nu.size} vertices cannot be affinely independent in dimension {nu.dim}")
        if nu.size > 1:
            edges = vertices[1:] - vertices[0]
            singular = np.linalg.svd(edges, compute_uv=False)
            if singular.min() <= 1e-10 * max(1.0, singular.max()):
                raise DegenerateSimplex(f"edge matrix is rank deficient (singular values {singular.tolist()})")
        return SimplexInstance(vertices=vertices, nu_weights=np.array(nu.weights))

    def directions(self, simplex: SimplexInstance) -> np.ndarray:
        """Orthonormal basis of the direction space of the affine span, shape (d, k)."""
        edges = simplex.vertices[1:] - simplex.vertices[0]
        if edges.shape[0] == 0:
            return np.zeros((simplex.vertices.shape[1], 0))
        return orth(edges.T)

    def project(
        self, z: np.ndarray, simplex: SimplexInstance, start: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Orthogonal projection onto the simplex.

        Returns:
            (projected point, barycentric coordinates)
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        y = simplex.vertices
        result = solve_simplex_qp(2.0 * y @ y.T, -2.0 * y @ z, start=start)
        scale = 1.0 + float(np.abs(z).max()) + float(np.abs(y).max())
        if result.kkt_residual > settings.simplex_kkt_tol * scale * scale:
            raise NumericBreakdown(f"simplex projection KKT residual {result.kkt_residual:.3e}")
        return result.x @ y, result.x

    def _face_jacobian(self, simplex: SimplexInstance, coordinates: np.ndarray) -> np.ndarray:
        face = simplex.vertices[coordinates > 0.0]
        d = simplex.vertices.shape[1]
        if face.shape[0] < 2:
            return np.zeros((d, d))
        edges = (face[1:] - face[0]).T
        return edges @ np.linalg.pinv(edges)

    def _pushforward_barycenter(self, mu: DiscreteMeasure, simplex: SimplexInstance, v: np.ndarray):
        coords = [self.project(x + v, simplex)[1] for x in mu.points]
        images = np.array([c @ simplex.vertices for c in coords])
        return mu.weights @ images, coords

    def find_translation(self, mu: DiscreteMeasure, simplex: SimplexInstance) -> np.ndarray:
        """
        Find v with barycenter(proj#mu_v) = y_nu.

        Newton steps on the face Jacobian are tried first, then the damped
        update v <- v + (y_nu - bary)/2, then coordinate bisection.

        Raises:
            BarycenterOnBoundary: y_nu is not in the relative interior
            NoConvergence: iteration budget exhausted
        """
        if mu.dim != simplex.vertices.shape[1]:
            raise DegenerateSimplex("simplex and measure dimensions differ")
        if simplex.nu_weights.min() <= 1e-12:
            raise BarycenterOnBoundary(
                f"barycentric coordinate {simplex.nu_weights.min():.3e} of the target barycenter"
            )
        target = simplex.barycenter
        basis = self.directions(simplex)
        tol = settings.simplex_root_tol
        budget = settings.simplex_max_iters

        v = basis @ (basis.T @ (target - barycenter(mu)))
        bary, coords = self._pushforward_barycenter(mu, simplex, v)
        residual = bary - target
        norm = float(np.linalg.norm(residual))
        evaluations = 1

        while norm > tol and evaluations < budget:
            jacobian = sum(w * self._face_jacobian(simplex, c) for w, c in zip(mu.weights, coords))
            reduced = basis.T @ jacobian @ basis
            step, *_ = np.linalg.lstsq(reduced, -(basis.T @ residual), rcond=None)
            accepted = False
            for candidate in (v + basis @ step, v - 0.5 * residual):
                cand_bary, cand_coords = self._pushforward_barycenter(mu, simplex, candidate)
                evaluations += 1
                cand_norm = float(np.linalg.norm(cand_bary - target))
                if cand_norm < norm:
                    v, bary, coords, norm = candidate, cand_bary, cand_coords, cand_norm
                    residual = bary - target
                    accepted = True
                    break
            if not accepted:
                logger.debug(f"Newton and damped steps stalled at residual {norm:.3e}")
                break

        while norm > tol and evaluations < budget:
            t = basis.T @ v
            for k in range(basis.shape[1]):
                def component(s: float) -> float:
                    trial = t.copy()
                    trial[k] = s
                    return float(basis[:, k] @ (self._pushforward_barycenter(mu, simplex, basis @ trial)[0] - target))

                low, high = self._bracket(component, t[k], 1.0 + diameter(mu) + float(np.abs(simplex.vertices).max()))
                t[k] = brentq(component, low, high, xtol=tol * 1e-2, maxiter=200)
                evaluations += 1
            v = basis @ t
            bary, coords = self._pushforward_barycenter(mu, simplex, v)
            norm = float(np.linalg.norm(bary - target))
            evaluations += 1

        if norm > tol:
            raise NoConvergence(f"translation search stalled at residual {norm:.3e}")
        logger.debug(f"Translation found after {evaluations} evaluations, residual {norm:.2e}")
        return v

    @staticmethod
    def _bracket(fn, center: float, width: float) -> Tuple[float, float]:
        # fn is nondecreasing
        low, high = center - width, center + width
        for _ in range(60):
            if fn(low) <= 0.0 <= fn(high):
                return low, high
            if fn(low) > 0.0:
                low -= width
            if fn(high) < 0.0:
                high += width
            width *= 2.0
        raise NoConvergence("could not bracket the translation coordinate")

    def phi(self, x: np.ndarray, v: np.ndarray, simplex: SimplexInstance) -> float:
        """phi(x) = |x + v|^2 / 2 - d(x + v, simplex)^2 / 2."""
        z = np.asarray(x, dtype=float) + v
        p, _ = self.project(z, simplex)
        return float(z @ z / 2.0 - (z - p) @ (z - p) / 2.0)

    def projection_measure(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> SimplexProjection:
        """
        Projection mu_bar = T#mu with T(x) = proj(x + v), its value, and the
        check that T is the gradient of phi at the atoms.
        """
        same_dimension(mu, nu)
        simplex = self.instance_from_measure(nu)
        v = self.find_translation(mu, simplex)
        images = np.array([self.project(x + v, simplex)[0] for x in mu.points])
        displacement = images - mu.points
        value = float(mu.weights @ np.einsum("ij,ij->i", displacement, displacement))

        scale = 1.0 + float(np.abs(mu.points).max())
        step = 1e-5 * scale
        phi_values = np.array([self.phi(x, v, simplex) for x in mu.points])
        error = 0.0
        for x, image in zip(mu.points, images):
            for k in range(mu.dim):
                e = np.zeros(mu.dim)
                e[k] = step
                derivative = (self.phi(x + e, v, simplex) - self.phi(x - e, v, simplex)) / (2.0 * step)
                error = max(error, abs(derivative - image[k]))
        if error > 1e-5 * scale:
            raise NumericBreakdown(f"finite-difference gradient of phi misses T by {error:.3e}")

        eps = settings.merge_eps_scale * (1.0 + diameter(nu))
        measure, labels = merge_close(images, mu.weights, eps)
        projection = Projection(
            measure=measure,
            sources=mu.points,
            images=images,
            source_weights=mu.weights,
            atom_index=labels,
        )
        logger.info(f"Simplex projection: value={value:.10g}, |v|={np.linalg.norm(v):.3g}")
        return SimplexProjection(
            projection=projection,
            value=value,
            translation=v,
            phi_values=phi_values,
            gradient_error=error,
        )


# Global projector instance
simplex_projector = SimplexProjector()


def project_to_simplex(z, simplex: SimplexInstance, start=None) -> Tuple[np.ndarray, np.ndarray]:
    return simplex_projector.project(z, simplex, start=start)


def find_translation(mu: DiscreteMeasure, simplex: SimplexInstance) -> np.ndarray:
    return simplex_projector.find_translation(mu, simplex)


def simplex_projection_measure(mu: DiscreteMeasure, nu: DiscreteMeasure) -> SimplexProjection:
    return simplex_projector.projection_measure(mu, nu)


def translated_w2_squared(mu: DiscreteMeasure, eta: DiscreteMeasure, v) -> float:
    """W2^2(mu_v, eta) = W2^2(mu, eta) + |v|^2 + 2 <mean mu - mean eta, v>."""
    v = np.asarray(v, dtype=float)
    base = w2_squared(mu, eta).value
    return float(base + v @ v + 2.0 * (barycenter(mu) - barycenter(eta)) @ v)
