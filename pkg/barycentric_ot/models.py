"""
Pydantic models for measures, plans, solutions and certificates.
Array-valued fields hold numpy arrays; every model is immutable once built.
"""

from enum import Enum
from typing import List, Optional, Dict, Any
import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class ArrayModel(BaseModel):
    """Base for models carrying numpy arrays."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class DiscreteMeasure(ArrayModel):
    """Finitely supported probability measure on R^d."""
    points: np.ndarray = Field(..., description="Atoms, shape (n, d)")
    weights: np.ndarray = Field(..., description="Positive weights summing to one, shape (n,)")

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


class TransportPlan(ArrayModel):
    """Coupling of two discrete measures stored as a dense n x m matrix."""
    row_measure: DiscreteMeasure
    col_measure: DiscreteMeasure
    matrix: np.ndarray = Field(..., description="Nonnegative masses, shape (n, m)")

    def kernels(self) -> np.ndarray:
        """Row-normalized kernels p_i = matrix[i] / mu_i."""
        return self.matrix / self.row_measure.weights[:, None]

    def barycenters(self) -> np.ndarray:
        """Conditional barycenters b_i = sum_j pi_ij y_j / mu_i."""
        return (self.matrix @ self.col_measure.points) / self.row_measure.weights[:, None]

    def marginal_residual(self) -> float:
        """Largest deviation of row/column sums from the prescribed weights."""
        rows = np.abs(self.matrix.sum(axis=1) - self.row_measure.weights)
        cols = np.abs(self.matrix.sum(axis=0) - self.col_measure.weights)
        return float(max(rows.max(), cols.max()))


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LpSolution(ArrayModel):
    """Status-tagged result of the dense simplex method."""
    status: LpStatus
    x: Optional[np.ndarray] = Field(default=None, description="Primal vertex")
    duals: Optional[np.ndarray] = Field(default=None, description="Multipliers of the equality rows")
    value: Optional[float] = None
    duality_gap: Optional[float] = None
    iterations: int = 0


class TransportSolution(ArrayModel):
    """Optimal vertex of a transport LP with Kantorovich potentials (v_m = 0)."""
    plan: TransportPlan
    value: float
    row_potentials: np.ndarray
    col_potentials: np.ndarray


class WotSolution(ArrayModel):
    """Frank-Wolfe output for the barycentric problem."""
    plan: TransportPlan
    barycenters: np.ndarray = Field(..., description="b_i, shape (n, d)")
    value: float
    fw_gap: float
    iterations: int
    converged: bool
    tol: float


class Projection(ArrayModel):
    """Projection of mu onto the convex-order ball, with the map that produced it."""
    measure: DiscreteMeasure = Field(..., description="mu_bar, merged atoms")
    sources: np.ndarray = Field(..., description="Atoms x_i of mu")
    images: np.ndarray = Field(..., description="Unmerged images b_i")
    source_weights: np.ndarray
    atom_index: np.ndarray = Field(..., description="Index of the mu_bar atom receiving x_i")


class MaxAffineFunction(ArrayModel):
    """Polyhedral convex function g(y) = max_k (a_k . y + c_k)."""
    slopes: np.ndarray = Field(..., description="a_k, shape (K, d)")
    offsets: np.ndarray = Field(..., description="c_k, shape (K,)")

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """Evaluate at one point (d,) or many points (N, d)."""
        y = np.asarray(y, dtype=float)
        values = np.atleast_2d(y) @ self.slopes.T + self.offsets
        out = values.max(axis=1)
        return out if y.ndim == 2 else float(out[0])

    def active_pieces(self, y: np.ndarray, tol: float = 0.0) -> np.ndarray:
        values = self.slopes @ np.asarray(y, dtype=float) + self.offsets
        return np.flatnonzero(values >= values.max() - tol)


class DualPotential(ArrayModel):
    """Dual objects attached to a barycentric solution."""
    f_circ: MaxAffineFunction = Field(..., description="Convex dual optimizer f°")
    brenier: MaxAffineFunction = Field(..., description="h with x_i in the subdifferential of h at b_i")

    def h(self, y: np.ndarray) -> np.ndarray:
        """h = (f° + |y|^2) / 2."""
        y = np.asarray(y, dtype=float)
        return (self.f_circ.evaluate(y) + np.sum(y * y, axis=-1)) / 2.0


class Q2Evaluation(ArrayModel):
    """Certified bracket of the infimum convolution at one point."""
    lower: float
    upper: float
    minimizer: np.ndarray


class DualCertificate(ArrayModel):
    gap: float
    primal_value: float
    dual_value: float
    q2_values: np.ndarray
    f_on_nu: np.ndarray
    certified: bool


class OrderRelation(str, Enum):
    CONVEX = "ConvexOrder"
    ICX = "IcxOrder"
    STOCHASTIC = "StochasticOrder"


class ViolationRecord(ArrayModel):
    """Where the defining inequality of an order fails."""
    threshold: Optional[float] = Field(default=None, description="Failing t or k, 1D checks")
    amount: float = Field(..., description="Size of the violation")
    separating_function: Optional[MaxAffineFunction] = None


class OrderCertificate(ArrayModel):
    relation: OrderRelation
    holds: bool
    witness: Optional[TransportPlan] = None
    violation: Optional[ViolationRecord] = None
    residual: float = 0.0
    marginal: bool = False


class CheckReport(ArrayModel):
    """Outcome of a structural check; passed iff worst_violation <= tolerance."""
    name: str
    passed: bool
    worst_violation: float
    tolerance: float
    witness: Optional[Dict[str, Any]] = None
    marginal: bool = False


class EqualityReport(CheckReport):
    w2_squared: float
    barycentric_value: float
    projection_distance: Optional[float] = None


class SimplexInstance(ArrayModel):
    """Target measure supported on the vertices of a simplex."""
    vertices: np.ndarray = Field(..., description="y_0..y_k, shape (k+1, d)")
    nu_weights: np.ndarray

    @property
    def barycenter(self) -> np.ndarray:
        return self.nu_weights @ self.vertices


class SimplexProjection(ArrayModel):
    projection: Projection
    value: float
    translation: np.ndarray
    phi_values: np.ndarray
    gradient_error: float


class QpResult(ArrayModel):
    """Solution of min 1/2 x'Px + q'x over the probability simplex."""
    x: np.ndarray
    value: float
    kkt_residual: float
    iterations: int


class LambdaReduction(ArrayModel):
    lam: float
    scaled_measure: DiscreteMeasure
    constant: float


class LambdaSolution(ArrayModel):
    value: float
    plan: TransportPlan
    reduction: Optional[LambdaReduction] = None
    converged: bool = True


class OracleResult(ArrayModel):
    value: float
    plan: np.ndarray


class MeasureFile(BaseModel):
    """JSON schema of a measure file."""
    dim: int
    points: List[List[float]]
    weights: List[float]


class RunConfig(BaseModel):
    """Parsed command-line configuration."""
    subcommand: str
    mu: Optional[str] = None
    nu: Optional[str] = None
    simplex: Optional[str] = None
    solution: Optional[str] = None
    relation: str = "convex"
    lam: Optional[float] = None
    tol: Optional[float] = Field(default=None, gt=0)
    max_iters: Optional[int] = Field(default=None, gt=0)
    seed: int = 0
    output: Optional[str] = None
    format: str = "json"
    start: str = "product"
    plain_fw: bool = False
