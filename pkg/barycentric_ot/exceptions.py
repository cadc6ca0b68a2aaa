"""
Exception hierarchy.
Class names match the error names reported on the command line.
"""


class WotError(Exception):
    """Base class for every error raised by the toolkit."""


# --- measures -------------------------------------------------------------

class MeasureError(WotError):
    """Raised when measure data cannot be turned into a valid measure."""


class NonPositiveWeight(MeasureError):
    "A weight is zero or negative."


class DimensionMismatch(MeasureError):
    "Points, weights or measures disagree in length or dimension."


class EmptySupport(MeasureError):
    "No atoms were given."


class NonFiniteEntry(MeasureError):
    "A coordinate or weight is NaN or infinite."


class UnsupportedDimension(MeasureError):
    "The operation is only defined in dimension one."


class MalformedFile(MeasureError):
    "An input file cannot be parsed."


# --- solvers --------------------------------------------------------------

class SolverError(WotError):
    """Raised when a numerical solver cannot produce a trustworthy answer."""


class NumericBreakdown(SolverError):
    "Pivot tolerance exhausted or post-solve residuals out of bounds."


class IterationLimit(SolverError):
    "Iteration budget exhausted."


class NotConverged(SolverError):
    "A converged solution was required."


class NoConvergence(SolverError):
    "Root iteration stalled although a root exists."


# --- geometry -------------------------------------------------------------

class GeometryError(WotError):
    pass


class DegenerateSimplex(GeometryError):
    "Vertices are not affinely independent."


class BarycenterOnBoundary(GeometryError):
    "Target barycenter is not in the relative interior of the simplex."


# --- certificates ---------------------------------------------------------

class CertificateError(WotError):
    pass


class DegeneratePotentials(CertificateError):
    "A support pair violates the subgradient inequality."


class OutsideDomain(CertificateError):
    "Conjugate is infinite at the evaluation point."


# --- orders ---------------------------------------------------------------

class OrderError(WotError):
    pass


class OrderViolated(OrderError):
    "The measures are not in convex order."


class MapAtomMissing(OrderError):
    "A map image has no matching atom in the kernel's source measure."


class PreconditionIcxFails(OrderError):
    "The increasing convex order precondition does not hold."


# --- costs ----------------------------------------------------------------

class CostError(WotError):
    pass


class NegativeLambda(CostError):
    "The c_lambda family needs lambda >= 0."


class TooLarge(CostError):
    "Instance exceeds the brute-force oracle size cap."
