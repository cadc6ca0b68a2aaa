"""
Shared fixtures: canonical small instances and seeded random instance factories.
"""

import numpy as np
import pytest
from scipy.stats import norm

from barycentric_ot.models import DiscreteMeasure
from barycentric_ot.services.measures import validate_measure


def measure(points, weights) -> DiscreteMeasure:
    return validate_measure(points, weights)


def random_measure(rng: np.random.Generator, n: int, d: int, loc: float = 0.0, spread: float = 1.0) -> DiscreteMeasure:
    points = loc + spread * rng.standard_normal((n, d))
    return validate_measure(points, rng.dirichlet(np.ones(n)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def two_atoms():
    """mu = {0: 1/2, 1: 1/2}, nu = {0: 1/2, 2: 1/2}; T2 = 0.25 with b = (0.5, 1.5)."""
    return measure([[0.0], [1.0]], [0.5, 0.5]), measure([[0.0], [2.0]], [0.5, 0.5])


@pytest.fixture
def symmetric_pair():
    """delta_0 and {-1: 1/2, 1: 1/2}."""
    return measure([[0.0]], [1.0]), measure([[-1.0], [1.0]], [0.5, 0.5])


@pytest.fixture
def shifted_pair():
    """delta_0.5 and {-1: 1/2, 1: 1/2}: only one coupling exists."""
    return measure([[0.5]], [1.0]), measure([[-1.0], [1.0]], [0.5, 0.5])


@pytest.fixture
def triangle():
    return measure([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [1 / 3, 1 / 3, 1 / 3])


@pytest.fixture
def write_csv(tmp_path):
    """Write a measure as CSV rows (coordinates..., weight) and return the path."""
    def _write(name, points, weights, header=True):
        path = tmp_path / name
        lines = []
        if header:
            d = len(points[0])
            lines.append(",".join([f"x{k}" for k in range(d)] + ["weight"]))
        for p, w in zip(points, weights):
            lines.append(",".join(repr(float(c)) for c in p) + f",{float(w)!r}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)
    return _write


def discretized_gaussian(k: int, d: int) -> DiscreteMeasure:
    """Product grid of standard normal quantiles, uniform weights."""
    axis = norm.ppf((np.arange(k) + 0.5) / k)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return validate_measure(grid, np.full(grid.shape[0], 1.0 / grid.shape[0]))
