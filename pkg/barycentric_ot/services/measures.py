"""
Discrete measure service.
Validation, deduplication and elementary statistics of finitely supported measures.
"""

import math
from typing import Dict, Tuple
import numpy as np
from scipy.spatial.distance import pdist

from barycentric_ot.exceptions import (
    DimensionMismatch, EmptySupport, NonFiniteEntry, NonPositiveWeight
)
from barycentric_ot.models import DiscreteMeasure


def _as_point_array(raw_points) -> np.ndarray:
    try:
        points = np.asarray(raw_points, dtype=float)
    except ValueError as exc:
        # ragged rows
        raise DimensionMismatch(f"points have inconsistent lengths: {exc}") from exc
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2:
        raise DimensionMismatch(f"points must form an (n, d) array, got shape {points.shape}")
    return points


def _normalize(weights: np.ndarray) -> np.ndarray:
    total = math.fsum(weights)
    if total == 1.0:
        return weights
    weights = weights / total
    # push the rounding residue into the largest weight so fsum is exactly one
    k = int(np.argmax(weights))
    weights[k] += 1.0 - math.fsum(weights)
    return weights


class MeasureService:
    """Builds validated measures and computes their moments."""

    def validate(self, raw_points, raw_weights) -> DiscreteMeasure:
        """
        Build a validated measure from raw coordinates and weights.

        Atoms with bitwise-equal coordinates are merged by summing weights, first
        occurrence order is kept, and weights are rescaled by their exact sum.

        Raises:
            EmptySupport, DimensionMismatch, NonFiniteEntry, NonPositiveWeight
        """
        points = _as_point_array(raw_points)
        weights = np.asarray(raw_weights, dtype=float).reshape(-1)

        if points.shape[0] == 0 or weights.size == 0:
            raise EmptySupport("measure has no atoms")
        if points.shape[0] != weights.size:
            raise DimensionMismatch(
                f"{points.shape[0]} points but {weights.size} weights"
            )
        if points.shape[1] == 0:
            raise DimensionMismatch("points have dimension zero")
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(weights)):
            raise NonFiniteEntry("coordinates and weights must be finite")
        if np.any(weights <= 0.0):
            bad = int(np.flatnonzero(weights <= 0.0)[0])
            raise NonPositiveWeight(f"weight #{bad} is {weights[bad]!r}")

        # +0.0 and -0.0 differ bitwise; canonicalize so they merge
        points = points + 0.0
        merged: Dict[bytes, int] = {}
        keep = []
        mass = []
        for i in range(points.shape[0]):
            key = points[i].tobytes()
            if key in merged:
                mass[merged[key]].append(weights[i])
            else:
                merged[key] = len(keep)
                keep.append(i)
                mass.append([weights[i]])

        new_points = points[keep].copy()
        new_weights = _normalize(np.array([math.fsum(m) for m in mass]))

        new_points.setflags(write=False)
        new_weights.setflags(write=False)
        return DiscreteMeasure(points=new_points, weights=new_weights)

    def barycenter(self, measure: DiscreteMeasure) -> np.ndarray:
        """Mean of the measure, accumulated with compensated summation."""
        w = measure.weights
        return np.array([
            math.fsum(w * measure.points[:, k]) for k in range(measure.dim)
        ])

    def second_moment(self, measure: DiscreteMeasure) -> float:
        squared_norms = np.einsum("ij,ij->i", measure.points, measure.points)
        return math.fsum(measure.weights * squared_norms)

    def variance(self, measure: DiscreteMeasure) -> float:
        mean = self.barycenter(measure)
        return max(self.second_moment(measure) - float(mean @ mean), 0.0)

    def pushforward(self, measure: DiscreteMeasure, images: np.ndarray) -> DiscreteMeasure:
        """Image measure of x_i -> images[i]; coinciding images are merged."""
        images = _as_point_array(images)
        if images.shape[0] != measure.size:
            raise DimensionMismatch(
                f"{images.shape[0]} images for {measure.size} atoms"
            )
        return self.validate(images, measure.weights)

    def diameter(self, measure: DiscreteMeasure) -> float:
        if measure.size < 2:
            return 0.0
        return float(pdist(measure.points).max())

    def merge_close(
        self, points: np.ndarray, weights: np.ndarray, eps: float
    ) -> Tuple[DiscreteMeasure, np.ndarray]:
        """
        Greedily merge atoms closer than eps.

        A merged atom sits at the weighted mean of its members, so the merged
        measure is a convex-order contraction of the input.

        Returns:
            (merged measure, index of the merged atom for every input atom)
        """
        points = _as_point_array(points)
        n = points.shape[0]
        labels = -np.ones(n, dtype=int)
        centers = []
        for i in range(n):
            if labels[i] >= 0:
                continue
            close = np.linalg.norm(points - points[i], axis=1) <= eps
            members = np.flatnonzero(close & (labels < 0))
            labels[members] = len(centers)
            centers.append(members)

        merged_points = np.array([
            np.average(points[m], axis=0, weights=weights[m]) for m in centers
        ])
        merged_weights = np.array([math.fsum(weights[m]) for m in centers])
        measure = self.validate(merged_points, merged_weights)
        # validation keeps order, but two centers may still collide bitwise
        if measure.size != len(centers):
            lookup = {measure.points[k].tobytes(): k for k in range(measure.size)}
            remap = np.array([lookup[(p + 0.0).tobytes()] for p in merged_points])
            labels = remap[labels]
        return measure, labels


# Global measure service instance
measure_service = MeasureService()


def validate_measure(raw_points, raw_weights) -> DiscreteMeasure:
    return measure_service.validate(raw_points, raw_weights)


def barycenter(measure: DiscreteMeasure) -> np.ndarray:
    return measure_service.barycenter(measure)


def second_moment(measure: DiscreteMeasure) -> float:
    return measure_service.second_moment(measure)


def variance(measure: DiscreteMeasure) -> float:
    return measure_service.variance(measure)


def pushforward(measure: DiscreteMeasure, images: np.ndarray) -> DiscreteMeasure:
    return measure_service.pushforward(measure, images)


def scale(measure: DiscreteMeasure, factor: float) -> DiscreteMeasure:
    return pushforward(measure, factor * measure.points)


def translate(measure: DiscreteMeasure, shift: np.ndarray) -> DiscreteMeasure:
    return pushforward(measure, measure.points + np.asarray(shift, dtype=float))


def diameter(measure: DiscreteMeasure) -> float:
    return measure_service.diameter(measure)


def merge_close(
    points: np.ndarray, weights: np.ndarray, eps: float
) -> Tuple[DiscreteMeasure, np.ndarray]:
    return measure_service.merge_close(points, weights, eps)


def same_dimension(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimensions differ: {mu.dim} vs {nu.dim}")
