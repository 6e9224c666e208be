# Error functionals between a tabulated estimate and a reference density:
# integrated squared error, L1 distance, and Hellinger distance, all on a
# shared grid via the trapezoid rule.

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import Grid, GridDensity

__all__ = ["DensityPair", "ise", "l1_distance", "hellinger_distance"]


@dataclass(frozen=True)
class DensityPair:
    """An estimate and a reference tabulated on one common grid.

    The reference must be nonnegative; the estimate may dip below zero
    (some baseline estimators do), which ise and l1_distance tolerate but
    hellinger_distance rejects.
    """

    estimate: GridDensity
    truth: GridDensity

    def __post_init__(self):
        if self.estimate.grid != self.truth.grid:
            raise ValueError("estimate and truth must share one grid")
        if np.any(self.truth.values < 0):
            raise ValueError("truth values must be nonnegative")

    @classmethod
    def from_callable(
        cls, estimate: GridDensity, pdf: Callable[[np.ndarray], np.ndarray]
    ) -> "DensityPair":
        values = np.asarray(pdf(estimate.grid.points), dtype=float)
        return cls(estimate, GridDensity(estimate.grid, values))

    @property
    def grid(self) -> Grid:
        return self.estimate.grid


def ise(pair: DensityPair) -> float:
    """Integrated squared error of the estimate against the reference."""
    diff = pair.estimate.values - pair.truth.values
    return float(pair.grid.trapezoid_weights @ (diff * diff))


def l1_distance(pair: DensityPair) -> float:
    """Integrated absolute difference; at most 2 for two densities."""
    diff = np.abs(pair.estimate.values - pair.truth.values)
    return float(pair.grid.trapezoid_weights @ diff)


def hellinger_distance(pair: DensityPair) -> float:
    """L2 distance between square roots; at most sqrt(2) for densities."""
    if np.any(pair.estimate.values < 0):
        raise ValueError("hellinger_distance requires nonnegative estimates")
    diff = np.sqrt(pair.estimate.values) - np.sqrt(pair.truth.values)
    return float(np.sqrt(pair.grid.trapezoid_weights @ (diff * diff)))
