"""Ellipsoidal keep-out regions and their signed margins.

Margins are quadratic in position, so barrier gradients and Hessians are
analytic; axes listed in ``infinite_axes`` are ignored, which turns an
ellipsoid into an elliptic cylinder or slab.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import ConfigurationError


@dataclass
class Obstacle:
    """Axis-aligned ellipsoidal keep-out region.

    The signed margin of a point p is sum over finite axes of
    ((p_k - c_k)/a_k)^2 - 1: negative inside, zero on the surface.
    """

    center: np.ndarray
    semi_axes: np.ndarray
    infinite_axes: Tuple[int, ...] = ()
    name: str = ""

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.semi_axes = np.asarray(self.semi_axes, dtype=float)
        if self.center.shape != (3,) or self.semi_axes.shape != (3,):
            raise ConfigurationError("obstacle center/semi_axes must be 3-vectors")
        if len(self.infinite_axes) >= 3:
            raise ConfigurationError("obstacle must be finite along at least one axis")
        for k in self.infinite_axes:
            if k not in (0, 1, 2):
                raise ConfigurationError(f"invalid axis index {k}")
        mask = np.ones(3)
        mask[list(self.infinite_axes)] = 0.0
        if np.any((self.semi_axes <= 0.0) & (mask > 0.0)):
            raise ConfigurationError("finite semi-axes must be positive")
        self._inv2 = np.where(mask > 0.0, 1.0 / np.where(self.semi_axes > 0, self.semi_axes, 1.0) ** 2, 0.0)

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "semi_axes": self.semi_axes.tolist(),
            "infinite_axes": list(self.infinite_axes),
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Obstacle":
        return cls(
            center=d["center"],
            semi_axes=d["semi_axes"],
            infinite_axes=tuple(d.get("infinite_axes", ())),
            name=d.get("name", ""),
        )

    def margin_gradient(self, p: np.ndarray) -> np.ndarray:
        """d margin / d p, batched over leading axes."""
        return 2.0 * (np.asarray(p) - self.center) * self._inv2

    def margin_hessian(self) -> np.ndarray:
        """Constant position Hessian of the margin."""
        return np.diag(2.0 * self._inv2)


def obstacle_margin(p: np.ndarray, obs: Obstacle) -> np.ndarray:
    """Signed margin of points (..., 3) with respect to one obstacle."""
    d = np.asarray(p) - obs.center
    return np.sum(d * d * obs._inv2, axis=-1) - 1.0


def min_margin(points: np.ndarray, obstacles) -> float:
    """Smallest margin of any point against any obstacle (inf if none)."""
    best = np.inf
    for obs in obstacles:
        best = min(best, float(np.min(obstacle_margin(points, obs))))
    return best
