"""Ripley's K-function estimation and the coverage deviation metric alpha.

The K estimate accumulates, over every ordered pair of distinct key-points,
an indicator that the pair distance is within radius r, weighted against
border effects and scaled by area/N^2. Under complete spatial randomness
the expectation is pi*r^2, so the summed absolute gap between the estimate
and pi*r^2 over a radius grid measures how far a point set is from even
coverage: 0 is ideal, large values indicate clustering.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPointsError
from .pointset import FeatureSet, Point2, Region

__all__ = [
    "EdgeCorrection",
    "RadiusGrid",
    "KProfile",
    "edge_weight",
    "k_theoretical",
    "k_estimate",
    "profile_alpha",
    "coverage_alpha",
]

# Divisor floor for the measure-zero configurations (e.g. two points at
# opposite region corners) where the analytic border weight is exactly 0.
_MIN_WEIGHT = 1e-12


class EdgeCorrection(enum.Enum):
    """Border-effect policy for the K estimator."""

    NONE = "none"
    ISOTROPIC = "isotropic"


@dataclass(frozen=True)
class RadiusGrid:
    """Arithmetic radius grid r_min, r_min + delta_r, ... up to r_max (inclusive)."""

    r_min: float
    r_max: float
    delta_r: float

    def __post_init__(self):
        if not (math.isfinite(self.r_min) and self.r_min > 0):
            raise ValueError(f"r_min must be positive and finite, got {self.r_min}")
        if not (math.isfinite(self.r_max) and self.r_max >= self.r_min):
            raise ValueError(f"r_max must be >= r_min, got {self.r_max} < {self.r_min}")
        if not (math.isfinite(self.delta_r) and self.delta_r > 0):
            raise ValueError(f"delta_r must be positive and finite, got {self.delta_r}")

    def radii(self) -> np.ndarray:
        n = int(math.floor((self.r_max - self.r_min) / self.delta_r + 1e-9)) + 1
        return self.r_min + self.delta_r * np.arange(n, dtype=np.float64)

    @classmethod
    def for_region(cls, region: Region, samples: int = 50) -> "RadiusGrid":
        """Default grid: r_max a quarter of the short side, `samples` equal steps."""
        r_max = min(region.width, region.height) / 4.0
        dr = r_max / samples
        return cls(r_min=dr, r_max=r_max, delta_r=dr)


@dataclass(frozen=True, eq=False)
class KProfile:
    """K-function samples over a radius grid, paired with the CSR expectation."""

    radii: np.ndarray
    k_hat: np.ndarray
    k_poisson: np.ndarray

    def __post_init__(self):
        for name in ("radii", "k_hat", "k_poisson"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not (len(self.radii) == len(self.k_hat) == len(self.k_poisson)):
            raise ValueError(
                f"profile columns must have equal length, got "
                f"{len(self.radii)}/{len(self.k_hat)}/{len(self.k_poisson)}"
            )


def _circle_inside_fraction(cx, cy, r, width, height):
    """Fraction of the circumference of circle(center, r) inside the rectangle.

    Accepts scalars or broadcastable arrays. Exact for any radius: each
    border cuts off an exterior arc of 2*arccos(d/r) where d is the border
    distance, and adjacent arcs overlap by exactly their excess over a
    quarter turn whenever the shared corner falls inside the circle.
    """
    dists = (cx, height - cy, width - cx, cy)  # left, top, right, bottom
    with np.errstate(divide="ignore", invalid="ignore"):
        half = [np.arccos(np.minimum(np.asarray(d) / r, 1.0)) for d in dists]
    outside = 2.0 * (half[0] + half[1] + half[2] + half[3])
    quarter = 0.5 * np.pi
    for a, b in ((0, 1), (1, 2), (2, 3), (3, 0)):
        outside = outside - np.maximum(half[a] + half[b] - quarter, 0.0)
    return np.clip(1.0 - outside / (2.0 * np.pi), 0.0, 1.0)


def edge_weight(center: Point2, r: float, region: Region) -> float:
    """Fraction of the circle of radius r around center lying inside the region.

    1 for a fully interior circle, 0.5 for a small circle centered on an
    edge, 0.25 at a corner.
    """
    if not (math.isfinite(r) and r > 0):
        raise ValueError(f"radius must be positive and finite, got {r}")
    if not region.contains(center):
        raise ValueError(f"circle center ({center.x}, {center.y}) must lie inside the region")
    return float(_circle_inside_fraction(center.x, center.y, r, region.width, region.height))


def k_theoretical(grid: RadiusGrid, intensity: float = 1.0) -> np.ndarray:
    """CSR expectation pi*r^2 at each grid radius.

    The default intensity of 1 matches the area/N^2 estimator scaling, under
    which the estimate converges to pi*r^2 for random data; pass a point
    intensity (N/area) to get the literal lambda-scaled curve instead.
    """
    r = grid.radii()
    return intensity * np.pi * r * r


def k_estimate(
    fs: FeatureSet,
    grid: RadiusGrid,
    correction: EdgeCorrection = EdgeCorrection.ISOTROPIC,
    poisson_intensity: float = 1.0,
) -> KProfile:
    """Estimate the K-function of a feature set over a radius grid.

    Every ordered pair (i, j) of distinct features contributes 1/w to each
    radius >= their distance, where w is the inside-fraction of the circle
    around feature i through feature j (1 under EdgeCorrection.NONE), and
    the accumulated totals are scaled by area/N^2. Coincident pairs get
    weight 1 (a zero-radius circle is interior). Summation happens in a
    fixed distance-sorted order, so results are bit-stable.
    """
    n = len(fs)
    if n < 2:
        raise InsufficientPointsError(f"K estimation needs at least 2 points, got {n}")
    radii = grid.radii()
    xy = fs.coords()
    dx = xy[:, 0][:, None] - xy[:, 0][None, :]
    dy = xy[:, 1][:, None] - xy[:, 1][None, :]
    dist = np.hypot(dx, dy)
    off_diag = ~np.eye(n, dtype=bool)

    if correction is EdgeCorrection.ISOTROPIC:
        w = _circle_inside_fraction(
            xy[:, 0][:, None], xy[:, 1][:, None], dist, fs.region.width, fs.region.height
        )
        w = np.where(dist == 0.0, 1.0, w)
        contrib = 1.0 / np.maximum(w, _MIN_WEIGHT)
    else:
        contrib = np.ones_like(dist)

    d_flat = dist[off_diag]
    c_flat = contrib[off_diag]
    order = np.argsort(d_flat, kind="stable")
    d_sorted = d_flat[order]
    cum = np.cumsum(c_flat[order])
    idx = np.searchsorted(d_sorted, radii, side="right")
    totals = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    k_hat = (fs.region.area / (n * n)) * totals
    return KProfile(radii=radii, k_hat=k_hat, k_poisson=k_theoretical(grid, poisson_intensity))


def profile_alpha(profile: KProfile) -> float:
    """Summed absolute deviation of the K estimate from its CSR expectation."""
    return float(np.sum(np.abs(profile.k_hat - profile.k_poisson)))


def coverage_alpha(
    fs: FeatureSet,
    grid: RadiusGrid,
    correction: EdgeCorrection = EdgeCorrection.ISOTROPIC,
    poisson_intensity: float = 1.0,
) -> float:
    """Coverage deviation of a feature set; lower is better, 0 matches CSR exactly."""
    return profile_alpha(k_estimate(fs, grid, correction, poisson_intensity))
