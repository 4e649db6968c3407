"""Core geometric types: key-points, rectangular study regions, tile counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = ["Point2", "Region", "FeatureSet", "distance", "grid_counts"]


@dataclass(frozen=True)
class Point2:
    """A 2-D key-point location in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Region:
    """Rectangular study region [0, width] x [0, height], origin pinned at (0, 0)."""

    width: float
    height: float

    def __post_init__(self):
        if not (math.isfinite(self.width) and self.width > 0):
            raise ValueError(f"region width must be positive and finite, got {self.width}")
        if not (math.isfinite(self.height) and self.height > 0):
            raise ValueError(f"region height must be positive and finite, got {self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, p: Point2) -> bool:
        """Boundary-inclusive containment test."""
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height


class FeatureSet:
    """An ordered, immutable collection of key-points inside a region.

    Order matters: index i identifies the same feature throughout the
    pipeline, so selection masks stay aligned with the original file order.
    Coincident locations are allowed (multi-scale detectors emit them);
    deduplication is an explicit caller decision, never implicit.
    """

    __slots__ = ("_points", "_region", "_coords")

    def __init__(self, points: Iterable[Point2], region: Region):
        pts = tuple(points)
        for i, p in enumerate(pts):
            if not region.contains(p):
                raise ValueError(
                    f"point {i} at ({p.x}, {p.y}) lies outside the "
                    f"{region.width} x {region.height} region"
                )
        self._points = pts
        self._region = region
        self._coords = None

    @property
    def points(self) -> tuple[Point2, ...]:
        return self._points

    @property
    def region(self) -> Region:
        return self._region

    def __len__(self) -> int:
        return len(self._points)

    def coords(self) -> np.ndarray:
        """(N, 2) float64 array of the point coordinates (cached, read-only)."""
        if self._coords is None:
            if self._points:
                arr = np.array([(p.x, p.y) for p in self._points], dtype=np.float64)
            else:
                arr = np.empty((0, 2), dtype=np.float64)
            arr.setflags(write=False)
            self._coords = arr
        return self._coords

    def subset(self, mask: Sequence[bool]) -> "FeatureSet":
        """The features where mask is true, original order preserved."""
        if len(mask) != len(self._points):
            raise ValueError(f"mask length {len(mask)} != feature count {len(self._points)}")
        return FeatureSet((p for p, keep in zip(self._points, mask) if keep), self._region)

    def __repr__(self) -> str:
        return f"FeatureSet(n={len(self)}, region={self._region.width}x{self._region.height})"


def distance(p: Point2, q: Point2) -> float:
    """Euclidean distance between two points."""
    return math.hypot(p.x - q.x, p.y - q.y)


def grid_counts(fs: FeatureSet, nx: int = 4, ny: int = 4) -> np.ndarray:
    """Count features per tile of an nx-by-ny partition of the region.

    Returns an (ny, nx) integer matrix where entry [iy, ix] counts the
    points in tile column ix, row iy. A point on an interior tile boundary
    belongs to the higher-index tile, and the far edges of the region
    belong to the last tile, so every point lands in exactly one tile and
    the matrix sums to len(fs).
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"tile counts must be >= 1, got {nx} x {ny}")
    counts = np.zeros((ny, nx), dtype=np.int64)
    if len(fs) == 0:
        return counts
    xy = fs.coords()
    ix = np.minimum(np.floor(xy[:, 0] * nx / fs.region.width).astype(np.int64), nx - 1)
    iy = np.minimum(np.floor(xy[:, 1] * ny / fs.region.height).astype(np.int64), ny - 1)
    np.add.at(counts, (iy, ix), 1)
    return counts
