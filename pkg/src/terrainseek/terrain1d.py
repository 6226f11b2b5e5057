"""1.5D terrain: an x-monotone piecewise-linear height function.

The terrain continues flat beyond both ends at the boundary heights, which
emulates a total height function at desk scale. Construction normalizes the
input so that the start point (0, 0) lies on the surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .geom import EPS_GEOM, Point2


class TerrainError(ValueError):
    pass


class PointBelowTerrain(TerrainError):
    """A visibility query point lies strictly below the surface."""


class Terrain1D:
    """Piecewise-linear terrain with a vertex at (0, 0).

    ``origin_x`` names the surface point of the *input* coordinates that
    becomes the origin: the constructor inserts a vertex there (interpolated
    if absent) and translates so that vertex is exactly (0, 0).
    """

    def __init__(self, vertices: Sequence[Tuple[float, float]], origin_x: float = 0.0):
        pts = [(float(x), float(h)) for x, h in vertices]
        if len(pts) < 1:
            raise TerrainError("terrain needs at least one vertex")
        xs = np.array([p[0] for p in pts], dtype=float)
        hs = np.array([p[1] for p in pts], dtype=float)
        if not (np.isfinite(xs).all() and np.isfinite(hs).all()):
            raise TerrainError("non-finite terrain vertex")
        gaps = np.diff(xs)
        scale = max(1.0, float(np.abs(xs).max()))
        if len(xs) > 1 and not (gaps > EPS_GEOM * scale).all():
            raise TerrainError("vertex x-coordinates must be strictly increasing")

        h0 = float(np.interp(origin_x, xs, hs))
        xs = xs - origin_x
        hs = hs - h0
        if not (xs == 0.0).any():
            idx = int(np.searchsorted(xs, 0.0))
            xs = np.insert(xs, idx, 0.0)
            hs = np.insert(hs, idx, 0.0)
        else:
            hs[xs == 0.0] = 0.0

        self._xs = xs
        self._hs = hs

    @property
    def xs(self) -> np.ndarray:
        return self._xs

    @property
    def hs(self) -> np.ndarray:
        return self._hs

    @property
    def vertices(self) -> List[Point2]:
        return [Point2(float(x), float(h)) for x, h in zip(self._xs, self._hs)]

    def height_at(self, x):
        """Piecewise-linear height; flat extension outside the vertex range.

        Accepts scalars or arrays.
        """
        out = np.interp(x, self._xs, self._hs)
        if np.isscalar(x) or np.ndim(x) == 0:
            return float(out)
        return out

    def x_span(self) -> Tuple[float, float]:
        return float(self._xs[0]), float(self._xs[-1])

    def peaks(self) -> List[Point2]:
        """Local maxima, sorted by x.

        A maximal run of equal-height vertices counts as a peak when both
        outer neighbors are strictly lower; both run endpoints are reported.
        The flat extension beyond the ends counts as an equal-height neighbor,
        so boundary runs never qualify.
        """
        xs, hs = self._xs, self._hs
        n = len(xs)
        out: List[Point2] = []
        i = 0
        while i < n:
            j = i
            while j + 1 < n and hs[j + 1] == hs[i]:
                j += 1
            left_ok = i > 0 and hs[i - 1] < hs[i]
            right_ok = j < n - 1 and hs[j + 1] < hs[i]
            if left_ok and right_ok:
                out.append(Point2(float(xs[i]), float(hs[i])))
                if j != i:
                    out.append(Point2(float(xs[j]), float(hs[j])))
            i = j + 1
        return out

    def _assert_above(self, p: Point2, tol: float) -> None:
        if p.y < self.height_at(p.x) - tol:
            raise PointBelowTerrain(f"({p.x}, {p.y}) is below the terrain")

    def sees(self, q: Point2, t: Point2) -> bool:
        """True iff the segment qt does not properly intersect the terrain.

        Touching the surface does not block, so the vertical ray above any
        surface point is always visible. Both endpoints must be on or above
        the surface. For such endpoints the difference (terrain - chord) is
        piecewise linear with breakpoints only at terrain vertices, so it
        suffices to test the vertices strictly between the two x-coordinates.
        """
        scale = max(1.0, abs(q.x), abs(q.y), abs(t.x), abs(t.y))
        tol = EPS_GEOM * scale
        self._assert_above(q, tol)
        self._assert_above(t, tol)
        x_lo, x_hi = (q.x, t.x) if q.x <= t.x else (t.x, q.x)
        if x_hi - x_lo <= tol:
            return True
        lo = int(np.searchsorted(self._xs, x_lo, side="right"))
        hi = int(np.searchsorted(self._xs, x_hi, side="left"))
        if lo >= hi:
            return True
        vx = self._xs[lo:hi]
        vh = self._hs[lo:hi]
        # chord height at the vertex x's
        cy = q.y + (t.y - q.y) * (vx - q.x) / (t.x - q.x)
        return bool((vh <= cy + tol).all())

    def segment_blocked(self, q: Point2, t: Point2) -> bool:
        """sees() complement without the above-surface precondition on t.

        Used for geodesic feet that may land anywhere; a chord ending below
        the surface is caught by the same vertex test plus an endpoint check.
        """
        scale = max(1.0, abs(q.x), abs(q.y), abs(t.x), abs(t.y))
        tol = EPS_GEOM * scale
        if t.y < self.height_at(t.x) - tol or q.y < self.height_at(q.x) - tol:
            return True
        x_lo, x_hi = (q.x, t.x) if q.x <= t.x else (t.x, q.x)
        if x_hi - x_lo <= tol:
            return False
        lo = int(np.searchsorted(self._xs, x_lo, side="right"))
        hi = int(np.searchsorted(self._xs, x_hi, side="left"))
        if lo >= hi:
            return False
        vx = self._xs[lo:hi]
        vh = self._hs[lo:hi]
        cy = q.y + (t.y - q.y) * (vx - q.x) / (t.x - q.x)
        return bool((vh > cy + tol).any())


@dataclass(frozen=True)
class Target1D:
    """A target point on the terrain surface."""

    position: Point2

    @staticmethod
    def on_surface(terrain: Terrain1D, x: float) -> "Target1D":
        return Target1D(Point2(float(x), terrain.height_at(float(x))))

    def validate(self, terrain: Terrain1D) -> None:
        h = terrain.height_at(self.position.x)
        scale = max(1.0, abs(self.position.x), abs(h))
        if abs(self.position.y - h) > EPS_GEOM * scale:
            raise TerrainError("target is not on the terrain surface")


def sees_dense_oracle(terrain: Terrain1D, q: Point2, t: Point2, samples: int = 10_000) -> bool:
    """Brute-force visibility check by dense sampling of the open chord.

    Independent of :meth:`Terrain1D.sees`; used to cross-validate it.
    """
    u = (np.arange(samples) + 0.5) / samples
    x = q.x + (t.x - q.x) * u
    y = q.y + (t.y - q.y) * u
    h = terrain.height_at(x)
    scale = max(1.0, abs(q.x), abs(q.y), abs(t.x), abs(t.y))
    return bool((y >= h - 1e-7 * scale).all())
