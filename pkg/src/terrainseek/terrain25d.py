"""2.5D terrain: a bilinear raster height field.

The bilinear patch makes the maximum slope analytic: each gradient component
is affine in one coordinate, so the per-cell maximum gradient norm is
attained at a cell corner and the global Lipschitz constant is an exact max
over cell corners. Outside the raster the boundary values extend flat.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from .geom import EPS_GEOM, Point3
from .terrain1d import PointBelowTerrain, TerrainError


class Terrain25D:
    """Raster heights H[row, col] at world (ox + col*spacing, oy + row*spacing).

    Construction normalizes heights so that T(0, 0) = 0; the point (0, 0)
    must lie inside the raster.
    """

    def __init__(self, heights, spacing: float, origin: Tuple[float, float] = (0.0, 0.0),
                 normalize: bool = True):
        H = np.array(heights, dtype=float)
        if H.ndim != 2 or H.shape[0] < 2 or H.shape[1] < 2:
            raise TerrainError("raster must be at least 2x2")
        if not np.isfinite(H).all():
            raise TerrainError("non-finite raster height")
        if not (spacing > 0 and math.isfinite(spacing)):
            raise TerrainError("spacing must be positive")
        self.H = H
        self.spacing = float(spacing)
        self.ox, self.oy = float(origin[0]), float(origin[1])
        self.ny, self.nx = H.shape
        if normalize:
            if not (self.ox <= 0.0 <= self.ox + (self.nx - 1) * self.spacing
                    and self.oy <= 0.0 <= self.oy + (self.ny - 1) * self.spacing):
                raise TerrainError("origin (0,0) must lie inside the raster")
            self.H = H - self._height_at_raw(0.0, 0.0)
        self._lipschitz: Optional[float] = None

    # -- queries -----------------------------------------------------------

    def _height_at_raw(self, x, y):
        h = self.spacing
        u = (np.asarray(x, dtype=float) - self.ox) / h
        v = (np.asarray(y, dtype=float) - self.oy) / h
        i = np.clip(np.floor(u).astype(np.int64), 0, self.nx - 2)
        j = np.clip(np.floor(v).astype(np.int64), 0, self.ny - 2)
        fu = np.clip(u - i, 0.0, 1.0)
        fv = np.clip(v - j, 0.0, 1.0)
        H = self.H
        out = (H[j, i] * (1 - fu) * (1 - fv) + H[j, i + 1] * fu * (1 - fv)
               + H[j + 1, i] * (1 - fu) * fv + H[j + 1, i + 1] * fu * fv)
        return out

    def height_at(self, x, y):
        """Bilinear height; flat extension outside the raster. Vectorized."""
        out = self._height_at_raw(x, y)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def world_bounds(self) -> Tuple[float, float, float, float]:
        return (self.ox, self.ox + (self.nx - 1) * self.spacing,
                self.oy, self.oy + (self.ny - 1) * self.spacing)

    def lipschitz(self) -> float:
        """Exact maximum slope of the bilinear surface (cell-corner max)."""
        if self._lipschitz is None:
            H = self.H
            b = H[:-1, 1:] - H[:-1, :-1]
            c = H[1:, :-1] - H[:-1, :-1]
            d = H[1:, 1:] - H[1:, :-1] - H[:-1, 1:] + H[:-1, :-1]
            gx0, gx1 = b, b + d
            gy0, gy1 = c, c + d
            m = np.sqrt(np.maximum.reduce([
                gx0 * gx0 + gy0 * gy0,
                gx0 * gx0 + gy1 * gy1,
                gx1 * gx1 + gy0 * gy0,
                gx1 * gx1 + gy1 * gy1,
            ]))
            self._lipschitz = float(m.max()) / self.spacing
        return self._lipschitz

    def node_gradient(self, col: int, row: int) -> Tuple[float, float]:
        """Forward-difference gradient at a raster node (for tests)."""
        h = self.spacing
        H = self.H
        gx = (H[row, min(col + 1, self.nx - 1)] - H[row, col]) / h
        gy = (H[min(row + 1, self.ny - 1), col] - H[row, col]) / h
        return (float(gx), float(gy))

    # -- visibility ---------------------------------------------------------

    def _assert_above(self, p: Point3, tol: float) -> None:
        if p.z < self.height_at(p.x, p.y) - tol:
            raise PointBelowTerrain(f"({p.x}, {p.y}, {p.z}) is below the terrain")

    def sees3d(self, q: Point3, t: Point3, step: Optional[float] = None) -> bool:
        """Sampled line-of-sight: every sample of the open segment must be at
        or above the terrain (within tolerance). Default step: spacing/4."""
        if step is None:
            step = self.spacing / 4.0
        scale = max(1.0, abs(q.x), abs(q.y), abs(q.z), abs(t.x), abs(t.y), abs(t.z))
        tol = EPS_GEOM * scale
        self._assert_above(q, tol)
        self._assert_above(t, tol)
        length = q.dist(t)
        if length <= tol:
            return True
        m = max(2, int(math.ceil(length / step)))
        u = (np.arange(m) + 0.5) / m
        x = q.x + (t.x - q.x) * u
        y = q.y + (t.y - q.y) * u
        z = q.z + (t.z - q.z) * u
        hgt = self._height_at_raw(x, y)
        return bool((z >= hgt - tol).all())

    def sees3d_batch(self, pts: np.ndarray, t: Point3, step: Optional[float] = None,
                     cascade: bool = True, chunk: int = 4096) -> np.ndarray:
        """Vectorized sees3d for many query points toward one target.

        A coarse-to-fine cascade is sound: testing fewer samples can only
        miss blockers, so coarse invisibility (a sample below the terrain) is
        a definitive witness and only coarse-visible points are re-tested at
        the fine step.
        """
        if step is None:
            step = self.spacing / 4.0
        P = np.asarray(pts, dtype=float)
        if P.ndim != 2 or P.shape[1] != 3:
            raise TerrainError("pts must be (N, 3)")
        n = len(P)
        scale = max(1.0, float(np.abs(P).max(initial=0.0)), abs(t.x), abs(t.y), abs(t.z))
        tol = EPS_GEOM * scale
        visible = np.zeros(n, dtype=bool)
        alive = np.arange(n)
        steps = [16.0 * step, 4.0 * step, step] if cascade else [step]
        tv = np.array([t.x, t.y, t.z])
        for st in steps:
            if len(alive) == 0:
                break
            next_alive = []
            for lo in range(0, len(alive), chunk):
                idx = alive[lo:lo + chunk]
                Q = P[idx]
                d = tv[None, :] - Q
                lens = np.sqrt((d * d).sum(axis=1))
                m = max(2, int(math.ceil(float(lens.max()) / st)))
                u = (np.arange(m) + 0.5) / m
                x = Q[:, 0:1] + d[:, 0:1] * u[None, :]
                y = Q[:, 1:2] + d[:, 1:2] * u[None, :]
                z = Q[:, 2:3] + d[:, 2:3] * u[None, :]
                hgt = self._height_at_raw(x.ravel(), y.ravel()).reshape(x.shape)
                ok = (z >= hgt - tol).all(axis=1)
                next_alive.append(idx[ok])
            alive = np.concatenate(next_alive) if next_alive else np.array([], dtype=np.int64)
        visible[alive] = True
        return visible

    # -- rectangle minima ---------------------------------------------------

    def min_height_in_rect(self, x0: float, x1: float, y0: float, y1: float) -> float:
        """Exact minimum of the bilinear surface over a closed axis-aligned rect.

        The minimum over a sub-rectangle of a bilinear patch is attained on
        its boundary, and along an axis-aligned edge the per-cell restriction
        is linear, so raster nodes inside the rect, the rect corners, and the
        rect-edge/raster-line crossing points cover all candidates exactly.
        """
        if not (x1 >= x0 and y1 >= y0 and all(map(math.isfinite, (x0, x1, y0, y1)))):
            raise TerrainError("invalid rectangle")
        h = self.spacing
        best = float("inf")
        # rect corners
        cx = np.array([x0, x1, x0, x1])
        cy = np.array([y0, y0, y1, y1])
        best = min(best, float(self._height_at_raw(cx, cy).min()))
        # raster nodes inside (closed)
        i0 = max(0, int(math.ceil((x0 - self.ox) / h - 1e-12)))
        i1 = min(self.nx - 1, int(math.floor((x1 - self.ox) / h + 1e-12)))
        j0 = max(0, int(math.ceil((y0 - self.oy) / h - 1e-12)))
        j1 = min(self.ny - 1, int(math.floor((y1 - self.oy) / h + 1e-12)))
        if i0 <= i1 and j0 <= j1:
            best = min(best, float(self.H[j0:j1 + 1, i0:i1 + 1].min()))
        # rect edge / raster line crossings
        xs_in = self.ox + h * np.arange(i0, i1 + 1) if i0 <= i1 else np.empty(0)
        ys_in = self.oy + h * np.arange(j0, j1 + 1) if j0 <= j1 else np.empty(0)
        if len(xs_in):
            for ye in (y0, y1):
                best = min(best, float(self._height_at_raw(xs_in, np.full(len(xs_in), ye)).min()))
        if len(ys_in):
            for xe in (x0, x1):
                best = min(best, float(self._height_at_raw(np.full(len(ys_in), xe), ys_in).min()))
        return best
