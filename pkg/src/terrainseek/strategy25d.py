"""Grid-ladder search over a 2.5D terrain with known maximum slope.

The path alternates vertical ascents with horizontal sweeps of square grids
centered above the start. Grid side doubles each round while the cell count
stays fixed at (2k+1)^2 with the smallest k such that 2k+1 >= 4*sqrt(2*lambda);
each sweep tours the 4-connected component of eligible cells around the
center cell via a doubled spanning-tree walk. Terrain may force the height up
during a sweep; it never comes back down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import BudgetExceeded, DegenerateFlat, DisconnectedInput, InvalidParam
from .geom import EPS_GEOM, Point3, Polyline, first_param_between
from .terrain25d import Terrain25D

Cell = Tuple[int, int]  # (row, col)


@dataclass(frozen=True)
class GridSpec:
    """Geometry of one horizontal search grid of half-length x."""

    x: float
    k: int
    cells_per_side: int
    cell_side: float
    height: float            # exact construction height (2x - eps0)*sqrt(lambda)
    nominal_height: float    # the simplified 2x*sqrt(lambda)

    def cell_rect(self, cell: Cell) -> Tuple[float, float, float, float]:
        r, c = cell
        x0 = -self.x + c * self.cell_side
        y0 = -self.x + r * self.cell_side
        return (x0, x0 + self.cell_side, y0, y0 + self.cell_side)

    def cell_center(self, cell: Cell) -> Tuple[float, float]:
        r, c = cell
        return (-self.x + (c + 0.5) * self.cell_side,
                -self.x + (r + 0.5) * self.cell_side)

    @property
    def center_cell(self) -> Cell:
        return (self.k, self.k)


def grid_spec(lam: float, x: float, eps0: float) -> GridSpec:
    """Smallest admissible grid: 2k+1 >= 4*sqrt(2*lambda)."""
    if not (lam > 0 and math.isfinite(lam)):
        raise InvalidParam("lambda must be positive and finite")
    if not (x >= eps0 > 0):
        raise InvalidParam("need x >= eps0 > 0")
    target = 4.0 * math.sqrt(2.0 * lam)
    k = max(0, math.ceil((target - 1.0) / 2.0))
    cps = 2 * k + 1
    return GridSpec(
        x=x, k=k, cells_per_side=cps,
        cell_side=2.0 * x / cps,
        height=(2.0 * x - eps0) * math.sqrt(lam),
        nominal_height=2.0 * x * math.sqrt(lam),
    )


def cell_minima(terrain: Terrain25D, g: GridSpec) -> np.ndarray:
    """Exact per-cell terrain minima for all grid cells, vectorized.

    Same candidate set as Terrain25D.min_height_in_rect applied to the grid
    partition: raster nodes inside each cell, cell corners, and cell-boundary
    crossings with raster lines.
    """
    n = g.cells_per_side
    bx = -g.x + g.cell_side * np.arange(n + 1)
    h = terrain.spacing
    mins = np.full((n, n), np.inf)

    # cell corners (shared lattice of boundary intersections)
    XX, YY = np.meshgrid(bx, bx)
    corner_h = terrain.height_at(XX.ravel(), YY.ravel()).reshape(n + 1, n + 1)
    c4 = np.minimum.reduce([corner_h[:-1, :-1], corner_h[:-1, 1:],
                            corner_h[1:, :-1], corner_h[1:, 1:]])
    mins = np.minimum(mins, c4)

    # raster nodes strictly inside the grid extent, bucketed into cells
    node_x = terrain.ox + h * np.arange(terrain.nx)
    node_y = terrain.oy + h * np.arange(terrain.ny)
    mx = (node_x >= bx[0]) & (node_x <= bx[-1])
    my = (node_y >= bx[0]) & (node_y <= bx[-1])
    nxs = node_x[mx]
    nys = node_y[my]
    if len(nxs) and len(nys):
        ci = np.clip(np.searchsorted(bx, nxs, side="right") - 1, 0, n - 1)
        cj = np.clip(np.searchsorted(bx, nys, side="right") - 1, 0, n - 1)
        sub = terrain.H[np.ix_(my, mx)]
        # scatter-min into cells
        flat = cj[:, None] * n + ci[None, :]
        acc = np.full(n * n, np.inf)
        np.minimum.at(acc, flat.ravel(), sub.ravel())
        mins = np.minimum(mins, acc.reshape(n, n))

    # crossings of vertical cell lines x=bx[i] with horizontal raster lines
    if len(nys):
        for i in range(n + 1):
            hv = terrain.height_at(np.full(len(nys), bx[i]), nys)
            acc = np.full(n, np.inf)
            np.minimum.at(acc, np.clip(np.searchsorted(bx, nys, side="right") - 1, 0, n - 1), hv)
            if i > 0:
                mins[:, i - 1] = np.minimum(mins[:, i - 1], acc)
            if i < n:
                mins[:, i] = np.minimum(mins[:, i], acc)
    # crossings of horizontal cell lines y=bx[j] with vertical raster lines
    if len(nxs):
        for j in range(n + 1):
            hv = terrain.height_at(nxs, np.full(len(nxs), bx[j]))
            acc = np.full(n, np.inf)
            np.minimum.at(acc, np.clip(np.searchsorted(bx, nxs, side="right") - 1, 0, n - 1), hv)
            if j > 0:
                mins[j - 1, :] = np.minimum(mins[j - 1, :], acc)
            if j < n:
                mins[j, :] = np.minimum(mins[j, :], acc)
    return mins


def eligible_component(terrain: Terrain25D, g: GridSpec) -> Set[Cell]:
    """4-connected component of eligible cells containing the center cell.

    A cell is eligible when some point of it has height at most the grid
    height (closed comparison, guarded by tolerance).
    """
    mins = cell_minima(terrain, g)
    tol = EPS_GEOM * max(1.0, abs(g.height))
    elig = mins <= g.height + tol
    n = g.cells_per_side
    c0 = g.center_cell
    if not elig[c0]:
        elig[c0] = True  # the start cell is always eligible (T(0,0) = 0)
    comp: Set[Cell] = set()
    stack = [c0]
    while stack:
        cell = stack.pop()
        if cell in comp:
            continue
        r, c = cell
        if not (0 <= r < n and 0 <= c < n) or not elig[r, c]:
            continue
        comp.add(cell)
        stack.extend([(r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)])
    return comp


def _tour_cells(cells: Set[Cell], start: Cell) -> List[Cell]:
    """Doubled spanning-tree walk: DFS from the start with deterministic
    neighbor order, emitting every arrival (so each tree edge appears twice)
    and ending back at the start."""
    if start not in cells:
        raise DisconnectedInput("start cell not in the component")
    order = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    seen = {start}
    walk = [start]

    def visit(cell: Cell) -> None:
        r, c = cell
        for dr, dc in order:
            nxt = (r + dr, c + dc)
            if nxt in cells and nxt not in seen:
                seen.add(nxt)
                walk.append(nxt)
                visit(nxt)
                walk.append(cell)

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, len(cells) * 2 + 100))
    try:
        visit(start)
    finally:
        sys.setrecursionlimit(old)
    if len(seen) != len(cells):
        raise DisconnectedInput("cell set is not 4-connected")
    return walk


def component_tour(cells: Set[Cell], g: GridSpec) -> List[Tuple[float, float]]:
    """Ordered cell-center tour of the component (starts and ends at the
    center cell); total horizontal length is 2*(|cells|-1)*cell_side."""
    walk = _tour_cells(set(cells), g.center_cell)
    return [g.cell_center(c) for c in walk]


@dataclass(frozen=True)
class StrategySpec25D:
    eps0: float = 0.02
    budget: float = 1e6
    lift_divisor: float = 8.0      # lift sampling step = cell_side / lift_divisor
    test_divisor: float = 4.0      # visibility test spacing = cell_side / test_divisor
    sees_step: Optional[float] = None  # sees3d sampling step; default spacing/4

    def __post_init__(self):
        if not (self.eps0 > 0 and self.budget > 0):
            raise InvalidParam("eps0 and budget must be positive")


@dataclass(frozen=True)
class SearchEvent3D:
    kind: str
    arclen: float
    point: Point3
    payload: Optional[tuple] = None


@dataclass(frozen=True)
class GridStats:
    x: float
    k: int
    cells_per_side: int
    cell_side: float
    height: float
    component_size: int
    tour_horizontal: float
    vertical_lift: float
    z_end: float


@dataclass
class SearchPath3D:
    polyline: Polyline
    events: List[SearchEvent3D]
    total_length: float
    stop_point: Optional[Point3]
    stopped: bool
    grids: List[GridStats]
    lam: float
    spec: StrategySpec25D


class _Builder3D:
    def __init__(self, budget: float):
        self.pts: List[Point3] = [Point3(0.0, 0.0, 0.0)]
        self.arc: List[float] = [0.0]
        self.budget = budget

    @property
    def total(self) -> float:
        return self.arc[-1]

    def add(self, q: Point3) -> None:
        p = self.pts[-1]
        d = p.dist(q)
        if d <= 0.0:
            return
        if self.arc[-1] + d > self.budget:
            raise BudgetExceeded("arc-length budget exhausted in 2.5D search",
                                 partial=(self.pts, self.arc))
        self.pts.append(q)
        self.arc.append(self.arc[-1] + d)


def _move_with_lift(terrain: Terrain25D, b: _Builder3D, bx: float, by: float,
                    step: float) -> float:
    """Horizontal move to (bx, by) lifting over the terrain; z never drops.

    Sampled at ``step`` with bisection refinement of each lift onset; returns
    the vertical gain."""
    p = b.pts[-1]
    ax, ay, z = p.x, p.y, p.z
    length = math.hypot(bx - ax, by - ay)
    if length <= 0:
        return 0.0
    m = max(1, int(math.ceil(length / step)))
    u = np.arange(1, m + 1) / m
    hx = ax + (bx - ax) * u
    hy = ay + (by - ay) * u
    hts = terrain._height_at_raw(hx, hy)
    tol = EPS_GEOM * max(1.0, abs(z), float(np.abs(hts).max(initial=0.0)))
    z0 = z
    rising = False
    prev_u = 0.0
    for i in range(m):
        hi_val = float(hts[i])
        if hi_val > z + tol:
            if not rising:
                # refine the onset between prev_u and u[i]
                lo_u, hi_u = prev_u, float(u[i])
                for _ in range(40):
                    mid = 0.5 * (lo_u + hi_u)
                    hm = terrain.height_at(ax + (bx - ax) * mid, ay + (by - ay) * mid)
                    if hm > z + tol:
                        hi_u = mid
                    else:
                        lo_u = mid
                b.add(Point3(ax + (bx - ax) * lo_u, ay + (by - ay) * lo_u, z))
                rising = True
            z = hi_val
            b.add(Point3(float(hx[i]), float(hy[i]), z))
        else:
            rising = False
        prev_u = float(u[i])
    b.add(Point3(bx, by, z))
    return z - z0


def build_path_25d(terrain: Terrain25D, spec: StrategySpec25D, t: Point3,
                   lam_override: Optional[float] = None) -> SearchPath3D:
    """Run the grid-ladder search until the target is visible.

    The terrain's computed Lipschitz constant drives the construction unless
    ``lam_override`` is given (experiments only). Raises DegenerateFlat when
    the terrain has no slope and BudgetExceeded when the budget runs out.
    """
    lam = terrain.lipschitz() if lam_override is None else float(lam_override)
    if lam <= 1e-12:
        raise DegenerateFlat("flat terrain: the grid strategy needs lambda > 0")
    scale = max(1.0, abs(t.x), abs(t.y), abs(t.z))
    if abs(terrain.height_at(t.x, t.y) - t.z) > 1e-6 * scale:
        raise InvalidParam("target must lie on the terrain surface")
    sees_step = spec.sees_step if spec.sees_step is not None else terrain.spacing / 4.0

    b = _Builder3D(spec.budget)
    events: List[SearchEvent3D] = []
    grids: List[GridStats] = []

    def emit(kind: str, payload: Optional[tuple] = None) -> None:
        events.append(SearchEvent3D(kind, b.total, b.pts[-1], payload))

    def finish(stop_point: Optional[Point3]) -> SearchPath3D:
        if stop_point is not None:
            events.append(SearchEvent3D("stop", b.total, stop_point))
        return SearchPath3D(Polyline(b.pts), events, b.total, stop_point,
                            stop_point is not None, grids, lam, spec)

    def seen_from(p: Point3) -> bool:
        return terrain.sees3d(p, t, step=sees_step)

    j = 0
    while True:
        x = spec.eps0 * (2.0 ** j)
        g = grid_spec(lam, x, spec.eps0)
        if g.height < b.pts[-1].z - EPS_GEOM:
            raise InvalidParam("grid below current height; eps0 too small for terrain")
        piece_start = len(b.pts) - 1
        b.add(Point3(0.0, 0.0, g.height))
        emit("ascend", (g.height,))
        emit("grid_start", (x,))
        comp = eligible_component(terrain, g)
        walk = _tour_cells(comp, g.center_cell)
        lift_step = g.cell_side / spec.lift_divisor
        tour_h = 0.0
        lift_total = 0.0
        for cell in walk[1:]:
            cx, cy = g.cell_center(cell)
            prev = b.pts[-1]
            lift_total += _move_with_lift(terrain, b, cx, cy, lift_step)
            tour_h += math.hypot(cx - prev.x, cy - prev.y)
            emit("visit_cell", cell)
        if lift_total > 0:
            emit("lift", (lift_total,))
        emit("grid_end", (x,))
        grids.append(GridStats(x=x, k=g.k, cells_per_side=g.cells_per_side,
                               cell_side=g.cell_side, height=g.height,
                               component_size=len(comp), tour_horizontal=tour_h,
                               vertical_lift=lift_total, z_end=b.pts[-1].z))

        # visibility testing along everything added for this grid
        pts = b.pts
        arcs = b.arc
        test_pts: List[Point3] = []
        owners: List[Tuple[int, float]] = []  # (piece index, param)
        spacing = g.cell_side / spec.test_divisor
        for i in range(piece_start, len(pts) - 1):
            p, q = pts[i], pts[i + 1]
            d = p.dist(q)
            nseg = max(1, int(math.ceil(d / spacing)))
            for kk in range(nseg):
                uu = kk / nseg
                test_pts.append(Point3(p.x + (q.x - p.x) * uu,
                                       p.y + (q.y - p.y) * uu,
                                       p.z + (q.z - p.z) * uu))
                owners.append((i, uu))
        test_pts.append(pts[-1])
        owners.append((len(pts) - 2, 1.0))
        arr = np.array([(p.x, p.y, p.z) for p in test_pts])
        vis = terrain.sees3d_batch(arr, t, step=sees_step)
        if vis.any():
            f = int(np.argmax(vis))
            # bracket between the previous (invisible) sample and the first
            # visible one; samples include piece endpoints so the bracket
            # stays within one piece
            if f == 0:
                pt = test_pts[0]
                i, uu = owners[0]
                arc_stop = arcs[i] + pts[i].dist(pts[i + 1]) * uu
                return _truncate(b, events, grids, lam, spec, i, uu, pt, arc_stop)
            i_prev, u_prev = owners[f - 1]
            i_vis, u_vis = owners[f]
            if i_prev != i_vis:
                i_prev, u_prev = i_vis, 0.0
            a = Point3(*(np.array(pts[i_vis].as_tuple()) * 0
                         + _lerp3(pts[i_vis], pts[i_vis + 1], u_prev)))
            c = Point3(*_lerp3(pts[i_vis], pts[i_vis + 1], u_vis))
            if seen_from(a):
                ustar = u_prev
            else:
                rel = first_param_between(a, c, seen_from, tol=1e-10)
                ustar = u_prev + (u_vis - u_prev) * rel
            pt = Point3(*_lerp3(pts[i_vis], pts[i_vis + 1], ustar))
            arc_stop = arcs[i_vis] + pts[i_vis].dist(pts[i_vis + 1]) * ustar
            return _truncate(b, events, grids, lam, spec, i_vis, ustar, pt, arc_stop)
        j += 1


def _lerp3(p: Point3, q: Point3, u: float) -> Tuple[float, float, float]:
    return (p.x + (q.x - p.x) * u, p.y + (q.y - p.y) * u, p.z + (q.z - p.z) * u)


def _truncate(b: _Builder3D, events: List[SearchEvent3D], grids: List[GridStats],
              lam: float, spec: StrategySpec25D, piece: int, u: float,
              stop_point: Point3, arc_stop: float) -> SearchPath3D:
    pts = b.pts[:piece + 1] + [stop_point]
    events = [e for e in events if e.arclen <= arc_stop + EPS_GEOM]
    events.append(SearchEvent3D("stop", arc_stop, stop_point))
    return SearchPath3D(Polyline(pts), events, arc_stop, stop_point, True,
                        grids, lam, spec)
