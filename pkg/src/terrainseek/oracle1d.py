"""Optimal-distance oracles for 1.5D instances.

Two oracles with different contracts:

* :func:`geodesic_to_ray` is exact. Taut paths above a 1.5D terrain bend only
  at local maxima, so Dijkstra over {start, peaks} with perpendicular-foot or
  anchor terminal edges gives the true shortest path to a visibility ray.
* :func:`geodesic_to_visibility` is a discretized free-space search with
  one-sided error: every graph edge is verified against the terrain, so the
  returned length is always >= the true optimum and converges as the grid
  step shrinks.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import InvalidParam, Unreachable, ZeroOptimal
from .geom import EPS_GEOM, Point2, Polyline
from .terrain1d import Target1D, Terrain1D


@dataclass(frozen=True)
class VisRay:
    """Half-line bounding the target's visibility region.

    ``slope`` is measured in the rightward-instance convention (always <= 0);
    a left-side ray is the horizontal mirror and keeps the same stored slope.
    ``slope=None`` encodes a vertical ray (slope -inf). ``anchor`` is the ray
    origin on (or below) the terrain; the half-line rises from it.
    """

    d_r: float
    side: str
    anchor: Point2
    slope: Optional[float] = None

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise InvalidParam(f"side must be 'left' or 'right', got {self.side!r}")
        if self.slope is not None and self.slope > 0:
            raise InvalidParam("visibility rays have slope <= 0")
        if not (self.d_r > 0):
            raise InvalidParam("d_r must be positive")
        scale = max(1.0, abs(self.anchor.x), abs(self.anchor.y), self.d_r)
        if abs(self._line_distance_from_origin() - self.d_r) > 1e-6 * scale:
            raise InvalidParam(
                f"d_r={self.d_r} inconsistent with anchor/slope "
                f"(line distance {self._line_distance_from_origin()})")

    @property
    def direction(self) -> Point2:
        """Unit direction of the half-line (rising from the anchor)."""
        if self.slope is None:
            return Point2(0.0, 1.0)
        dx = -1.0 if self.side == "right" else 1.0
        n = math.hypot(1.0, self.slope)
        return Point2(dx / n, -self.slope / n)

    def _line_distance_from_origin(self) -> float:
        d = self.direction
        # |cross(d, origin - anchor)|, d is unit
        return abs(d.x * (0.0 - self.anchor.y) - d.y * (0.0 - self.anchor.x))

    @staticmethod
    def vertical(x: float, anchor_y: float = 0.0, side: Optional[str] = None) -> "VisRay":
        if side is None:
            side = "right" if x >= 0 else "left"
        return VisRay(d_r=abs(x), side=side, anchor=Point2(x, anchor_y), slope=None)

    @staticmethod
    def from_anchor_slope(anchor: Point2, slope: Optional[float], side: str) -> "VisRay":
        tmp = VisRay.__new__(VisRay)
        object.__setattr__(tmp, "side", side)
        object.__setattr__(tmp, "slope", slope)
        object.__setattr__(tmp, "anchor", anchor)
        d = tmp.direction
        d_r = abs(d.x * (0.0 - anchor.y) - d.y * (0.0 - anchor.x))
        return VisRay(d_r=d_r, side=side, anchor=anchor, slope=slope)


@dataclass(frozen=True)
class GeodesicResult:
    length: float
    path: Polyline
    terminal: Point2


def _ray_terminal_edge(terrain: Terrain1D, u: Point2, ray: VisRay) -> Optional[Tuple[float, Point2]]:
    """Terminal connection from node u: perpendicular foot when it lands on the
    ray (not its extension) unobstructed, otherwise the anchor; None if both
    are blocked."""
    d = ray.direction
    a = ray.anchor
    proj = (u.x - a.x) * d.x + (u.y - a.y) * d.y
    foot = Point2(a.x + proj * d.x, a.y + proj * d.y)
    scale = max(1.0, abs(u.x), abs(u.y))
    if proj >= -EPS_GEOM * scale and not terrain.segment_blocked(u, foot):
        return (u.dist(foot), foot)
    if not terrain.segment_blocked(u, a):
        return (u.dist(a), a)
    return None


def geodesic_to_ray(terrain: Terrain1D, ray: VisRay) -> GeodesicResult:
    """Exact shortest path from the start to the ray in the free space above T."""
    p0 = Point2(0.0, 0.0)
    d = ray.direction
    g0 = d.x * (0.0 - ray.anchor.y) - d.y * (0.0 - ray.anchor.x)
    if abs(g0) <= EPS_GEOM * max(1.0, abs(ray.anchor.x), abs(ray.anchor.y)):
        raise InvalidParam("ray passes through the start point")

    nodes: List[Point2] = [p0] + terrain.peaks()
    n = len(nodes)
    # node-to-node visibility edges
    adj: List[List[Tuple[int, float]]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if not terrain.segment_blocked(nodes[i], nodes[j]):
                w = nodes[i].dist(nodes[j])
                adj[i].append((j, w))
                adj[j].append((i, w))
    terminals = [_ray_terminal_edge(terrain, q, ray) for q in nodes]

    dist = [math.inf] * n
    prev = [-1] * n
    dist[0] = 0.0
    heap = [(0.0, 0)]
    while heap:
        du, i = heapq.heappop(heap)
        if du > dist[i]:
            continue
        for j, w in adj[i]:
            nd = du + w
            if nd < dist[j] - 1e-15:
                dist[j] = nd
                prev[j] = i
                heapq.heappush(heap, (nd, j))

    best = math.inf
    best_i = -1
    for i, term in enumerate(terminals):
        if term is None or not math.isfinite(dist[i]):
            continue
        total = dist[i] + term[0]
        if total < best:
            best = total
            best_i = i
    if best_i < 0:
        raise Unreachable("no terminal connection to the ray")
    chain = []
    i = best_i
    while i >= 0:
        chain.append(nodes[i])
        i = prev[i]
    chain.reverse()
    chain.append(terminals[best_i][1])
    return GeodesicResult(length=best, path=Polyline(chain), terminal=terminals[best_i][1])


def competitive_ratio(tau: float, opt: float) -> float:
    if opt <= EPS_GEOM:
        raise ZeroOptimal(f"optimal distance {opt} is degenerate")
    return tau / opt


def _surface_walk_bound(terrain: Terrain1D, t: Point2) -> float:
    """Length of the on-surface walk from the start to t; a feasible path,
    hence an upper bound on the geodesic to vis(t)."""
    xs, hs = terrain.xs, terrain.hs
    lo, hi = (0.0, t.x) if t.x >= 0 else (t.x, 0.0)
    mask = (xs > lo) & (xs < hi)
    px = np.concatenate([[lo], xs[mask], [hi]])
    py = np.concatenate([[terrain.height_at(lo)], hs[mask], [terrain.height_at(hi)]])
    return float(np.hypot(np.diff(px), np.diff(py)).sum())


def _nodes_seeing_target(terrain: Terrain1D, nx: np.ndarray, ny: np.ndarray,
                         t: Point2) -> np.ndarray:
    """Vectorized visibility of many above-terrain points toward t."""
    scale = max(1.0, float(np.abs(nx).max()), float(np.abs(ny).max()), abs(t.x), abs(t.y))
    tol = EPS_GEOM * scale
    blocked = np.zeros(nx.shape, dtype=bool)
    dx = t.x - nx
    safe = np.abs(dx) > tol
    for vx, vh in zip(terrain.xs, terrain.hs):
        between = safe & (((nx < vx) & (vx < t.x)) | ((t.x < vx) & (vx < nx)))
        if not between.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            chord = ny + (t.y - ny) * (vx - nx) / dx
        blocked |= between & (vh > chord + tol)
    return ~blocked


def geodesic_to_visibility(terrain: Terrain1D, target: Target1D, grid_step: float,
                           node_cap: int = 60_000) -> GeodesicResult:
    """Discretized shortest path from the start to the visibility region of t.

    Builds a free-space graph from a regular grid (aligned so x=0 is a
    column), on-surface nodes per column, the terrain vertices, and long-range
    visibility edges between {start, vertices}. All edges are verified against
    the terrain, so the result is an upper bound on the true optimum and is
    non-increasing under grid refinement. The spec's 4x bounding box is
    intersected with a reachability disk of radius the on-surface walk bound;
    if the node count would exceed ``node_cap`` the step is coarsened.
    """
    if grid_step <= 0:
        raise InvalidParam("grid_step must be positive")
    target.validate(terrain)
    t = target.position
    p0 = Point2(0.0, 0.0)
    straight = max(p0.dist(t), 10 * EPS_GEOM)
    walk_bound = _surface_walk_bound(terrain, t) + EPS_GEOM
    reach = min(4.0 * straight, 1.001 * walk_bound)

    x_lo = max(min(0.0, t.x) - straight, -reach)
    x_hi = min(max(0.0, t.x) + straight, reach)
    h = grid_step
    # y range: paths of length <= reach never rise above reach
    y_lo_probe = np.arange(x_lo, x_hi + h, h)
    t_min = float(terrain.height_at(y_lo_probe).min())
    y_hi = min(reach * 1.001, float(terrain.height_at(y_lo_probe).max()) + straight)
    y_hi = max(y_hi, t_min + 4 * h)
    est_nodes = max(1.0, (x_hi - x_lo) / h) * max(1.0, (y_hi - t_min) / h)
    if est_nodes > node_cap:
        h = h * math.sqrt(est_nodes / node_cap)

    c_lo = math.ceil((x_lo - 1e-12) / h)
    c_hi = math.floor((x_hi + 1e-12) / h)
    xs = h * np.arange(c_lo, c_hi + 1)
    nc = len(xs)
    if nc < 2:
        raise Unreachable("degenerate grid")
    tc = terrain.height_at(xs)
    r_lo = math.floor(t_min / h) - 1
    r_hi = math.ceil(y_hi / h) + 1
    ys = h * np.arange(r_lo, r_hi + 1)
    nr = len(ys)

    tol = EPS_GEOM * max(1.0, float(np.abs(xs).max()), float(np.abs(ys).max()))
    free = ys[:, None] >= tc[None, :] - tol          # (nr, nc)
    gid = -np.ones((nr, nc), dtype=np.int64)
    gid[free] = np.arange(int(free.sum()))
    n_grid = int(free.sum())

    node_x = [ys[:, None].repeat(nc, axis=1)[free] * 0 + np.broadcast_to(xs, (nr, nc))[free]]
    node_y = [np.broadcast_to(ys[:, None], (nr, nc))[free]]
    # surface nodes, one per column
    sid = n_grid + np.arange(nc)
    node_x.append(xs.copy())
    node_y.append(tc.copy())
    # terrain vertex nodes within range
    vmask = (terrain.xs >= xs[0]) & (terrain.xs <= xs[-1])
    vx = terrain.xs[vmask]
    vh = terrain.hs[vmask]
    vid = n_grid + nc + np.arange(len(vx))
    node_x.append(vx.copy())
    node_y.append(vh.copy())
    nx_all = np.concatenate(node_x)
    ny_all = np.concatenate(node_y)
    n_nodes = len(nx_all)

    # vertex positions between grid columns (for chord checks)
    col_of_vertex = np.searchsorted(xs, vx, side="right") - 1

    rows_e = []
    cols_e = []
    wts_e = []

    def add_edges(a_ids, b_ids, w):
        rows_e.append(a_ids)
        cols_e.append(b_ids)
        wts_e.append(w if np.ndim(w) else np.full(len(a_ids), w, dtype=float))

    # vertical grid edges (always feasible above a height function)
    both = free[:-1, :] & free[1:, :]
    add_edges(gid[:-1, :][both], gid[1:, :][both], h)

    # per-interval max blocking height between adjacent columns
    vmax_between = np.full(nc - 1, -np.inf)
    for j, (x_v, h_v) in enumerate(zip(vx, vh)):
        c = int(col_of_vertex[j])
        if 0 <= c < nc - 1 and xs[c] < x_v < xs[c + 1]:
            vmax_between[c] = max(vmax_between[c], h_v)

    # horizontal grid edges: level must clear the between-vertex max
    both = free[:, :-1] & free[:, 1:]
    lvl_ok = ys[:, None] >= vmax_between[None, :] - tol
    ok = both & lvl_ok
    add_edges(gid[:, :-1][ok], gid[:, 1:][ok], h)

    # diagonal grid edges
    diag_w = h * math.sqrt(2.0)
    for dr in (1, -1):
        a = gid[max(0, -dr):nr - max(0, dr), :-1]
        b = gid[max(0, dr):nr - max(0, -dr), 1:]
        fa = a >= 0
        fb = b >= 0
        ok = fa & fb
        # chord midpoint height at a between-vertex: ya + dr*h*(xv-xc)/h
        ya = np.broadcast_to(ys[max(0, -dr):nr - max(0, dr), None], a.shape)
        chord_ok = np.ones(a.shape, dtype=bool)
        for j, (x_v, h_v) in enumerate(zip(vx, vh)):
            c = int(col_of_vertex[j])
            if 0 <= c < nc - 1 and xs[c] < x_v < xs[c + 1]:
                cy = ya[:, c] + dr * (x_v - xs[c])
                chord_ok[:, c] &= h_v <= cy + tol
        ok &= chord_ok
        add_edges(a[ok], b[ok], diag_w)

    # surface chain edges
    wsurf = np.hypot(np.diff(xs), np.diff(tc))
    surf_ok = np.ones(nc - 1, dtype=bool)
    for j, (x_v, h_v) in enumerate(zip(vx, vh)):
        c = int(col_of_vertex[j])
        if 0 <= c < nc - 1 and xs[c] < x_v < xs[c + 1]:
            cy = tc[c] + (tc[c + 1] - tc[c]) * (x_v - xs[c]) / (xs[c + 1] - xs[c])
            surf_ok[c] &= h_v <= cy + tol
    add_edges(sid[:-1][surf_ok], sid[1:][surf_ok], wsurf[surf_ok])

    # surface node to the lowest free grid node of its column
    first_free = np.argmax(free, axis=0)
    has_free = free.any(axis=0)
    cols_idx = np.nonzero(has_free)[0]
    g_low = gid[first_free[cols_idx], cols_idx]
    w_up = ys[first_free[cols_idx]] - tc[cols_idx]
    keep = w_up >= -tol
    add_edges(sid[cols_idx[keep]], g_low[keep], np.maximum(w_up[keep], 0.0))

    # terrain-vertex stitches and long-range visibility edges
    special_pts = [Point2(float(x), float(y)) for x, y in zip(vx, vh)]
    p0_id = int(sid[int(np.searchsorted(xs, 0.0))]) if (xs == 0.0).any() else None
    if p0_id is None:
        raise Unreachable("grid does not contain the start column")
    lr_rows = []
    lr_cols = []
    lr_w = []
    for j, q in enumerate(special_pts):
        c = int(col_of_vertex[j])
        for cc in (c, c + 1):
            if 0 <= cc < nc:
                sp = Point2(float(xs[cc]), float(tc[cc]))
                if not terrain.segment_blocked(q, sp):
                    lr_rows.append(int(vid[j]))
                    lr_cols.append(int(sid[cc]))
                    lr_w.append(q.dist(sp))
    anchors = [(p0_id, p0)] + [(int(vid[j]), q) for j, q in enumerate(special_pts)]
    for ii in range(len(anchors)):
        for jj in range(ii + 1, len(anchors)):
            ai, ap = anchors[ii]
            bi, bp = anchors[jj]
            if not terrain.segment_blocked(ap, bp):
                lr_rows.append(ai)
                lr_cols.append(bi)
                lr_w.append(ap.dist(bp))
    if lr_rows:
        add_edges(np.array(lr_rows), np.array(lr_cols), np.array(lr_w, dtype=float))

    rows = np.concatenate(rows_e)
    cols = np.concatenate(cols_e)
    wts = np.concatenate(wts_e)
    graph = sparse.csr_matrix(
        (np.concatenate([wts, wts]),
         (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n_nodes, n_nodes))

    dist, pred = csgraph.dijkstra(graph, directed=False, indices=p0_id,
                                  return_predecessors=True)

    seeing = _nodes_seeing_target(terrain, nx_all, ny_all, t)
    cand = np.nonzero(seeing & np.isfinite(dist))[0]
    if len(cand) == 0:
        raise Unreachable("no reachable node sees the target; refine the grid")
    best = int(cand[np.argmin(dist[cand])])
    chain = []
    i = best
    while i >= 0 and i != -9999:
        chain.append(Point2(float(nx_all[i]), float(ny_all[i])))
        i = int(pred[i])
    chain.reverse()
    if not chain or chain[0].dist(p0) > 1e-9:
        chain.insert(0, p0)
    return GeodesicResult(length=float(dist[best]), path=Polyline(chain),
                          terminal=Point2(float(nx_all[best]), float(ny_all[best])))


def visibility_optimum(terrain: Terrain1D, target: Target1D, rounds: int = 2,
                       base_divisor: float = 50.0,
                       node_cap: int = 60_000) -> Tuple[GeodesicResult, List[float]]:
    """Run geodesic_to_visibility with halving refinement rounds.

    Starts at straight_distance/base_divisor and halves ``rounds`` times
    (default final step = distance/200 per the design default). Returns the
    final result and the list of steps actually used.
    """
    t = target.position
    straight = max(Point2(0.0, 0.0).dist(t), 1e-6)
    steps = [straight / (base_divisor * 2 ** k) for k in range(rounds + 1)]
    result = None
    for st in steps:
        result = geodesic_to_visibility(terrain, target, st, node_cap=node_cap)
    return result, steps
