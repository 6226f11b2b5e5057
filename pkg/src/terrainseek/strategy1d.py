"""Doubling search over a 1.5D terrain.

The guide is the projected path: alternating slope-s excursions whose
horizontal reach doubles at every turn, realized from a finite start scale
with a negligible vertical stub in place of the infinite inward spiral. The
search path follows the guide, climbs the terrain wherever the guide would
dive strictly below it, continues diagonally at slope s once the terrain
flattens, and re-adopts the guide (with the guide's own traversal direction,
which may reverse the heading mid-segment) wherever it meets its point set.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import BudgetExceeded, InvalidParam, InvalidSpec, NeverCrosses, OutOfDomain
from .geom import EPS_GEOM, Point2, Polyline, lerp
from .oracle1d import VisRay
from .terrain1d import Target1D, Terrain1D

DEFAULT_SLOPE = math.sqrt(2.0) / 6.0


@dataclass(frozen=True)
class StrategySpec1D:
    """Parameters of the 1.5D search strategy.

    The slope regime (2/9, 4/9) is where the closed-form worst-case analysis
    is valid; values outside it are allowed for experiments but warn.
    """

    s: float = DEFAULT_SLOPE
    eps0: float = 1e-6
    practical_start: bool = False
    budget: float = 1e6

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0):
            raise InvalidSpec("slope s must be positive and finite")
        if not (math.isfinite(self.eps0) and self.eps0 > 0):
            raise InvalidSpec("eps0 must be positive and finite")
        if not (math.isfinite(self.budget) and self.budget > 0):
            raise InvalidSpec("budget must be positive and finite")
        if not (2.0 / 9.0 < self.s < 4.0 / 9.0):
            warnings.warn(
                f"slope s={self.s} outside (2/9, 4/9); the worst-case analysis "
                "does not cover this regime", stacklevel=2)


def tau_star(spec: StrategySpec1D, y: float) -> float:
    """Arc length of a pure slope-s path up to height y."""
    if y < 0:
        raise InvalidParam("tau_star needs y >= 0")
    return y * math.sqrt(1.0 + spec.s * spec.s) / spec.s


@dataclass(frozen=True)
class PiSegment:
    """One realized traversal segment of the projected path."""

    index: int          # closed-form segment index
    right: bool         # odd index: rightward traversal
    x_from: float
    x_to: float
    y_from: float
    y_to: float

    @property
    def dirx(self) -> int:
        return 1 if self.right else -1

    @property
    def intercept(self) -> float:
        # line is y = intercept + slope_sign*s*x
        return self.y_from - self.line_slope * self.x_from

    @property
    def line_slope(self) -> float:
        return (self.y_to - self.y_from) / (self.x_to - self.x_from)

    def y_at(self, x: float) -> float:
        return self.y_from + self.line_slope * (x - self.x_from)

    def start(self) -> Point2:
        return Point2(self.x_from, self.y_from)

    def end(self) -> Point2:
        return Point2(self.x_to, self.y_to)

    def x_min(self) -> float:
        return min(self.x_from, self.x_to)

    def x_max(self) -> float:
        return max(self.x_from, self.x_to)


class ProjectedPath:
    """The slope-s doubling guide, realized from index i0 = ceil(log2(eps0)).

    Segment index i is the closed form h_r^i(x) = s*(2^i + x) on
    [-2^(i-2), 2^(i-1)] for odd i, and h_l^i(x) = s*(2^i - x) on
    [-2^(i-1), 2^(i-2)] for even i. The first realized segment is entered at
    x = 0 via a vertical stub from the origin of height s*2^i0, which changes
    total arc length by less than s*eps0.
    """

    def __init__(self, spec: StrategySpec1D):
        self.spec = spec
        self.i0 = math.ceil(math.log2(spec.eps0))
        self._trav: List[PiSegment] = []
        self._ensure(8)

    def stub_top(self) -> Point2:
        return Point2(0.0, self.spec.s * 2.0 ** self.i0)

    def _make(self, n: int) -> PiSegment:
        i = self.i0 + n
        s = self.spec.s
        p = 2.0 ** i
        right = (i % 2 != 0)
        if right:
            x_from = 0.0 if n == 0 else -(2.0 ** (i - 2))
            x_to = 2.0 ** (i - 1)
            return PiSegment(i, True, x_from, x_to, s * (p + x_from), s * (p + x_to))
        x_from = 0.0 if n == 0 else 2.0 ** (i - 2)
        x_to = -(2.0 ** (i - 1))
        return PiSegment(i, False, x_from, x_to, s * (p - x_from), s * (p - x_to))

    def _ensure(self, count: int) -> None:
        while len(self._trav) < count:
            self._trav.append(self._make(len(self._trav)))

    def traversal(self, n: int) -> PiSegment:
        self._ensure(n + 1)
        return self._trav[n]

    def ensure_height(self, y: float) -> None:
        """Generate segments until the newest starts above height y."""
        self._ensure(2)
        while self._trav[-1].y_from <= y:
            self._ensure(len(self._trav) + 2)

    def segments(self) -> List[PiSegment]:
        return list(self._trav)

    def projected_point(self, i: int, x: float) -> Point2:
        """Closed-form point of segment i at abscissa x (full domain)."""
        s = self.spec.s
        if i % 2 != 0:
            lo, hi = -(2.0 ** (i - 2)), 2.0 ** (i - 1)
            y = s * (2.0 ** i + x)
        else:
            lo, hi = -(2.0 ** (i - 1)), 2.0 ** (i - 2)
            y = s * (2.0 ** i - x)
        tol = EPS_GEOM * max(1.0, abs(lo), abs(hi))
        if not (lo - tol <= x <= hi + tol):
            raise OutOfDomain(f"x={x} outside segment {i} domain [{lo}, {hi}]")
        return Point2(x, y)

    def turning_points(self, count: int) -> List[Point2]:
        return [self.traversal(n).end() for n in range(count)]

    # -- point-set queries -------------------------------------------------

    def _tol(self, *vals: float) -> float:
        return EPS_GEOM * max(1.0, *(abs(v) for v in vals))

    def membership(self, p: Point2) -> Optional[int]:
        """Traversal index of a segment containing p, or -1 for the stub;
        None if p is not on the realized point set. Junction points resolve
        to the later (outgoing) segment."""
        self.ensure_height(p.y)
        tol = self._tol(p.x, p.y)
        if abs(p.x) <= tol and -tol <= p.y <= self.stub_top().y + tol:
            return -1
        hit = None
        for n in range(len(self._trav)):
            seg = self._trav[n]
            if seg.x_min() - tol <= p.x <= seg.x_max() + tol \
                    and abs(seg.y_at(p.x) - p.y) <= tol:
                hit = n
        return hit

    def first_hit_on_piece(self, p: Point2, q: Point2) -> Optional[Tuple[float, Point2, int]]:
        """Earliest strictly-positive parameter along p->q meeting the point
        set. Ties at junctions resolve to the outgoing segment."""
        self.ensure_height(max(p.y, q.y))
        r = q - p
        rlen = r.norm()
        if rlen <= 0:
            return None
        tol = self._tol(p.x, p.y, q.x, q.y)
        u_eps = tol / rlen
        best: Optional[Tuple[float, Point2, int]] = None
        for n, seg in enumerate(self._trav):
            a = seg.start()
            sv = seg.end() - a
            denom = r.cross(sv)
            if abs(denom) <= 1e-15 * max(1.0, rlen * sv.norm()):
                # parallel; collinear entry from outside the span
                if abs(r.cross(a - p)) > tol * max(1.0, rlen):
                    continue
                ua = (a - p).dot(r) / (rlen * rlen)
                ub = ((seg.end() - p).dot(r)) / (rlen * rlen)
                u_in = min(ua, ub)
                if u_in <= u_eps or u_in > 1.0 + u_eps:
                    continue
                cand = (min(u_in, 1.0), lerp(p, q, min(u_in, 1.0)), n)
            else:
                t_piece = (a - p).cross(sv) / denom
                w = (a - p).cross(r) / denom
                if t_piece <= u_eps or t_piece > 1.0 + u_eps:
                    continue
                wtol = tol / max(sv.norm(), 1e-30)
                if w < -wtol or w > 1.0 + wtol:
                    continue
                cand = (min(t_piece, 1.0), lerp(a, seg.end(), min(max(w, 0.0), 1.0)), n)
            if best is None or cand[0] < best[0] - u_eps \
                    or (abs(cand[0] - best[0]) <= u_eps and cand[2] > best[2]):
                best = cand
        # stub hit (vertical piece at x=0 from the origin)
        top = self.stub_top()
        if abs(r.x) > 1e-300:
            u0 = (0.0 - p.x) / r.x
            if u_eps < u0 <= 1.0 + u_eps:
                yhit = p.y + r.y * min(u0, 1.0)
                if -tol <= yhit <= top.y + tol:
                    cand = (min(u0, 1.0), Point2(0.0, max(0.0, min(yhit, top.y))), -1)
                    if best is None or cand[0] < best[0] - u_eps:
                        best = cand
        return best

    def first_hit_on_ray(self, origin: Point2, dirx: int,
                         s: float) -> Tuple[float, Point2, int]:
        """Earliest hit of the slope-s diagonal ray from origin with the point
        set; (distance in x, point, traversal index). Extends the realized
        path as needed; a hit always exists for machine-reachable states but
        the search is capped for safety."""
        r = Point2(float(dirx), s)
        tol = self._tol(origin.x, origin.y)
        best: Optional[Tuple[float, Point2, int]] = None
        # stub candidate (vertical piece at x=0 from the origin)
        if abs(origin.x) > tol:
            t0 = (0.0 - origin.x) / r.x
            if t0 > tol:
                yhit = origin.y + s * t0
                if -tol <= yhit <= self.stub_top().y + tol:
                    best = (t0, Point2(0.0, max(0.0, min(yhit, self.stub_top().y))), -1)
        for _ in range(64):
            for n, seg in enumerate(self._trav):
                a = seg.start()
                sv = seg.end() - a
                denom = r.cross(sv)
                if abs(denom) <= 1e-18:
                    continue
                t_ray = (a - origin).cross(sv) / denom
                w = (a - origin).cross(r) / denom
                if t_ray <= tol:
                    continue
                wtol = tol / max(sv.norm(), 1e-30)
                if w < -wtol or w > 1.0 + wtol:
                    continue
                pt = lerp(a, seg.end(), min(max(w, 0.0), 1.0))
                cand = (t_ray, pt, n)
                if best is None or cand[0] < best[0] - tol \
                        or (abs(cand[0] - best[0]) <= tol and cand[2] > best[2]):
                    best = cand
            if best is not None:
                return best
            self._ensure(len(self._trav) + 8)
        raise InvalidParam("diagonal never meets the projected path (unreachable state)")


# -- stop conditions -------------------------------------------------------


class RayStop:
    """Stop when the path strictly crosses the ray's supporting half-line to
    the target side. Touching the line (e.g. a turning point landing exactly
    on a vertical ray) does not stop the search."""

    def __init__(self, ray: VisRay):
        self.ray = ray
        d = ray.direction
        a = ray.anchor
        g0 = d.x * (0.0 - a.y) - d.y * (0.0 - a.x)
        scale = max(1.0, abs(a.x), abs(a.y))
        if abs(g0) <= EPS_GEOM * scale:
            raise InvalidParam("ray passes through the path start")
        self._sign = -1.0 if g0 > 0 else 1.0

    def _g(self, p: Point2) -> float:
        d = self.ray.direction
        a = self.ray.anchor
        return self._sign * (d.x * (p.y - a.y) - d.y * (p.x - a.x))

    def first_stop(self, p: Point2, q: Point2) -> Optional[Tuple[float, Point2]]:
        gp = self._g(p)
        gq = self._g(q)
        if gq <= 0.0 or gp > 0.0:
            return None
        u = 0.0 if gp >= 0.0 else gp / (gp - gq)
        z = lerp(p, q, u)
        d = self.ray.direction
        a = self.ray.anchor
        along = (z.x - a.x) * d.x + (z.y - a.y) * d.y
        tol = EPS_GEOM * max(1.0, abs(z.x), abs(z.y))
        if along >= -tol:
            return (u, z)
        return None


class TargetStop:
    """Stop at the first point of the path that sees the target.

    Pieces are split at terrain-vertex abscissas (and the target's), so the
    set of potentially blocking vertices is fixed per sub-piece and each
    vertex contributes a constraint linear in the parameter; the visible set
    on a sub-piece is then an interval whose left end is the stop."""

    def __init__(self, terrain: Terrain1D, target: Target1D):
        target.validate(terrain)
        self.terrain = terrain
        self.t = target.position

    def first_stop(self, p: Point2, q: Point2) -> Optional[Tuple[float, Point2]]:
        t = self.t
        terrain = self.terrain
        scale = max(1.0, abs(p.x), abs(p.y), abs(q.x), abs(q.y), abs(t.x), abs(t.y))
        tol = EPS_GEOM * scale
        breaks = [0.0, 1.0]
        dx = q.x - p.x
        if abs(dx) > tol:
            x_lo, x_hi = (p.x, q.x) if dx > 0 else (q.x, p.x)
            lo = int(terrain.xs.searchsorted(x_lo, side="right"))
            hi = int(terrain.xs.searchsorted(x_hi, side="left"))
            for xv in terrain.xs[lo:hi]:
                breaks.append((xv - p.x) / dx)
            if x_lo < t.x < x_hi:
                breaks.append((t.x - p.x) / dx)
        breaks = sorted(set(min(max(b, 0.0), 1.0) for b in breaks))
        xs, hs = terrain.xs, terrain.hs
        for ua, ub in zip(breaks, breaks[1:]):
            if ub - ua <= 0:
                continue
            a = lerp(p, q, ua)
            b = lerp(p, q, ub)
            xm = 0.5 * (a.x + b.x)
            w_lo, w_hi = (xm, t.x) if xm <= t.x else (t.x, xm)
            i0 = int(xs.searchsorted(w_lo, side="right"))
            i1 = int(xs.searchsorted(w_hi, side="left"))
            lo_u, hi_u = ua, ub
            feasible = True
            r = q - p
            for k in range(i0, i1):
                v = Point2(float(xs[k]), float(hs[k]))
                # blocked iff v strictly above the chord; orientation form is
                # linear in the parameter u: f(u) = cross(R-L, v-L) with L,R
                # the x-ordered chord endpoints (t fixed, z = p + u*r moving)
                if xm <= t.x:
                    # f(u) = cross(t - z, v - z); blocked iff f > tol
                    fa = (t - a).cross(v - a)
                    fb = (t - b).cross(v - b)
                else:
                    fa = (a - t).cross(v - t)
                    fb = (b - t).cross(v - t)
                # f linear over [ua, ub]: constrain f(u) <= tol
                if abs(fb - fa) <= 1e-300:
                    if fa > tol:
                        feasible = False
                        break
                    continue
                slope = (fb - fa) / (ub - ua)
                u_at_tol = ua + (tol - fa) / slope
                if slope > 0:
                    hi_u = min(hi_u, u_at_tol)
                else:
                    lo_u = max(lo_u, u_at_tol)
                if lo_u > hi_u:
                    feasible = False
                    break
            if feasible and lo_u <= hi_u:
                u = min(max(lo_u, 0.0), 1.0)
                return (u, lerp(p, q, u))
        return None


# -- search path -----------------------------------------------------------


@dataclass(frozen=True)
class SearchEvent:
    kind: str
    arclen: float
    point: Point2
    segment_index: Optional[int] = None


@dataclass
class SearchPath1D:
    polyline: Polyline
    events: List[SearchEvent]
    total_length: float
    stop_point: Optional[Point2]
    stopped: bool
    spec: StrategySpec1D

    def event_kinds(self) -> List[str]:
        return [e.kind for e in self.events]


class _Builder:
    def __init__(self, stop, budget: float):
        self.stop = stop
        self.budget = budget
        self.pts: List[Point2] = [Point2(0.0, 0.0)]
        self.arc: List[float] = [0.0]
        self.stopped = False
        self.stop_point: Optional[Point2] = None

    @property
    def total(self) -> float:
        return self.arc[-1]

    def add(self, q: Point2) -> bool:
        """Append a piece toward q, truncating at the stop condition or the
        budget. Returns True when stopped."""
        p = self.pts[-1]
        seglen = p.dist(q)
        if seglen <= 0.0:
            return False
        hit = self.stop.first_stop(p, q) if self.stop is not None else None
        if hit is not None:
            u, z = hit
            self.pts.append(z)
            self.arc.append(self.arc[-1] + seglen * u)
            self.stopped = True
            self.stop_point = z
            return True
        if self.arc[-1] + seglen > self.budget:
            u = (self.budget - self.arc[-1]) / seglen
            z = lerp(p, q, u)
            self.pts.append(z)
            self.arc.append(self.budget)
            raise BudgetExceeded("arc-length budget exhausted", partial=(self.pts, self.arc))
        self.pts.append(q)
        self.arc.append(self.arc[-1] + seglen)
        return False


class _Machine:
    def __init__(self, terrain: Terrain1D, spec: StrategySpec1D, stop):
        self.terrain = terrain
        self.spec = spec
        self.pp = ProjectedPath(spec)
        self.b = _Builder(stop, spec.budget)
        self.events: List[SearchEvent] = []
        self.n = 0
        self.pos = Point2(0.0, 0.0)

    def event(self, kind: str, point: Point2, seg: Optional[int] = None) -> None:
        self.events.append(SearchEvent(kind, self.b.total, point, seg))

    def _tol(self) -> float:
        return EPS_GEOM * max(1.0, abs(self.pos.x), abs(self.pos.y))

    # terrain helpers ------------------------------------------------------

    def _next_break(self, x: float, d: int) -> Optional[float]:
        """Next terrain vertex abscissa strictly beyond x in direction d."""
        xs = self.terrain.xs
        if d > 0:
            i = int(xs.searchsorted(x, side="right"))
            return float(xs[i]) if i < len(xs) else None
        i = int(xs.searchsorted(x, side="left")) - 1
        return float(xs[i]) if i >= 0 else None

    def _edge_ahead(self, x: float, d: int) -> Tuple[float, float, float]:
        """(x_far, h_far, slope_in_x) of the terrain edge ahead of x in
        direction d; the flat extension acts as an infinite slope-0 edge."""
        xs, hs = self.terrain.xs, self.terrain.hs
        if d > 0:
            i = int(xs.searchsorted(x, side="right"))
            if i >= len(xs):
                return (x + max(1.0, abs(x)), float(hs[-1]), 0.0)
            slope = 0.0 if i == 0 else float((hs[i] - hs[i - 1]) / (xs[i] - xs[i - 1]))
            if i == 0:
                slope = 0.0
            return (float(xs[i]), float(hs[i]), slope)
        i = int(xs.searchsorted(x, side="left")) - 1
        if i < 0:
            return (x - max(1.0, abs(x)), float(hs[0]), 0.0)
        slope = 0.0 if i == len(xs) - 1 else float((hs[i + 1] - hs[i]) / (xs[i + 1] - xs[i]))
        if i == len(xs) - 1:
            slope = 0.0
        return (float(xs[i]), float(hs[i]), slope)

    # states ---------------------------------------------------------------

    def adopt(self, point: Point2, n: int, prev_dir: int, from_climb: bool) -> Tuple[str, int]:
        """Enter state ON-PI at a point of the realized point set."""
        if n == -1:
            # on the stub: ascend to its top, then segment 0
            top = self.pp.stub_top()
            if point.y < top.y and self.b.add(top):
                return ("stopped", prev_dir)
            self.pos = top if point.y < top.y else point
            self.n = 0
            self.event("follow_pi", self.pos, self.pp.i0)
            return ("pi", self.pp.traversal(0).dirx)
        seg = self.pp.traversal(n)
        self.n = n
        self.pos = point
        if seg.dirx != prev_dir:
            self.event("turn_pi_point", point, seg.index)
        else:
            self.event("follow_pi", point, seg.index)
        return ("pi", seg.dirx)

    def step_pi(self) -> Tuple[str, int]:
        seg = self.pp.traversal(self.n)
        d = seg.dirx
        terrain = self.terrain
        while (seg.x_to - self.pos.x) * d > 0:
            nb = self._next_break(self.pos.x, d)
            nx = seg.x_to if nb is None else (min(nb, seg.x_to) if d > 0 else max(nb, seg.x_to))
            ya = self.pos.y
            fa = terrain.height_at(self.pos.x) - ya
            yb = seg.y_at(nx)
            fb = terrain.height_at(nx) - yb
            tol = self._tol()
            if fb > tol:
                # guide dives strictly below the terrain within this stretch
                if fa >= -tol:
                    x_star = self.pos.x
                else:
                    x_star = self.pos.x + (nx - self.pos.x) * (-fa) / (fb - fa)
                z = Point2(x_star, seg.y_at(x_star))
                if self.b.add(z):
                    return ("stopped", d)
                self.pos = z
                self.event("climb_terrain", z, seg.index)
                return ("terrain", d)
            z = Point2(nx, seg.y_at(nx))
            if self.b.add(z):
                return ("stopped", d)
            self.pos = z
        # turning point of the guide
        self.event("turn_pi_turning_point", self.pos, seg.index)
        self.n += 1
        nseg = self.pp.traversal(self.n)
        return ("pi", nseg.dirx)

    def step_terrain(self, d: int, check_membership_first: bool) -> Tuple[str, int]:
        s = self.spec.s
        if check_membership_first:
            m = self.pp.membership(self.pos)
            if m is not None:
                return self.adopt(self.pos, m, d, from_climb=True)
        while True:
            x_far, h_far, slope = self._edge_ahead(self.pos.x, d)
            fwd = d * slope
            if fwd <= s:
                self.event("diagonal", self.pos)
                return ("diagonal", d)
            far = Point2(x_far, h_far)
            hit = self.pp.first_hit_on_piece(self.pos, far)
            if hit is not None:
                u, point, n = hit
                if self.b.add(point):
                    return ("stopped", d)
                return self.adopt(point, n, d, from_climb=True)
            if self.b.add(far):
                return ("stopped", d)
            self.pos = far
            m = self.pp.membership(self.pos)
            if m is not None:
                return self.adopt(self.pos, m, d, from_climb=True)

    def step_diagonal(self, d: int) -> Tuple[str, int]:
        s = self.spec.s
        terrain = self.terrain
        t_ray, pi_pt, pi_n = self.pp.first_hit_on_ray(self.pos, d, s)
        x_pi = pi_pt.x
        # walk terrain stretches looking for a strictly-positive upward crossing
        x_cur = self.pos.x
        tol = self._tol()
        diag_y = lambda x: self.pos.y + s * d * (x - self.pos.x)
        hit_terrain: Optional[Point2] = None
        guard = 0
        while (x_pi - x_cur) * d > tol and guard < 10_000_000:
            guard += 1
            nb = self._next_break(x_cur, d)
            nx = x_pi if nb is None else (min(nb, x_pi) if d > 0 else max(nb, x_pi))
            fa = terrain.height_at(x_cur) - diag_y(x_cur)
            fb = terrain.height_at(nx) - diag_y(nx)
            if fb > tol:
                if fa >= -tol:
                    x_star = x_cur
                else:
                    x_star = x_cur + (nx - x_cur) * (-fa) / (fb - fa)
                if (x_star - self.pos.x) * d > tol:
                    hit_terrain = Point2(x_star, diag_y(x_star))
                    break
            x_cur = nx
        if hit_terrain is not None:
            if self.b.add(hit_terrain):
                return ("stopped", d)
            self.pos = hit_terrain
            self.event("climb_terrain", hit_terrain)
            return ("terrain", d)
        if self.b.add(pi_pt):
            return ("stopped", d)
        return self.adopt(pi_pt, pi_n, d, from_climb=False)

    def run(self) -> SearchPath1D:
        pp = self.pp
        self.event("follow_pi", Point2(0.0, 0.0), pp.i0)
        top = pp.stub_top()
        if not self.b.add(top):
            self.pos = top
            mode, d = "pi", pp.traversal(0).dirx
            while not self.b.stopped:
                if mode == "pi":
                    mode, d = self.step_pi()
                elif mode == "terrain":
                    mode, d = self.step_terrain(d, check_membership_first=False)
                elif mode == "diagonal":
                    mode, d = self.step_diagonal(d)
                else:
                    break
        if self.b.stopped:
            self.event("stop", self.b.stop_point)
        return SearchPath1D(
            polyline=Polyline(self.b.pts),
            events=self.events,
            total_length=self.b.total,
            stop_point=self.b.stop_point,
            stopped=self.b.stopped,
            spec=self.spec,
        )


def _apply_practical_start(path: SearchPath1D, spec: StrategySpec1D) -> SearchPath1D:
    """Replace the spiral start by a vertical ascent to the highest crossing of
    the column x=0 (up to height 1) with the path, then follow the tail."""
    pts = path.polyline.vertices
    cum = path.polyline.cumulative_length
    best_y = None
    best = None  # (piece index, u, arc)
    for i in range(len(pts) - 1):
        p, q = pts[i], pts[i + 1]
        if (p.x - 0.0) * (q.x - 0.0) > 0:
            continue
        if abs(q.x - p.x) < 1e-300:
            y = max(p.y, q.y)
            u = 0.0
        else:
            u = (0.0 - p.x) / (q.x - p.x)
            if u < 0.0 or u > 1.0:
                continue
            y = p.y + (q.y - p.y) * u
        if y <= 1.0 + EPS_GEOM and (best_y is None or y >= best_y):
            best_y = y
            best = (i, u, cum[i] + p.dist(q) * u)
    if best is None:
        return path
    i, u, arc0 = best
    z = lerp(pts[i], pts[i + 1], u)
    new_pts = [Point2(0.0, 0.0), Point2(0.0, best_y)]
    if z.dist(Point2(0.0, best_y)) > 0:
        new_pts.append(z)
    new_pts.extend(pts[i + 1:])
    shift = best_y - arc0
    events = [SearchEvent("follow_pi", 0.0, Point2(0.0, 0.0))]
    for e in path.events:
        if e.arclen >= arc0:
            events.append(SearchEvent(e.kind, e.arclen + shift, e.point, e.segment_index))
    poly = Polyline(new_pts)
    return SearchPath1D(
        polyline=poly,
        events=events,
        total_length=path.total_length + shift,
        stop_point=path.stop_point,
        stopped=path.stopped,
        spec=spec,
    )


def build_search_path(terrain: Terrain1D, spec: StrategySpec1D, stop) -> SearchPath1D:
    """Simulate the search until the stop condition fires.

    ``stop`` is a RayStop or TargetStop (anything with first_stop(p, q)).
    Raises BudgetExceeded when the stop never fires within spec.budget.
    """
    machine = _Machine(terrain, spec, stop)
    path = machine.run()
    if spec.practical_start:
        path = _apply_practical_start(path, spec)
    return path


def cross_ray(path: SearchPath1D, ray: VisRay) -> Tuple[Point2, float]:
    """First strict crossing of a built path with the ray's half-line.

    Returns (crossing point, arc length there); raises NeverCrosses.
    """
    stopper = RayStop(ray)
    pts = path.polyline.vertices
    cum = path.polyline.cumulative_length
    for i in range(len(pts) - 1):
        hit = stopper.first_stop(pts[i], pts[i + 1])
        if hit is not None:
            u, z = hit
            return z, cum[i] + pts[i].dist(pts[i + 1]) * u
    raise NeverCrosses("path never crosses the ray within its extent")
