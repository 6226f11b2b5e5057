"""Planar and spatial primitives shared by the search strategies and oracles.

All geometry is plain binary64 with a single relative tolerance ``EPS_GEOM``.
Instance scales are O(1)-O(1e3), so adaptive exact arithmetic is deliberately
avoided; predicates scale the tolerance by the coordinate magnitude instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

EPS_GEOM = 1e-9


class GeometryError(ValueError):
    """A geometric precondition was violated."""


class DegenerateSegment(GeometryError):
    """Segment endpoints coincide within tolerance."""


class NoFlip(GeometryError):
    """The predicate is constant over the segment."""


class MixedDimensionality(GeometryError):
    """2D and 3D points were mixed where a single dimension is required."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite coordinates ({self.x}, {self.y})")

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)

    def scaled(self, f: float) -> "Point2":
        return Point2(self.x * f, self.y * f)

    def dot(self, other: "Point2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Point2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple:
        return (self.x, self.y)


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise GeometryError(f"non-finite coordinates ({self.x}, {self.y}, {self.z})")

    def __sub__(self, other: "Point3") -> "Point3":
        return Point3(self.x - other.x, self.y - other.y, self.z - other.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def dist(self, other: "Point3") -> float:
        return (self - other).norm()

    def as_tuple(self) -> tuple:
        return (self.x, self.y, self.z)


AnyPoint = Union[Point2, Point3]


def lerp(a: AnyPoint, b: AnyPoint, u: float) -> AnyPoint:
    """Point a + u*(b - a); works for both dimensions."""
    if isinstance(a, Point2) and isinstance(b, Point2):
        return Point2(a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u)
    if isinstance(a, Point3) and isinstance(b, Point3):
        return Point3(a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u, a.z + (b.z - a.z) * u)
    raise MixedDimensionality("cannot interpolate between 2D and 3D points")


class Orientation(Enum):
    LEFT = 1
    COLLINEAR = 0
    RIGHT = -1


def orient(p: Point2, q: Point2, r: Point2, eps: float = EPS_GEOM) -> Orientation:
    """Orientation of the triple (p, q, r) by the sign of twice the signed area.

    Collinear when the magnitude is below eps times the squared coordinate
    scale, which keeps the test meaningful at both desk scale and the 1e3
    scales of the lower-bound constructions.
    """
    area2 = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    scale = max(abs(p.x), abs(p.y), abs(q.x), abs(q.y), abs(r.x), abs(r.y), 1.0)
    if abs(area2) <= eps * scale * scale:
        return Orientation.COLLINEAR
    return Orientation.LEFT if area2 > 0 else Orientation.RIGHT


@dataclass(frozen=True)
class Segment:
    a: Point2
    b: Point2

    def length(self) -> float:
        return self.a.dist(self.b)

    def at(self, u: float) -> Point2:
        return lerp(self.a, self.b, u)


@dataclass(frozen=True)
class SegmentHit:
    point: Point2
    touching: bool


def _on_segment_bbox(p: Point2, s: Segment, eps: float) -> bool:
    return (min(s.a.x, s.b.x) - eps <= p.x <= max(s.a.x, s.b.x) + eps
            and min(s.a.y, s.b.y) - eps <= p.y <= max(s.a.y, s.b.y) + eps)


def seg_intersect(a: Segment, b: Segment, eps: float = EPS_GEOM) -> Optional[SegmentHit]:
    """Intersection of two segments, distinguishing touching from proper crossing.

    Returns the intersection point with ``touching=True`` when the segments
    meet without crossing (shared endpoint, endpoint on interior, collinear
    overlap start); ``None`` when disjoint.
    """
    scale = max(a.length(), b.length())
    if a.length() <= eps * max(1.0, scale) or b.length() <= eps * max(1.0, scale):
        raise DegenerateSegment("zero-length segment")

    d1 = orient(b.a, b.b, a.a, eps)
    d2 = orient(b.a, b.b, a.b, eps)
    d3 = orient(a.a, a.b, b.a, eps)
    d4 = orient(a.a, a.b, b.b, eps)

    if (d1 != d2 and d3 != d4
            and Orientation.COLLINEAR not in (d1, d2, d3, d4)):
        r = a.b - a.a
        s = b.b - b.a
        denom = r.cross(s)
        t = (b.a - a.a).cross(s) / denom
        return SegmentHit(a.at(t), touching=False)

    # Touching configurations: a collinear endpoint lying on the other segment.
    tol = eps * max(1.0, scale)
    candidates = []
    if d1 == Orientation.COLLINEAR and _on_segment_bbox(a.a, b, tol):
        candidates.append(a.a)
    if d2 == Orientation.COLLINEAR and _on_segment_bbox(a.b, b, tol):
        candidates.append(a.b)
    if d3 == Orientation.COLLINEAR and _on_segment_bbox(b.a, a, tol):
        candidates.append(b.a)
    if d4 == Orientation.COLLINEAR and _on_segment_bbox(b.b, a, tol):
        candidates.append(b.b)
    if candidates:
        # Collinear overlaps report the touch point nearest to a's start.
        best = min(candidates, key=lambda p: p.dist(a.a))
        return SegmentHit(best, touching=True)
    return None


def first_param_on_segment(seg: Segment, predicate: Callable[[Point2], bool],
                           tol: float = 1e-10) -> float:
    """Smallest parameter in [0,1] where a monotone predicate flips to true.

    The caller asserts monotonicity; bisection then brackets the flip to
    absolute parameter tolerance ``tol`` and returns the true side.
    """
    if predicate(seg.at(0.0)):
        return 0.0
    if not predicate(seg.at(1.0)):
        raise NoFlip("predicate constant on segment")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(seg.at(mid)):
            hi = mid
        else:
            lo = mid
    return hi


def first_param_between(a: AnyPoint, b: AnyPoint, predicate, tol: float = 1e-10) -> float:
    """Like :func:`first_param_on_segment` but for raw 2D/3D point pairs."""
    if predicate(a):
        return 0.0
    if not predicate(b):
        raise NoFlip("predicate constant on segment")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(lerp(a, b, mid)):
            hi = mid
        else:
            lo = mid
    return hi


class Polyline:
    """Ordered 2D or 3D polyline with per-vertex cumulative arc length."""

    def __init__(self, vertices: Sequence[AnyPoint]):
        vertices = tuple(vertices)
        if len(vertices) < 1:
            raise GeometryError("polyline needs at least one vertex")
        dims = {2 if isinstance(v, Point2) else 3 for v in vertices}
        if len(dims) != 1:
            raise MixedDimensionality("polyline mixes 2D and 3D vertices")
        self._dim = dims.pop()
        self._vertices = vertices
        cum = [0.0]
        for p, q in zip(vertices, vertices[1:]):
            cum.append(cum[-1] + p.dist(q))
        self._cumulative = tuple(cum)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def vertices(self) -> tuple:
        return self._vertices

    @property
    def cumulative_length(self) -> tuple:
        return self._cumulative

    def length(self) -> float:
        return self._cumulative[-1]

    def __len__(self) -> int:
        return len(self._vertices)

    def point_at(self, arclen: float) -> AnyPoint:
        """Point at a given arc length, clamped to the polyline's range."""
        cum = self._cumulative
        if arclen <= 0:
            return self._vertices[0]
        if arclen >= cum[-1]:
            return self._vertices[-1]
        # binary search for the containing piece
        lo, hi = 0, len(cum) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if cum[mid] <= arclen:
                lo = mid
            else:
                hi = mid
        piece = cum[hi] - cum[lo]
        u = 0.0 if piece <= 0 else (arclen - cum[lo]) / piece
        return lerp(self._vertices[lo], self._vertices[hi], u)

    def validate(self, rel_tol: float = 1e-12) -> None:
        """Check the cumulative-length bookkeeping invariant."""
        cum = self._cumulative
        for i, (p, q) in enumerate(zip(self._vertices, self._vertices[1:])):
            d = p.dist(q)
            got = cum[i + 1] - cum[i]
            if abs(got - d) > rel_tol * max(1.0, abs(d), abs(cum[i + 1])):
                raise GeometryError(f"cumulative length mismatch at piece {i}")
            if got < -rel_tol:
                raise GeometryError("cumulative length decreasing")
