"""Open sets in R^n with closed-form distance to the boundary.

Every shape answers two questions for an array of points of shape ``(m, n)``:
``contains`` (membership in the open set) and ``distance`` (Euclidean
distance to the boundary, meaningful for points inside the set).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "Shape",
    "Interval",
    "Box",
    "Disk",
    "Union",
    "Shrunk",
    "shape_from_json",
]

_ARC_SEGMENTS = 4096
_CHUNK = 4_000_000


def as_points(points, dim: int) -> np.ndarray:
    """Coerce scalars, 1-D arrays or ``(m, n)`` arrays to shape ``(m, dim)``."""
    p = np.asarray(points, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1, 1)
    if p.ndim == 1:
        p = p.reshape(-1, 1) if dim == 1 else p.reshape(1, -1)
    if p.shape[-1] != dim:
        raise InputError(f"points have dimension {p.shape[-1]}, expected {dim}")
    return p


class Shape:
    dim: int

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def contains(self, points, closed: bool = False) -> np.ndarray:
        raise NotImplementedError

    def distance(self, points) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))


@dataclass(frozen=True)
class Interval(Shape):
    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise InputError(f"empty interval ({self.a}, {self.b})")

    dim = 1

    def bbox(self):
        return np.array([self.a]), np.array([self.b])

    def contains(self, points, closed=False):
        x = as_points(points, 1)[:, 0]
        if closed:
            return (x >= self.a) & (x <= self.b)
        return (x > self.a) & (x < self.b)

    def distance(self, points):
        x = as_points(points, 1)[:, 0]
        return np.minimum(x - self.a, self.b - x)

    def to_json(self):
        return {"type": "interval", "bounds": [self.a, self.b]}


@dataclass(frozen=True)
class Box(Shape):
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or not all(h > l for l, h in zip(self.lo, self.hi)):
            raise InputError(f"degenerate box {self.lo} x {self.hi}")

    @property
    def dim(self):
        return len(self.lo)

    def bbox(self):
        return np.array(self.lo, dtype=float), np.array(self.hi, dtype=float)

    def contains(self, points, closed=False):
        p = as_points(points, self.dim)
        lo, hi = self.bbox()
        if closed:
            return np.all((p >= lo) & (p <= hi), axis=1)
        return np.all((p > lo) & (p < hi), axis=1)

    def distance(self, points):
        p = as_points(points, self.dim)
        lo, hi = self.bbox()
        return np.min(np.minimum(p - lo, hi - p), axis=1)

    def to_json(self):
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Disk(Shape):
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError("disk radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    def bbox(self):
        c = np.array(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def contains(self, points, closed=False):
        d = self.distance(points)
        return d >= 0 if closed else d > 0

    def distance(self, points):
        p = as_points(points, self.dim)
        return self.radius - np.linalg.norm(p - np.array(self.center), axis=1)

    def to_json(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}


def _segment_distance(points: np.ndarray, seg: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest of the segments ``seg[s] = (a, b)``."""
    out = np.full(len(points), np.inf)
    if len(seg) == 0:
        return out
    a = seg[:, 0, :]
    ab = seg[:, 1, :] - a
    ab2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    step = max(1, _CHUNK // len(seg))
    for start in range(0, len(points), step):
        p = points[start:start + step, None, :]
        u = np.clip(np.einsum("psj,sj->ps", p - a, ab) / ab2, 0.0, 1.0)
        nearest = a + u[..., None] * ab
        out[start:start + step] = np.sqrt(np.min(np.sum((p - nearest) ** 2, axis=-1), axis=1))
    return out


def _covered_params(a: np.ndarray, b: np.ndarray, part: Shape) -> tuple[float, float] | None:
    """Open parameter interval of the segment a + u (b - a) inside ``part``."""
    d = b - a
    if isinstance(part, Box):
        lo, hi = part.bbox()
        u0, u1 = -np.inf, np.inf
        for k in range(2):
            if abs(d[k]) < 1e-15:
                if not lo[k] < a[k] < hi[k]:
                    return None
                continue
            s0, s1 = sorted(((lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]))
            u0, u1 = max(u0, s0), min(u1, s1)
    elif isinstance(part, Disk):
        c = np.array(part.center)
        qa, qb = d @ d, 2 * d @ (a - c)
        qc = (a - c) @ (a - c) - part.radius ** 2
        disc = qb * qb - 4 * qa * qc
        if disc <= 0:
            return None
        root = np.sqrt(disc)
        u0, u1 = (-qb - root) / (2 * qa), (-qb + root) / (2 * qa)
    else:
        raise InputError(f"unsupported union component {type(part).__name__}")
    u0, u1 = max(u0, 0.0), min(u1, 1.0)
    return (u0, u1) if u1 > u0 else None


def _subtract(covers: list[tuple[float, float]]) -> list[tuple[float, float]]:
    kept, cursor = [], 0.0
    for u0, u1 in sorted(covers):
        if u0 > cursor:
            kept.append((cursor, u0))
        cursor = max(cursor, u1)
    if cursor < 1.0:
        kept.append((cursor, 1.0))
    return kept


@dataclass(frozen=True)
class Union(Shape):
    """Union of open components; the boundary is assembled piecewise.

    Box edges are clipped exactly against the other components; circle
    boundaries are polygonised with ``_ARC_SEGMENTS`` chords when they take
    part in a union (chord sag is below ``radius * 3e-7``).
    """

    parts: tuple[Shape, ...]

    def __post_init__(self):
        if not self.parts:
            raise InputError("empty union")
        if len({p.dim for p in self.parts}) != 1:
            raise InputError("union components differ in dimension")
        object.__setattr__(self, "_pieces", self._boundary_pieces())

    @property
    def dim(self):
        return self.parts[0].dim

    def bbox(self):
        los, his = zip(*(p.bbox() for p in self.parts))
        return np.min(los, axis=0), np.max(his, axis=0)

    def contains(self, points, closed=False):
        return np.any([p.contains(points, closed) for p in self.parts], axis=0)

    def _others_contain(self, pts: np.ndarray, skip: int) -> np.ndarray:
        inside = np.zeros(len(pts), dtype=bool)
        for j, other in enumerate(self.parts):
            if j != skip:
                inside |= other.contains(pts)
        return inside

    def _boundary_pieces(self):
        if self.dim == 1:
            ends = []
            for i, part in enumerate(self.parts):
                lo, hi = part.bbox()
                for e in (lo[0], hi[0]):
                    if not self._others_contain(np.array([[e]]), i)[0]:
                        ends.append(e)
            return np.array(ends)
        segments = []
        for i, part in enumerate(self.parts):
            if isinstance(part, Box):
                (x0, y0), (x1, y1) = part.bbox()
                corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
                edges = [(np.array(corners[k]), np.array(corners[(k + 1) % 4])) for k in range(4)]
                for a, b in edges:
                    covers = [c for j, other in enumerate(self.parts) if j != i
                              for c in [_covered_params(a, b, other)] if c is not None]
                    for u0, u1 in _subtract(covers):
                        segments.append((a + u0 * (b - a), a + u1 * (b - a)))
            elif isinstance(part, Disk):
                theta = np.linspace(0.0, 2 * np.pi, _ARC_SEGMENTS + 1)
                c = np.array(part.center)
                ring = c + part.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
                mids = 0.5 * (ring[1:] + ring[:-1])
                keep = ~self._others_contain(mids, i)
                segments.extend(zip(ring[:-1][keep], ring[1:][keep]))
            else:
                raise InputError(f"unsupported union component {type(part).__name__}")
        return np.array(segments, dtype=float).reshape(-1, 2, 2)

    def distance(self, points):
        if len(self.parts) == 1:
            return self.parts[0].distance(points)
        p = as_points(points, self.dim)
        if self.dim == 1:
            return np.min(np.abs(p[:, :1] - self._pieces[None, :]), axis=1)
        return _segment_distance(p, self._pieces)

    def to_json(self):
        return {"type": "union", "parts": [p.to_json() for p in self.parts]}


@dataclass(frozen=True)
class Shrunk(Shape):
    """The interior set ``{x in base : dist(x, boundary) > delta}``."""

    base: Shape
    delta: float

    @property
    def dim(self):
        return self.base.dim

    def bbox(self):
        lo, hi = self.base.bbox()
        return lo + self.delta, hi - self.delta

    def contains(self, points, closed=False):
        inside = self.base.contains(points, closed)
        d = np.where(inside, self.base.distance(points), -np.inf)
        return inside & ((d >= self.delta) if closed else (d > self.delta))

    def distance(self, points):
        return self.base.distance(points) - self.delta

    def to_json(self):
        return {"type": "shrunk", "base": self.base.to_json(), "delta": self.delta}


def shape_from_json(spec: dict, max_dim: int = 2) -> Shape:
    """Build a shape from its JSON description; dimensions above ``max_dim`` are rejected."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise InputError("domain spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "interval":
        a, b = spec["bounds"]
        shape: Shape = Interval(float(a), float(b))
    elif kind == "box":
        shape = Box(tuple(map(float, spec["lo"])), tuple(map(float, spec["hi"])))
    elif kind == "disk":
        shape = Disk(tuple(map(float, spec["center"])), float(spec["radius"]))
    elif kind == "union":
        shape = Union(tuple(shape_from_json(p, max_dim) for p in spec["parts"]))
    elif kind == "shrunk":
        shape = Shrunk(shape_from_json(spec["base"], max_dim), float(spec["delta"]))
    else:
        raise InputError(f"unknown domain type {kind!r}")
    if not 1 <= shape.dim <= max_dim:
        raise InputError(f"domain dimension {shape.dim} not supported (max {max_dim})")
    return shape


def unit_ball_volume(n: int) -> float:
    from math import gamma, pi
    return pi ** (n / 2) / gamma(n / 2 + 1)


def ball_volume(n: int, radius: float | Sequence[float]):
    return unit_ball_volume(n) * np.asarray(radius, dtype=float) ** n
