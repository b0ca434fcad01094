"""Uniform-lattice discretisation of open sets and the ball operators on it.

Balls are represented by precomputed stencils: integer lattice offsets with
the fraction of each cell that lies inside the ball as weight (exact in 1-D,
sub-cell sampling in higher dimension). A stencil depends only on ``r / h``
and is shared by every center, so all ball averages for one radius are a
single pass over the nodes.
"""

from __future__ import annotations

import csv
import math
from functools import lru_cache
from typing import Callable

import numpy as np
from numba import njit

from .errors import DomainError, EmptyBallError, InputError
from .geometry import Shape, Shrunk, as_points

__all__ = [
    "GridDomain",
    "GridField",
    "build_domain",
    "interior_set",
    "ball_stencil",
    "min_ball_nodes",
    "admissible_radius",
    "ball_average",
    "sharp_average",
    "sharp_averages",
    "gradient_fd",
    "mollify",
    "bump_kernel",
]

_SUBCELLS = 16
# depth comparisons absorb roundoff in lattice coordinates
_DEPTH_TOL = 1e-9


def min_ball_nodes(n: int) -> int:
    return 8 * 2 ** (n - 1)


def admissible_radius(n: int, h: float) -> float:
    """Smallest radius whose ball holds ``min_ball_nodes(n)`` cells of measure."""
    return h * (min_ball_nodes(n) / math.pi ** (n / 2) * math.gamma(n / 2 + 1)) ** (1 / n)


class GridDomain:
    """Active nodes of the lattice ``origin + h * Z^n`` that lie inside ``shape``.

    The boundary distance of every active node comes from the shape's closed
    form, never from the node mask.
    """

    def __init__(self, shape: Shape, h: float, origin=None, counts=None):
        if not h > 0:
            raise InputError("grid spacing must be positive")
        self.shape = shape
        self.h = float(h)
        self.n = shape.dim
        lo, hi = shape.bbox()
        if origin is None:
            origin = lo
            counts = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
        self.origin = np.asarray(origin, dtype=float)
        self.lattice_shape = tuple(int(c) for c in counts)
        axes = [self.origin[i] + self.h * np.arange(self.lattice_shape[i]) for i in range(self.n)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        inside = np.flatnonzero(shape.contains(mesh))
        dist = shape.distance(mesh[inside])
        keep = dist > 1e-12 * self.h
        self.flat_index = inside[keep]
        self.points = mesh[self.flat_index]
        self.distance = dist[keep]
        if len(self.flat_index) == 0:
            raise DomainError("domain has no active nodes at this spacing")
        self.multi_index = np.stack(np.unravel_index(self.flat_index, self.lattice_shape), axis=1)
        self._lookup = np.full(int(np.prod(self.lattice_shape)), -1, dtype=np.int64)
        self._lookup[self.flat_index] = np.arange(len(self.flat_index))
        for arr in (self.points, self.distance, self.flat_index, self.multi_index, self._lookup):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.flat_index)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def inradius(self) -> float:
        return float(self.distance.max())

    def node_of(self, point) -> int:
        """Index of the active node nearest to ``point``."""
        p = as_points(point, self.n)[0]
        k = np.rint((p - self.origin) / self.h).astype(int)
        if np.any(k < 0) or np.any(k >= self.lattice_shape):
            raise DomainError(f"point {p} outside the lattice")
        idx = self._lookup[np.ravel_multi_index(tuple(k), self.lattice_shape)]
        if idx < 0:
            raise DomainError(f"point {p} is not an active node")
        return int(idx)

    def nodes_from_multi(self, multi: np.ndarray) -> np.ndarray:
        """Active-node indices for lattice multi-indices (``-1`` where inactive)."""
        multi = np.asarray(multi)
        ok = np.all((multi >= 0) & (multi < np.array(self.lattice_shape)), axis=1)
        out = np.full(len(multi), -1, dtype=np.int64)
        if ok.any():
            flat = np.ravel_multi_index(tuple(multi[ok].T), self.lattice_shape)
            out[ok] = self._lookup[flat]
        return out

    def restrict(self, delta: float) -> "GridDomain":
        """The interior set at depth ``delta`` on the same lattice."""
        return GridDomain(Shrunk(self.shape, delta), self.h, self.origin, self.lattice_shape)

    def padded(self, values: np.ndarray, pad: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat lattice array padded by ``pad`` nodes (NaN off the domain).

        Returns ``(flat_values, active_flat_positions, strides)``.
        """
        shape = tuple(s + 2 * pad for s in self.lattice_shape)
        flat_pos = np.ravel_multi_index(tuple((self.multi_index + pad).T), shape)
        out = np.full(int(np.prod(shape)), np.nan)
        out[flat_pos] = values
        strides = np.array([int(np.prod(shape[i + 1:])) for i in range(self.n)], dtype=np.int64)
        return out, flat_pos, strides

    def __repr__(self):
        return f"GridDomain(n={self.n}, h={self.h:g}, nodes={self.size})"


def build_domain(shape: Shape, h: float) -> GridDomain:
    return GridDomain(shape, h)


class GridField:
    """Values attached to the active nodes of a domain (scalar or vector)."""

    def __init__(self, domain: GridDomain, values):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != domain.size:
            raise InputError(f"field has {values.shape[0]} values for {domain.size} nodes")
        if not np.all(np.isfinite(values)):
            raise InputError("field values must be finite")
        self.domain = domain
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, domain: GridDomain, func: Callable[[np.ndarray], np.ndarray]):
        return cls(domain, func(domain.points))

    @property
    def components(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def magnitude(self) -> np.ndarray:
        """Pointwise absolute value (Euclidean length for vector fields)."""
        if self.values.ndim == 1:
            return np.abs(self.values)
        return np.linalg.norm(self.values, axis=1)

    def scaled(self, c: float) -> "GridField":
        return GridField(self.domain, c * self.values)

    def to_csv(self, path) -> None:
        cols = [f"x{i}" for i in range(self.domain.n)]
        vals = self.values.reshape(self.domain.size, -1)
        cols += ["value"] if vals.shape[1] == 1 else [f"value{k}" for k in range(vals.shape[1])]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for p, v in zip(self.domain.points, vals):
                writer.writerow([repr(float(c)) for c in p] + [repr(float(c)) for c in v])


def interior_set(domain: GridDomain, r: float) -> np.ndarray:
    """Node indices with boundary distance strictly greater than ``r``."""
    if r < 0:
        raise InputError("interior depth must be nonnegative")
    return np.flatnonzero(domain.distance > r + _DEPTH_TOL * domain.h)


@lru_cache(maxsize=4096)
def _stencil(n: int, radius_in_cells: float) -> tuple[np.ndarray, np.ndarray]:
    R = radius_in_cells
    kmax = int(math.ceil(R + 0.5))
    rng = np.arange(-kmax, kmax + 1)
    offsets = np.stack(np.meshgrid(*([rng] * n), indexing="ij"), axis=-1).reshape(-1, n)
    a = np.abs(offsets).astype(float)
    near = np.linalg.norm(np.maximum(a - 0.5, 0.0), axis=1)
    far = np.linalg.norm(a + 0.5, axis=1)
    w = np.where(far <= R, 1.0, 0.0)
    cut = (near < R) & (far > R)
    if n == 1:
        x = offsets[:, 0].astype(float)
        w = np.clip(np.minimum(x + 0.5, R) - np.maximum(x - 0.5, -R), 0.0, 1.0)
    elif cut.any():
        sub = (np.arange(_SUBCELLS) + 0.5) / _SUBCELLS - 0.5
        pts = np.stack(np.meshgrid(*([sub] * n), indexing="ij"), axis=-1).reshape(-1, n)
        for i in np.flatnonzero(cut):
            w[i] = np.mean(np.linalg.norm(offsets[i] + pts, axis=1) < R)
    keep = w > 0
    offsets, w = offsets[keep], w[keep]
    offsets.setflags(write=False)
    w.setflags(write=False)
    return offsets, w


def ball_stencil(n: int, h: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Lattice offsets and cell-in-ball fractions for ``B(0, radius)``."""
    if not radius > 0:
        raise InputError("ball radius must be positive")
    return _stencil(n, round(radius / h, 9))


@njit(cache=True)
def _weighted_stats(vals, centers, offs, w, mean_out, dev_out, want_dev):
    for i in range(centers.size):
        c = centers[i]
        s = 0.0
        sw = 0.0
        for k in range(offs.size):
            v = vals[c + offs[k]]
            if v == v:
                s += w[k] * v
                sw += w[k]
        m = s / sw
        mean_out[i] = m
        if want_dev:
            d = 0.0
            for k in range(offs.size):
                v = vals[c + offs[k]]
                if v == v:
                    d += w[k] * abs(v - m)
            dev_out[i] = d / sw


def _stencil_pass(field: GridField, nodes: np.ndarray, offsets, weights, want_dev: bool):
    dom = field.domain
    if field.values.ndim != 1:
        raise InputError("ball operators act on scalar fields")
    pad = int(np.abs(offsets).max()) + 1
    vals, flat_pos, strides = dom.padded(field.values, pad)
    flat_offs = offsets.astype(np.int64) @ strides
    mean = np.empty(len(nodes))
    dev = np.empty(len(nodes))
    _weighted_stats(vals, flat_pos[nodes].astype(np.int64), flat_offs, np.asarray(weights, float),
                    mean, dev, want_dev)
    return mean, dev


def _check_ball(dom: GridDomain, nodes: np.ndarray, radius: float, weights) -> None:
    if weights.sum() < min_ball_nodes(dom.n) - 1e-9:
        raise EmptyBallError(
            f"ball of radius {radius:g} holds {weights.sum():.2f} cells, "
            f"fewer than {min_ball_nodes(dom.n)} at h={dom.h:g}")
    if len(nodes) and np.any(dom.distance[nodes] <= radius + _DEPTH_TOL * dom.h):
        raise DomainError("ball is not contained in the domain")


def sharp_averages(field: GridField, radius: float, nodes=None):
    """Ball means and sharp averages for many centers at one radius.

    ``nodes`` defaults to the interior set at depth ``radius``. Returns
    ``(nodes, means, sharp)``.
    """
    dom = field.domain
    nodes = interior_set(dom, radius) if nodes is None else np.asarray(nodes, dtype=np.int64)
    offsets, weights = ball_stencil(dom.n, dom.h, radius)
    _check_ball(dom, nodes, radius, weights)
    if len(nodes) == 0:
        return nodes, np.empty(0), np.empty(0)
    mean, sharp = _stencil_pass(field, nodes, offsets, weights, True)
    return nodes, mean, sharp


def ball_average(field: GridField, center, radius: float) -> float:
    """Mean of the field over ``B(center, radius)``; the center snaps to its node."""
    node = field.domain.node_of(center)
    offsets, weights = ball_stencil(field.domain.n, field.domain.h, radius)
    _check_ball(field.domain, np.array([node]), radius, weights)
    mean, _ = _stencil_pass(field, np.array([node]), offsets, weights, False)
    return float(mean[0])


def sharp_average(field: GridField, center, radius: float) -> float:
    """Mean absolute deviation of the field from its ball mean."""
    _, _, sharp = sharp_averages(field, radius, [field.domain.node_of(center)])
    return float(sharp[0])


def gradient_fd(field: GridField) -> GridField:
    """Second-order finite-difference gradient.

    Central differences where both neighbours are active, one-sided
    three-point formulas next to the boundary.
    """
    dom = field.domain
    f = field.values
    grad = np.zeros((dom.size, dom.n))
    for axis in range(dom.n):
        shift = np.zeros(dom.n, dtype=int)
        shift[axis] = 1
        nb = {k: dom.nodes_from_multi(dom.multi_index + k * shift) for k in (-2, -1, 1, 2)}
        g = np.full(dom.size, np.nan)
        central = (nb[-1] >= 0) & (nb[1] >= 0)
        g[central] = (f[nb[1][central]] - f[nb[-1][central]]) / (2 * dom.h)
        fwd = ~central & (nb[1] >= 0) & (nb[2] >= 0)
        g[fwd] = (-3 * f[fwd] + 4 * f[nb[1][fwd]] - f[nb[2][fwd]]) / (2 * dom.h)
        bwd = ~central & ~fwd & (nb[-1] >= 0) & (nb[-2] >= 0)
        g[bwd] = (3 * f[bwd] - 4 * f[nb[-1][bwd]] + f[nb[-2][bwd]]) / (2 * dom.h)
        one = np.isnan(g) & (nb[1] >= 0)
        g[one] = (f[nb[1][one]] - f[one]) / dom.h
        one = np.isnan(g) & (nb[-1] >= 0)
        g[one] = (f[one] - f[nb[-1][one]]) / dom.h
        grad[:, axis] = np.nan_to_num(g)
    return GridField(dom, grad)


def bump_kernel(r: np.ndarray) -> np.ndarray:
    """Radial profile ``exp(-1 / (1 - r^2))`` on the unit ball, zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def mollify(field: GridField, delta: float, kernel: Callable = bump_kernel) -> GridField:
    """Discrete convolution with ``delta^{-n} G(x / delta)`` on the interior set at ``delta``.

    Kernel weights are renormalised to unit sum on the lattice.
    """
    dom = field.domain
    if delta < 2 * dom.h:
        raise InputError(f"mollifier radius {delta:g} below 2h = {2 * dom.h:g}")
    kmax = int(math.ceil(delta / dom.h))
    rng = np.arange(-kmax, kmax + 1)
    offsets = np.stack(np.meshgrid(*([rng] * dom.n), indexing="ij"), axis=-1).reshape(-1, dom.n)
    w = kernel(np.linalg.norm(offsets, axis=1) * dom.h / delta)
    keep = w > 0
    offsets, w = offsets[keep], w[keep] / w[keep].sum()
    sub = dom.restrict(delta)
    nodes = dom.nodes_from_multi(sub.multi_index)
    mean, _ = _stencil_pass(field, nodes, offsets, w, False)
    return GridField(sub, mean)
