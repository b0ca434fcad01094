"""Generalized weak Phi-functions phi(x, t).

A model is evaluated on an array of points (shape ``(m, n)``) and an array
of ``t`` values whose leading axis matches the points, or on ``points=None``
for x-independent families. Values live in ``[0, inf]``; ``inf`` is an
ordinary float infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import CoefficientField, coefficient_from_json
from .errors import DomainError, EmptyBallError, InputError
from .geometry import Shape, as_points, shape_from_json
from .grid import GridDomain

__all__ = [
    "PhiModel",
    "Power",
    "VariableExponent",
    "DoublePhase",
    "LogPerturbedExponent",
    "OrliczTable",
    "StepIndicator",
    "ConvexifiedModel",
    "phi_from_json",
    "eval_phi",
    "inverse",
    "left_inverse",
    "ball_nodes",
    "phi_sup_ball",
    "phi_inf_ball",
    "inverse_of_inf_envelope",
    "convexify",
    "EquivalenceResult",
    "equivalence_constant",
    "default_t_grid",
    "monotonicity_constant",
]

BRACKET_LIMIT = 1e12
BISECTION_STEPS = 80
TABLE_RANGE = (1e-6, 1e6)
TABLE_NODES = 4096


def default_t_grid() -> np.ndarray:
    return np.geomspace(*TABLE_RANGE, TABLE_NODES)


def _broadcast(coef: np.ndarray, t: np.ndarray) -> np.ndarray:
    if t.ndim <= 1:
        return coef
    return coef.reshape(coef.shape + (1,) * (t.ndim - 1))


class PhiModel:
    """Base class; subclasses implement ``_evaluate(points, t)``."""

    family = "abstract"
    x_dependent = False
    domain: Shape | None = None

    def _evaluate(self, points, t):
        raise NotImplementedError

    @property
    def monotonicity_constant(self) -> float:
        return 1.0

    def dim(self) -> int:
        return self.domain.dim if self.domain is not None else 1

    def _points(self, points):
        if points is None:
            if self.x_dependent:
                raise DomainError(f"{self.family} model needs evaluation points")
            return None
        p = as_points(points, points.shape[-1] if np.ndim(points) == 2 else self.dim())
        if self.domain is not None and self.x_dependent:
            if not np.all(self.domain.contains(p, closed=True)):
                bad = p[~self.domain.contains(p, closed=True)][0]
                raise DomainError(f"point {bad} outside the coefficient-field domain")
        return p

    def evaluate(self, points, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise InputError("phi is evaluated at t >= 0 only")
        p = self._points(points)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = np.asarray(self._evaluate(p, t), dtype=float)
        return np.where(t == 0, 0.0, out)

    __call__ = evaluate

    def inverse(self, points, s) -> np.ndarray:
        p = self._points(points)
        s = np.asarray(s, dtype=float)
        if p is not None and s.ndim == 2:
            # one row of s per point
            p = np.repeat(p, s.shape[1], axis=0)
        return left_inverse(lambda t: self.evaluate(p, t), s)

    def exponent_bounds(self, points=None) -> tuple[float, float] | None:
        """Nominal (lower, upper) growth exponents, when the family has them."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError

    def _domain_json(self, out: dict) -> dict:
        if self.domain is not None:
            out["domain"] = self.domain.to_json()
        return out


def _check_exponent(p: float, name="p"):
    if not p >= 1:
        raise InputError(f"exponent {name}={p} < 1 breaks the weak Phi-function property")


@dataclass(frozen=True, eq=False)
class Power(PhiModel):
    p: float
    family = "power"

    def __post_init__(self):
        _check_exponent(self.p)

    def _evaluate(self, points, t):
        return t ** self.p

    def inverse(self, points, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("inverse is defined for s >= 0")
        return s ** (1.0 / self.p)

    def exponent_bounds(self, points=None):
        return self.p, self.p

    def to_json(self):
        return {"family": "power", "p": self.p}


@dataclass(frozen=True, eq=False)
class VariableExponent(PhiModel):
    p: CoefficientField
    domain: Shape | None = None
    family = "variable_exponent"
    x_dependent = True

    def _evaluate(self, points, t):
        return t ** _broadcast(self.p(points), t)

    def inverse(self, points, s):
        p = self._points(points)
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("inverse is defined for s >= 0")
        return s ** (1.0 / _broadcast(self.p(p), s))

    def exponent_bounds(self, points=None):
        return self.p.bounds(points)

    def to_json(self):
        return self._domain_json({"family": "variable_exponent", "p": self.p.to_json()})


@dataclass(frozen=True, eq=False)
class DoublePhase(PhiModel):
    """``t^p + a(x) t^q`` with ``a >= 0``."""

    p: float
    q: float
    a: CoefficientField
    domain: Shape | None = None
    family = "double_phase"
    x_dependent = True

    def __post_init__(self):
        _check_exponent(self.p)
        if self.q < self.p:
            raise InputError("double phase needs q >= p")

    def _evaluate(self, points, t):
        a = _broadcast(self.a(points), t)
        if np.any(a < 0):
            raise InputError("double phase weight a(x) must be nonnegative")
        return t ** self.p + a * t ** self.q

    def exponent_bounds(self, points=None):
        if points is not None and self.a.bounds(points)[1] == 0:
            return self.p, self.p
        return self.p, self.q

    def to_json(self):
        return self._domain_json({"family": "double_phase", "p": self.p, "q": self.q,
                                  "a": self.a.to_json()})


@dataclass(frozen=True, eq=False)
class LogPerturbedExponent(PhiModel):
    """``t^{p(x)} log(e + t)``."""

    p: CoefficientField
    domain: Shape | None = None
    family = "log_perturbed"
    x_dependent = True

    def _evaluate(self, points, t):
        return t ** _broadcast(self.p(points), t) * np.log(math.e + t)

    def exponent_bounds(self, points=None):
        lo, hi = self.p.bounds(points)
        # t log(e+t) / log(e+t)' stays below 1 + 1/e
        return lo, hi + 1.0 / math.e

    def to_json(self):
        return self._domain_json({"family": "log_perturbed", "p": self.p.to_json()})


def monotonicity_constant(t: np.ndarray, values: np.ndarray) -> float:
    """Smallest c with ``g(s) <= c g(t)`` for ``s <= t`` on samples, ``g = phi / t``."""
    g = values / t
    run = np.maximum.accumulate(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(run > 0, run / g, 1.0)
    return float(np.max(ratio))


class OrliczTable(PhiModel):
    """x-independent phi given by samples on a geometric t-grid.

    Interpolation is piecewise linear; outside the grid the end slopes in
    log-log coordinates continue as power-law tails.
    """

    family = "orlicz_table"

    def __init__(self, t, values):
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise InputError("table grid must be positive and strictly increasing")
        if values.shape != t.shape or np.any(values <= 0) or np.any(np.diff(values) < 0):
            raise InputError("table values must be positive and nondecreasing")
        self.t = t
        self.values = values
        self.low_slope = math.log(values[1] / values[0]) / math.log(t[1] / t[0])
        self.high_slope = math.log(values[-1] / values[-2]) / math.log(t[-1] / t[-2])
        self._c = monotonicity_constant(t, values)

    @classmethod
    def from_function(cls, func, t=None):
        t = default_t_grid() if t is None else np.asarray(t, dtype=float)
        return cls(t, func(t))

    @property
    def monotonicity_constant(self):
        return self._c

    def _evaluate(self, points, t):
        out = np.interp(t, self.t, self.values)
        low = t < self.t[0]
        high = t > self.t[-1]
        out = np.where(low, self.values[0] * (t / self.t[0]) ** self.low_slope, out)
        return np.where(high, self.values[-1] * (t / self.t[-1]) ** self.high_slope, out)

    def exponent_bounds(self, points=None):
        slopes = np.diff(np.log(self.values)) / np.diff(np.log(self.t))
        return float(slopes.min()), float(slopes.max())

    def to_json(self):
        return {"family": "orlicz_table", "t": self.t.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class StepIndicator(PhiModel):
    """0 below ``threshold``, +inf from ``threshold`` on."""

    threshold: float = 1.0
    family = "step"

    def _evaluate(self, points, t):
        return np.where(t < self.threshold, 0.0, np.inf)

    def inverse(self, points, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("inverse is defined for s >= 0")
        return np.where(s == 0, 0.0, self.threshold)

    def to_json(self):
        return {"family": "step", "threshold": self.threshold}


class ConvexifiedModel(PhiModel):
    """``psi(x, t) = int_0^t phi(x, s) / s ds`` by trapezoidal quadrature on ``t_grid``."""

    family = "convexified"

    def __init__(self, base: PhiModel, t_grid):
        self.base = base
        self.t = np.asarray(t_grid, dtype=float)
        self.x_dependent = base.x_dependent
        self.domain = base.domain

    def table(self, points) -> np.ndarray:
        t = self.t
        phi = self.base.evaluate(points, np.broadcast_to(t, (1 if points is None else len(points), len(t))))
        g = phi / t
        # below the grid phi is taken as a power law, integrated exactly
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.log(phi[:, 1] / phi[:, 0]) / math.log(t[1] / t[0])
        head = np.where((phi[:, 0] > 0) & (slope > 0), phi[:, 0] / np.where(slope > 0, slope, 1.0), 0.0)
        steps = 0.5 * (g[:, 1:] + g[:, :-1]) * np.diff(t)
        return np.concatenate([head[:, None], head[:, None] + np.cumsum(steps, axis=1)], axis=1)

    def _evaluate(self, points, t):
        tab = self.table(points)
        tt = np.asarray(t, dtype=float)
        if points is None:
            return OrliczTable(self.t, tab[0])._evaluate(None, tt)
        rows = np.arange(len(tab)).reshape((-1,) + (1,) * max(tt.ndim - 1, 0))
        idx = np.clip(np.searchsorted(self.t, tt) - 1, 0, len(self.t) - 2)
        t0, t1 = self.t[idx], self.t[idx + 1]
        v0, v1 = tab[rows, idx], tab[rows, idx + 1]
        lin = v0 + (v1 - v0) * (tt - t0) / (t1 - t0)
        lo_slope = np.log(tab[:, 1] / tab[:, 0]) / math.log(self.t[1] / self.t[0])
        hi_slope = np.log(tab[:, -1] / tab[:, -2]) / math.log(self.t[-1] / self.t[-2])
        low = tab[rows, 0] * (tt / self.t[0]) ** _broadcast(lo_slope, tt)
        high = tab[rows, -1] * (tt / self.t[-1]) ** _broadcast(hi_slope, tt)
        return np.where(tt < self.t[0], low, np.where(tt > self.t[-1], high, lin))

    def to_json(self):
        return {"family": "convexified", "base": self.base.to_json(),
                "t_grid": [float(self.t[0]), float(self.t[-1]), len(self.t)]}


def phi_from_json(spec: dict) -> PhiModel:
    """Build a model from ``{"family": ..., <parameters>}``."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise InputError("model spec must be an object with a 'family' field")
    fam = spec["family"]
    domain = shape_from_json(spec["domain"]) if "domain" in spec else None
    try:
        if fam == "power":
            return Power(float(spec["p"]))
        if fam == "variable_exponent":
            return VariableExponent(coefficient_from_json(spec["p"]), domain)
        if fam == "double_phase":
            return DoublePhase(float(spec["p"]), float(spec["q"]), coefficient_from_json(spec["a"]), domain)
        if fam == "log_perturbed":
            return LogPerturbedExponent(coefficient_from_json(spec["p"]), domain)
        if fam == "orlicz_table":
            return OrliczTable(spec["t"], spec["values"])
        if fam == "step":
            return StepIndicator(float(spec.get("threshold", 1.0)))
        if fam == "convexified":
            lo, hi, k = spec["t_grid"]
            return ConvexifiedModel(phi_from_json(spec["base"]), np.geomspace(lo, hi, int(k)))
    except KeyError as exc:
        raise InputError(f"model family {fam!r} is missing parameter {exc}") from None
    raise InputError(f"unknown model family {fam!r}")


# ------------------------------------------------------------------ operations


def eval_phi(model: PhiModel, x, t):
    """phi(x, t) for a single point (``x`` may be ``None`` for x-free models)."""
    pts = None if x is None else np.atleast_2d(np.asarray(x, dtype=float)).reshape(1, -1)
    out = model.evaluate(pts, np.asarray([t], dtype=float))
    return float(out[0])


def left_inverse(func, s, bracket_limit: float = BRACKET_LIMIT, steps: int = BISECTION_STEPS):
    """``inf{t >= 0 : func(t) >= s}`` for increasing ``func``, elementwise in ``s``.

    The bracket starts at ``[0, 1]`` and doubles its upper end; targets that
    are not reached below ``bracket_limit`` give ``inf``. Bisection then runs
    on a bracket with positive lower end so the result has relative accuracy
    ``2**-steps``.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("inverse is defined for s >= 0")
    shape = s.shape
    s = s.ravel()
    out = np.zeros_like(s)
    active = s > 0
    if not active.any():
        return out.reshape(shape)
    ss = s[active]
    hi = np.ones_like(ss)
    reached = func(hi.reshape(-1)) >= ss
    while not reached.all():
        grow = ~reached & (hi <= bracket_limit)
        if not grow.any():
            break
        hi[grow] *= 2.0
        reached = func(hi) >= ss
    for _ in range(2000):
        shrink = reached & (hi > 1e-300)
        if not shrink.any():
            break
        ok = np.zeros_like(reached)
        ok[shrink] = func(hi / 2)[shrink] >= ss[shrink]
        if not ok.any():
            break
        hi[ok] /= 2.0
    lo = hi / 2
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        ok = func(mid) >= ss
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    out[active] = np.where(reached, hi, np.inf)
    return out.reshape(shape)


def inverse(model: PhiModel, x, s):
    """Left-continuous generalized inverse in t at the point ``x``."""
    pts = None if x is None else np.atleast_2d(np.asarray(x, dtype=float)).reshape(1, -1)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if pts is None:
        out = model.inverse(None, s_arr)
    else:
        out = model.inverse(np.repeat(pts, len(s_arr), axis=0), s_arr)
    out = np.asarray(out, dtype=float).reshape(s_arr.shape)
    return float(out[0]) if np.ndim(s) == 0 else out


def ball_nodes(domain: GridDomain, center, radius: float) -> np.ndarray:
    """Active nodes in the closed ball (the discrete stand-in for Omega ∩ B)."""
    if not radius > 0:
        raise InputError("ball radius must be positive")
    c = np.asarray(center, dtype=float).reshape(-1)
    d = np.linalg.norm(domain.points - c, axis=1)
    nodes = np.flatnonzero(d <= radius * (1 + 1e-12))
    if len(nodes) == 0:
        raise EmptyBallError(f"ball B({c}, {radius:g}) contains no active node")
    return nodes


def _envelope(model, domain, center, radius, t, reducer):
    nodes = ball_nodes(domain, center, radius)
    t = np.asarray(t, dtype=float)
    if not model.x_dependent:
        return model.evaluate(None, t)
    pts = domain.points[nodes]
    vals = model.evaluate(pts, np.broadcast_to(t.reshape(1, -1), (len(pts), t.size)))
    return reducer(vals, axis=0).reshape(t.shape)


def phi_sup_ball(model: PhiModel, domain: GridDomain, center, radius: float, t):
    """Node-wise supremum of phi(., t) over the ball."""
    out = _envelope(model, domain, center, radius, t, np.max)
    return float(out) if np.ndim(out) == 0 else out


def phi_inf_ball(model: PhiModel, domain: GridDomain, center, radius: float, t):
    """Node-wise infimum of phi(., t) over the ball."""
    out = _envelope(model, domain, center, radius, t, np.min)
    return float(out) if np.ndim(out) == 0 else out


def inverse_of_inf_envelope(model, domain, center, radius, s):
    """Generalized inverse of ``t -> phi_inf_ball(t)``, computed by bisection."""
    return left_inverse(lambda t: np.atleast_1d(phi_inf_ball(model, domain, center, radius, t)), s)


def convexify(model: PhiModel, t_grid=None) -> PhiModel:
    """Convex minorant-type model ``psi(x, t) = int_0^t phi(x, s)/s ds``.

    For x-independent models the result is an :class:`OrliczTable`.
    """
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 3 or np.any(np.diff(t) <= 0):
        raise InputError("t_grid must be strictly increasing with at least 3 nodes")
    if not 0 < t[0] <= 1e-3:
        raise InputError("t_grid must start in (0, 1e-3]")
    conv = ConvexifiedModel(model, t)
    if model.x_dependent:
        return conv
    return OrliczTable(t, conv.table(None)[0])


@dataclass
class EquivalenceResult:
    equivalent: bool
    constant: float | None
    grid_constant: float | None
    witness: dict | None = None


def equivalence_constant(model_a: PhiModel, model_b: PhiModel, x_samples, t_samples,
                         l_max: float = 1e3, per_decade: int = 64, rtol: float = 1e-12) -> EquivalenceResult:
    """Smallest L with ``B(x, t/L) <= A(x, t) <= B(x, L t)`` on the samples.

    The geometric grid (``per_decade`` points per decade up to ``l_max``)
    locates the first feasible L; bisection in log L then sharpens it.
    """
    t = np.asarray(t_samples, dtype=float).reshape(1, -1)
    x_dep = model_a.x_dependent or model_b.x_dependent
    pts = np.asarray(x_samples, dtype=float) if x_dep else None
    m = 1 if pts is None else len(pts)
    tt = np.broadcast_to(t, (m, t.shape[1]))
    a = model_a.evaluate(pts if model_a.x_dependent else None, tt)

    def feasible(L):
        lower = model_b.evaluate(pts if model_b.x_dependent else None, tt / L)
        upper = model_b.evaluate(pts if model_b.x_dependent else None, tt * L)
        return bool(np.all(lower <= a * (1 + rtol)) and np.all(a <= upper * (1 + rtol)))

    grid = 10.0 ** (np.arange(0, int(round(per_decade * math.log10(l_max))) + 1) / per_decade)
    prev = None
    for L in grid:
        if feasible(L):
            if prev is None:
                return EquivalenceResult(True, float(L), float(L))
            lo, hi = math.log(prev), math.log(L)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if feasible(math.exp(mid)):
                    hi = mid
                else:
                    lo = mid
            return EquivalenceResult(True, math.exp(hi), float(L))
        prev = L
    lower = model_b.evaluate(pts if model_b.x_dependent else None, tt / l_max)
    upper = model_b.evaluate(pts if model_b.x_dependent else None, tt * l_max)
    bad = np.argwhere((lower > a * (1 + rtol)) | (a > upper * (1 + rtol)))[0]
    witness = {"t": float(tt[tuple(bad)]), "A": float(a[tuple(bad)])}
    if pts is not None:
        witness["x"] = pts[bad[0]].tolist()
    return EquivalenceResult(False, None, None, witness)
