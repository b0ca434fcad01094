"""Closed-form coefficient fields and test functions.

Both catalogs are keyed by name and built from JSON-style parameter dicts so
experiment configs can refer to them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError

__all__ = [
    "CoefficientField",
    "coefficient_from_json",
    "FunctionEntry",
    "function_entry",
    "function_from_json",
    "FUNCTION_NAMES",
]


def _vec(value, n: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size == 1 and n > 1:
        v = np.concatenate([v, np.zeros(n - 1)])
    if v.size != n:
        raise InputError(f"expected a vector of length {n}, got {v.size}")
    return v


@dataclass(frozen=True)
class CoefficientField:
    """A named closed-form spatial coefficient such as ``p(x)`` or ``a(x)``.

    ============== ======================================================
    expr           value at x
    ============== ======================================================
    constant       ``value``
    linear / x     ``offset + slope . x``
    sine           ``offset + amplitude * sin(frequency * x_1 + phase)``
    smoothed_step  ``low + (high - low) * (1 + tanh((x_1 - x0) / width)) / 2``
                   (a sharp jump ``chi_{x_1 > x0}`` when ``width == 0``)
    holder_bump    ``offset + amplitude * |x - x0|^alpha``
    log_holder     ``base + amplitude / log(e + 1 / |x - x0|)``
    ============== ======================================================
    """

    expr: str
    params: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.expr not in _COEFFICIENTS:
            raise InputError(f"unknown coefficient expression {self.expr!r}")

    @property
    def kwargs(self) -> dict:
        return dict(self.params)

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        if p.ndim < 2:
            p = p.reshape(-1, 1)
        return _COEFFICIENTS[self.expr](p, **self.kwargs)

    def bounds(self, points) -> tuple[float, float]:
        v = self(points)
        return float(v.min()), float(v.max())

    def to_json(self) -> dict:
        out = {"expr": self.expr}
        for k, v in self.params:
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def make(cls, expr: str, **params) -> "CoefficientField":
        frozen = tuple(sorted((k, tuple(v) if isinstance(v, (list, tuple, np.ndarray)) else v)
                              for k, v in params.items()))
        return cls(expr, frozen)


def _constant(p, value=1.0):
    return np.full(len(p), float(value))


def _linear(p, offset=0.0, slope=1.0):
    return offset + p @ _vec(slope, p.shape[1])


def _sine(p, offset=0.0, amplitude=1.0, frequency=1.0, phase=0.0):
    return offset + amplitude * np.sin(frequency * p[:, 0] + phase)


def _smoothed_step(p, x0=0.0, width=0.0, low=0.0, high=1.0):
    if width == 0:
        s = (p[:, 0] > x0).astype(float)
    else:
        s = 0.5 * (1 + np.tanh((p[:, 0] - x0) / width))
    return low + (high - low) * s


def _holder_bump(p, x0=0.0, alpha=0.5, amplitude=1.0, offset=0.0):
    r = np.linalg.norm(p - _vec(x0, p.shape[1]), axis=1)
    with np.errstate(divide="ignore"):
        return offset + amplitude * r ** alpha


def _log_holder(p, x0=0.0, base=2.0, amplitude=1.0):
    r = np.linalg.norm(p - _vec(x0, p.shape[1]), axis=1)
    with np.errstate(divide="ignore"):
        return base + amplitude / np.log(math.e + 1.0 / r)


_COEFFICIENTS: dict[str, Callable] = {
    "constant": _constant,
    "linear": _linear,
    "x": _linear,
    "sine": _sine,
    "smoothed_step": _smoothed_step,
    "holder_bump": _holder_bump,
    "log_holder": _log_holder,
}


def coefficient_from_json(spec) -> CoefficientField:
    if isinstance(spec, (int, float)):
        return CoefficientField.make("constant", value=float(spec))
    if not isinstance(spec, dict) or "expr" not in spec:
        raise InputError(f"coefficient spec must be a number or an object with 'expr': {spec!r}")
    params = {k: v for k, v in spec.items() if k != "expr"}
    return CoefficientField.make(spec["expr"], **params)


# ---------------------------------------------------------------- test functions


@dataclass(frozen=True)
class FunctionEntry:
    """A test function with its exact gradient.

    ``smoothness`` is one of ``smooth``, ``lipschitz``, ``sobolev`` or
    ``not_sobolev`` (relative to the quadratic growth used in the checks).
    ``hessian_bound`` bounds the second derivatives on the unit box and is
    ``inf`` for non-smooth entries.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    smoothness: str
    hessian_bound: float
    params: tuple = ()

    def __call__(self, points):
        return self.f(np.asarray(points, dtype=float))

    def gradient(self, points):
        return self.grad(np.asarray(points, dtype=float))

    def to_json(self) -> dict:
        out = {"name": self.name}
        out.update({k: list(v) if isinstance(v, tuple) else v for k, v in self.params})
        return out


def _e1(p, values):
    g = np.zeros_like(p)
    g[:, 0] = values
    return g


def _affine(offset=0.0, slope=1.0):
    def f(p):
        return offset + p @ _vec(slope, p.shape[1])

    def grad(p):
        return np.broadcast_to(_vec(slope, p.shape[1]), p.shape).copy()
    return f, grad, "smooth", 0.0


def _constant_fn(value=1.0):
    return (lambda p: np.full(len(p), float(value)), lambda p: np.zeros_like(p), "smooth", 0.0)


def _quadratic(center=0.0):
    def f(p):
        return np.sum((p - _vec(center, p.shape[1])) ** 2, axis=1)
    return f, lambda p: 2 * (p - _vec(center, p.shape[1])), "smooth", 2.0


def _sin_pi(frequency=1.0):
    k = math.pi * frequency
    return (lambda p: np.sin(k * p[:, 0]), lambda p: _e1(p, k * np.cos(k * p[:, 0])),
            "smooth", k * k)


def _wave(a=2.0, b=1.0):
    def f(p):
        return np.sin(a * p[:, 0]) * np.cos(b * p[:, 1]) + 0.5 * p[:, 0] * p[:, 1]

    def grad(p):
        return np.stack([a * np.cos(a * p[:, 0]) * np.cos(b * p[:, 1]) + 0.5 * p[:, 1],
                         -b * np.sin(a * p[:, 0]) * np.sin(b * p[:, 1]) + 0.5 * p[:, 0]], axis=1)
    return f, grad, "smooth", max(a, b) ** 2 + 0.5


def _gaussian(center=0.0, width=0.5):
    def f(p):
        return np.exp(-np.sum((p - _vec(center, p.shape[1])) ** 2, axis=1) / width ** 2)

    def grad(p):
        d = p - _vec(center, p.shape[1])
        return (-2 / width ** 2) * d * f(p)[:, None]
    return f, grad, "smooth", 2 / width ** 2 * 3


def _abs_power(center=0.5, gamma=1.0):
    def f(p):
        return np.abs(p[:, 0] - center) ** gamma

    def grad(p):
        d = p[:, 0] - center
        with np.errstate(divide="ignore", invalid="ignore"):
            g = gamma * np.sign(d) * np.abs(d) ** (gamma - 1)
        return _e1(p, np.where(d == 0, 0.0 if gamma >= 1 else np.inf, g))
    if gamma >= 1:
        tag = "smooth" if gamma >= 2 else "lipschitz"
    else:
        # |f'|^2 ~ |d|^{2 gamma - 2} is integrable iff gamma > 1/2
        tag = "sobolev" if gamma > 0.5 else "not_sobolev"
    return f, grad, tag, (math.inf if gamma < 2 else gamma * (gamma - 1))


_FUNCTIONS: dict[str, Callable] = {
    "constant": _constant_fn,
    "linear": _affine,
    "affine": _affine,
    "quadratic": _quadratic,
    "sin_pi": _sin_pi,
    "wave": _wave,
    "gaussian": _gaussian,
    "abs_power": _abs_power,
}

FUNCTION_NAMES = tuple(_FUNCTIONS)


def function_entry(name: str, **params) -> FunctionEntry:
    if name not in _FUNCTIONS:
        raise InputError(f"unknown catalog function {name!r}")
    f, grad, tag, bound = _FUNCTIONS[name](**params)
    frozen = tuple(sorted((k, tuple(v) if isinstance(v, (list, np.ndarray)) else v)
                          for k, v in params.items()))
    return FunctionEntry(name, f, grad, tag, bound, frozen)


def function_from_json(spec) -> FunctionEntry:
    if isinstance(spec, str):
        return function_entry(spec)
    if not isinstance(spec, dict) or "name" not in spec:
        raise InputError("function spec must be a catalog name or an object with 'name'")
    return function_entry(spec["name"], **{k: v for k, v in spec.items() if k != "name"})
