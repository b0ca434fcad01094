"""Generalized Orlicz modular and Luxemburg quasi-norm of grid fields."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, InputError, UnboundedNormError
from .grid import GridField
from .phi import PhiModel

__all__ = ["modular", "modular_values", "luxemburg_norm", "unit_ball_scale"]

DEFAULT_TOL = 1e-6
MAX_ITER = 200
LAMBDA_LIMIT = 1e12


def modular_values(model: PhiModel, points, magnitudes: np.ndarray, weight: float) -> float:
    """``sum phi(x, |f(x)|) * weight`` with zero magnitudes contributing zero."""
    mags = np.asarray(magnitudes, dtype=float)
    if mags.size == 0:
        return 0.0
    vals = model.evaluate(points if model.x_dependent else None, mags)
    vals = np.where(mags == 0, 0.0, vals)
    if np.any(np.isinf(vals)):
        return float("inf")
    return float(np.sum(vals) * weight)


def modular(model: PhiModel, field: GridField) -> float:
    """Midpoint-rule modular ``int phi(x, |f(x)|) dx`` over the active nodes."""
    dom = field.domain
    return modular_values(model, dom.points, field.magnitude(), dom.cell_volume)


def unit_ball_scale(rho: Callable[[float], float], tol: float = DEFAULT_TOL,
                    max_iter: int = MAX_ITER, start: float = 1.0) -> float:
    """``inf{lam > 0 : rho(lam) <= 1}`` for nonincreasing ``rho``.

    The bracket is found by doubling or halving from ``lam = start``; bisection
    stops once the bracket width is at most ``tol * lam`` and the feasible
    upper end is returned, so ``rho(result) <= 1`` always holds.
    """
    if not tol > 0:
        raise InputError("tolerance must be positive")
    lam = float(start) if start > 0 and math.isfinite(start) else 1.0
    iterations = 0
    if rho(lam) <= 1:
        hi = lam
        while rho(hi / 2) <= 1:
            hi /= 2
            iterations += 1
            if hi < 1e-300 or iterations > 4 * MAX_ITER:
                return 0.0
        lo = hi / 2
    else:
        lo = lam
        while rho(lo * 2) > 1:
            lo *= 2
            if lo > LAMBDA_LIMIT * max(lam, 1.0):
                raise UnboundedNormError("modular stays above 1 for every scale up to 1e12 times the field maximum")
        hi = lo * 2
    for _ in range(max_iter):
        if hi - lo <= tol * hi:
            return hi
        mid = 0.5 * (lo + hi)
        if rho(mid) <= 1:
            hi = mid
        else:
            lo = mid
    raise ConvergenceFailure(f"norm bisection did not reach tol={tol:g} in {max_iter} steps")


def luxemburg_norm(model: PhiModel, field: GridField, tol: float = DEFAULT_TOL) -> float:
    """Luxemburg quasi-norm ``inf{lam > 0 : modular(f / lam) <= 1}``."""
    dom = field.domain
    mags = field.magnitude()
    if not np.any(mags):
        return 0.0
    # bracket lam = top * mu so tiny or huge fields never under- or overflow
    top = float(mags.max())
    unit = mags / top
    mu = unit_ball_scale(lambda m: modular_values(model, dom.points, unit / m, dom.cell_volume), tol)
    return top * mu
