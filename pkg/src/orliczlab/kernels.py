"""Radial kernel families psi_eps with unit mass concentrating at r = 0."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InputError

__all__ = ["KernelSchedule", "FAMILIES"]

FAMILIES = ("uniform", "exponential", "gagliardo")


@dataclass(frozen=True)
class KernelSchedule:
    """A kernel family, a decreasing eps sequence and the radial rule size.

    * ``uniform``: ``psi_eps = 1/eps`` on ``(0, eps)``
    * ``exponential``: ``psi_eps(r) = exp(-r/eps) / eps``
    * ``gagliardo``: ``psi_eps(r) = eps r^(eps-1)`` on ``(0, 1)``
    """

    family: str
    eps: tuple[float, ...]
    r_nodes: int = 64

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}")
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        if not eps or any(e <= 0 for e in eps):
            raise InputError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise InputError("eps sequence must be strictly decreasing")
        if self.family == "gagliardo" and eps[0] >= 1:
            raise InputError("gagliardo kernel needs eps < 1")
        if self.r_nodes < 2:
            raise InputError("need at least two radial nodes")

    def density(self, eps: float, r):
        r = np.asarray(r, dtype=float)
        if self.family == "uniform":
            return np.where((r > 0) & (r < eps), 1.0 / eps, 0.0)
        if self.family == "exponential":
            return np.where(r > 0, np.exp(-r / eps) / eps, 0.0)
        with np.errstate(divide="ignore"):
            return np.where((r > 0) & (r < 1), eps * r ** (eps - 1), 0.0)

    def cdf(self, eps: float, r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        if self.family == "uniform":
            return np.minimum(r / eps, 1.0)
        if self.family == "exponential":
            return -np.expm1(-r / eps)
        return np.minimum(r, 1.0) ** eps

    def quantile(self, eps: float, u):
        u = np.asarray(u, dtype=float)
        if self.family == "uniform":
            return eps * u
        if self.family == "exponential":
            return -eps * np.log1p(-u)
        return u ** (1.0 / eps)

    def tail_mass(self, eps: float, gamma: float) -> float:
        """``int_gamma^inf psi_eps(r) dr``, without cancellation for thin tails."""
        if gamma <= 0:
            return 1.0
        if self.family == "uniform":
            return max(0.0, 1.0 - gamma / eps)
        if self.family == "exponential":
            return math.exp(-gamma / eps)
        return 0.0 if gamma >= 1 else -math.expm1(eps * math.log(gamma))

    def rule(self, eps: float) -> tuple[np.ndarray, np.ndarray]:
        """Equal-mass bins; one node per bin at its mass midpoint."""
        k = self.r_nodes
        u = (np.arange(k) + 0.5) / k
        return self.quantile(eps, u), np.full(k, 1.0 / k)

    def total_mass(self, eps: float) -> float:
        """Mass by adaptive quadrature of the density, independent of ``cdf``."""
        if self.family == "uniform":
            pieces = [(0.0, eps)]
        elif self.family == "exponential":
            pieces = [(0.0, eps), (eps, math.inf)]
        else:
            # algebraic endpoint weight r^(eps-1) handled by QUADPACK's QAWS rule
            val, _ = integrate.quad(lambda r: eps, 0.0, 1.0, weight="alg", wvar=(eps - 1, 0.0))
            return val
        return sum(integrate.quad(lambda r: float(self.density(eps, r)), a, b)[0] for a, b in pieces)

    def admissibility(self, gammas=(0.5, 0.1, 0.01)) -> dict:
        """Unit mass, nonnegativity at the nodes, and decreasing tails along the schedule."""
        mass = [self.total_mass(e) for e in self.eps]
        nonneg = all(np.all(self.density(e, self.rule(e)[0]) >= 0) for e in self.eps)
        tails = {g: [self.tail_mass(e, g) for e in self.eps] for g in gammas}
        decreasing = all(all(b <= a + 1e-15 for a, b in zip(t, t[1:])) for t in tails.values())
        return {
            "mass": mass,
            "unit_mass": all(abs(m - 1) < 1e-8 for m in mass),
            "nonnegative": nonneg,
            "tails": {str(g): v for g, v in tails.items()},
            "tails_decreasing": decreasing,
            "admissible": all(abs(m - 1) < 1e-8 for m in mass) and nonneg and decreasing,
        }

    def to_json(self) -> dict:
        return {"family": self.family, "eps": list(self.eps), "r_nodes": self.r_nodes}

    @classmethod
    def from_json(cls, spec: dict) -> "KernelSchedule":
        try:
            return cls(spec["family"], tuple(spec["eps"]), int(spec.get("r_nodes", 64)))
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad kernel schedule spec: {exc}") from None
