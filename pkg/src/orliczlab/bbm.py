"""The smoothed difference-quotient functional and its eps -> 0 limit.

For a kernel ``psi_eps`` the functional is

    rho_eps(f) = int_0^inf int_{Omega_r} phi(x, M#_{B(x,r)} f / r) dx psi_eps(r) dr,

approximated by an equal-mass radial rule (one radius per bin) and a
midpoint sum over the nodes of the interior set. Radii below the resolution
floor ``max(4h, admissible radius)`` reuse the integrand at the floor; the
kernel mass affected is reported as ``floor_mass``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special

from .catalog import FunctionEntry
from .errors import ConfigurationError, UnboundedNormError
from .geometry import unit_ball_volume
from .grid import GridField, admissible_radius, gradient_fd, interior_set, sharp_averages
from .kernels import KernelSchedule
from .modular import DEFAULT_TOL, luxemburg_norm, modular, unit_ball_scale
from .phi import PhiModel

__all__ = [
    "c_n",
    "c_n_monte_carlo",
    "c_n_quadrature",
    "eps_min",
    "radius_floor",
    "SmoothedQuotient",
    "rho_sharp_eps",
    "eps_norm",
    "richardson",
    "ConvergenceReport",
    "run_convergence",
    "UpperBoundResult",
    "upper_bound_check",
    "CONVERGED",
    "DIVERGENT",
    "INCONCLUSIVE",
]

CONVERGED = "CONVERGED"
DIVERGENT = "BOUNDED-DIVERGENT-TARGET"
INCONCLUSIVE = "INCONCLUSIVE"


def c_n(n: int) -> float:
    """Mean of ``|x . e_1|`` over the unit ball: ``2 V_{n-1} / ((n + 1) V_n)``."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    # r_n = V_{n-1} / V_n from r_1 = 1/2, r_2 = 2/pi and r_n = n r_{n-2} / (n - 1)
    r = 0.5 if n % 2 else 2 / math.pi
    for k in range(3 if n % 2 else 4, n + 1, 2):
        r *= k / (k - 1)
    return 2 * r / (n + 1)


def c_n_monte_carlo(n: int, samples: int = 10**6, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo mean of ``|x_1|`` for uniform points in the unit ball, with its standard error."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((samples, n))
    radius = rng.random(samples) ** (1.0 / n)
    x1 = np.abs(g[:, 0]) / np.linalg.norm(g, axis=1) * radius
    return float(x1.mean()), float(x1.std(ddof=1) / math.sqrt(samples))


def c_n_quadrature(n: int) -> float:
    """Slice integral ``int |s| V_{n-1} (1 - s^2)^{(n-1)/2} ds / V_n`` by adaptive quadrature."""
    vol = math.pi ** ((n - 1) / 2) / special.gamma((n - 1) / 2 + 1)
    val, _ = integrate.quad(lambda s: 2 * s * vol * (1 - s * s) ** ((n - 1) / 2), 0.0, 1.0)
    return val / unit_ball_volume(n)


def eps_min(h: float) -> float:
    return 8.0 * h


def radius_floor(n: int, h: float) -> float:
    return max(4.0 * h, admissible_radius(n, h))


def _stride_nodes(field: GridField, nodes: np.ndarray, stride: int) -> np.ndarray:
    if stride == 1:
        return nodes
    mi = field.domain.multi_index[nodes]
    keep = np.all(mi % stride == stride // 2, axis=1)
    return nodes[keep]


class SmoothedQuotient:
    """Cached evaluator of ``rho_eps`` and the eps-norm for one (model, field).

    ``M#f / r`` is computed once per radius; scaling the field by ``1/lam``
    scales it linearly, so norm bisection only re-evaluates phi.
    ``center_stride > 1`` evaluates the outer x-integral on every
    ``stride``-th lattice node (cell volume ``(stride h)^n``), the inner ball
    averages keep full resolution.
    """

    def __init__(self, model: PhiModel, field: GridField, center_stride: int = 1):
        self.model = model
        self.field = field
        self.stride = int(center_stride)
        dom = field.domain
        self.floor = radius_floor(dom.n, dom.h)
        self.weight = (self.stride * dom.h) ** dom.n
        self._profiles: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self._assembled: dict[tuple, tuple] = {}

    def profile(self, radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes of the interior set at ``radius`` and ``M#f / radius`` there."""
        key = round(radius, 15)
        if key not in self._profiles:
            nodes = _stride_nodes(self.field, interior_set(self.field.domain, radius), self.stride)
            if len(nodes):
                nodes, _, sharp = sharp_averages(self.field, radius, nodes)
                self._profiles[key] = (nodes, sharp / radius)
            else:
                self._profiles[key] = (nodes, np.empty(0))
        return self._profiles[key]

    def _assemble(self, schedule: KernelSchedule, eps: float):
        key = (schedule.family, schedule.r_nodes, eps)
        if key not in self._assembled:
            if eps < eps_min(self.field.domain.h):
                raise ConfigurationError(
                    f"eps={eps:g} below eps_min(h)={eps_min(self.field.domain.h):g}; refine the grid")
            radii, weights = schedule.rule(eps)
            pts, vals, w = [], [], []
            for r, wk in zip(radii, weights):
                nodes, q = self.profile(max(r, self.floor))
                pts.append(nodes)
                vals.append(q)
                w.append(np.full(len(nodes), wk))
            floor_mass = float(weights[radii < self.floor].sum())
            self._assembled[key] = (np.concatenate(pts).astype(np.int64), np.concatenate(vals),
                                    np.concatenate(w), floor_mass)
        return self._assembled[key]

    def floor_mass(self, schedule: KernelSchedule, eps: float) -> float:
        return self._assemble(schedule, eps)[3]

    def rho(self, schedule: KernelSchedule, eps: float, scale: float = 1.0) -> float:
        """``rho_eps(f / scale)``."""
        nodes, q, w, _ = self._assemble(schedule, eps)
        if len(nodes) == 0:
            return 0.0
        t = q / scale
        pts = self.field.domain.points[nodes] if self.model.x_dependent else None
        vals = np.where(t == 0, 0.0, self.model.evaluate(pts, t))
        if np.any(np.isinf(vals)):
            return math.inf
        return float(np.sum(vals * w) * self.weight)

    def norm(self, schedule: KernelSchedule, eps: float, tol: float = DEFAULT_TOL) -> float:
        nodes, q, _, _ = self._assemble(schedule, eps)
        if not np.any(q):
            return 0.0
        return unit_ball_scale(lambda lam: self.rho(schedule, eps, lam), tol)


def rho_sharp_eps(model: PhiModel, field: GridField, schedule: KernelSchedule, eps: float,
                  center_stride: int = 1) -> float:
    return SmoothedQuotient(model, field, center_stride).rho(schedule, eps)


def eps_norm(model: PhiModel, field: GridField, schedule: KernelSchedule, eps: float,
             tol: float = DEFAULT_TOL, center_stride: int = 1) -> float:
    return SmoothedQuotient(model, field, center_stride).norm(schedule, eps, tol)


def richardson(eps, values) -> float:
    """Limit of ``L + a eps`` through the two smallest eps values."""
    e1, e2 = eps[-2], eps[-1]
    v1, v2 = values[-2], values[-1]
    if not (math.isfinite(v1) and math.isfinite(v2)):
        return math.inf
    return (e1 * v2 - e2 * v1) / (e1 - e2)


def _rel(value: float, target: float) -> float:
    if not math.isfinite(target) or target == 0:
        return 0.0 if value == target else math.inf
    return abs(value - target) / abs(target)


@dataclass
class ConvergenceReport:
    eps: list
    rho_eps: list
    eps_norm: list
    target_modular: float
    target_norm: float
    extrapolated_modular: float
    extrapolated_norm: float
    classification: str
    tolerance: float
    band: float | None
    rel_err_modular: list = field(default_factory=list)
    rel_err_norm: list = field(default_factory=list)
    extrapolated_rel_err_modular: float = math.nan
    extrapolated_rel_err_norm: float = math.nan
    metadata: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.recompute_errors()

    def recompute_errors(self) -> None:
        self.rel_err_modular = [_rel(v, self.target_modular) for v in self.rho_eps]
        self.rel_err_norm = [_rel(v, self.target_norm) for v in self.eps_norm]
        self.extrapolated_rel_err_modular = _rel(self.extrapolated_modular, self.target_modular)
        self.extrapolated_rel_err_norm = _rel(self.extrapolated_norm, self.target_norm)

    def rows(self) -> list[dict]:
        return [
            {"eps": e, "rho_eps": r, "eps_norm": n, "target_modular": self.target_modular,
             "target_norm": self.target_norm, "rel_err_modular": em, "rel_err_norm": en}
            for e, r, n, em, en in zip(self.eps, self.rho_eps, self.eps_norm,
                                       self.rel_err_modular, self.rel_err_norm)
        ]

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ConvergenceReport":
        keep = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**keep)


def growth_ratios(eps, values) -> list[float]:
    """Growth of ``values`` per halving of eps between consecutive entries."""
    out = []
    for (e1, v1), (e2, v2) in zip(zip(eps, values), zip(eps[1:], values[1:])):
        if v1 <= 0 or not math.isfinite(v2):
            out.append(math.inf if v2 > v1 else 0.0)
            continue
        out.append((v2 / v1) ** (1.0 / math.log2(e1 / e2)))
    return out


def classify(eps, values, extrapolated, target, tolerance, band=None, divergence_ratio=1.2) -> str:
    """Label a run.

    Divergence needs strict growth by at least ``divergence_ratio`` per
    halving of eps, well above the discretization drift of a finite limit.
    """
    if math.isfinite(target) and math.isfinite(extrapolated):
        if band is not None and target > 0:
            if 1.0 / band <= extrapolated / target <= band:
                return CONVERGED
        elif _rel(extrapolated, target) <= tolerance:
            return CONVERGED
    ratios = growth_ratios(eps, values)
    if ratios and all(r >= divergence_ratio for r in ratios):
        return DIVERGENT
    return INCONCLUSIVE


def _gradient(entry_or_field, domain) -> tuple[GridField, np.ndarray]:
    """The sampled function and the magnitude of its gradient at the nodes."""
    if isinstance(entry_or_field, FunctionEntry):
        f = GridField(domain, entry_or_field(domain.points))
        with np.errstate(invalid="ignore"):
            g = np.linalg.norm(entry_or_field.gradient(domain.points), axis=1)
        return f, g
    f = entry_or_field
    return f, gradient_fd(f).magnitude()


def run_convergence(model: PhiModel, target, schedule: KernelSchedule, domain=None, *,
                    tolerance: float = 0.01, band: float | None = None, norm_tol: float = DEFAULT_TOL,
                    center_stride: int = 1, divergence_ratio: float = 1.2, seed: int = 0,
                    evaluator: SmoothedQuotient | None = None) -> ConvergenceReport:
    """Evaluate rho_eps and the eps-norm along the schedule and compare with the limit.

    ``target`` is a catalog :class:`FunctionEntry` (sampled on ``domain``,
    exact gradient) or a :class:`GridField` (finite-difference gradient).
    The limit targets are ``modular(c_n |grad f|)`` and ``c_n ||grad f||``.
    """
    if isinstance(target, FunctionEntry):
        if domain is None:
            raise ConfigurationError("a catalog function needs a domain")
    else:
        domain = target.domain
    f, grad_mag = _gradient(target, domain)
    cn = c_n(domain.n)
    if np.all(np.isfinite(grad_mag)):
        grad_field = GridField(domain, grad_mag)
        target_mod = modular(model, grad_field.scaled(cn))
        try:
            target_norm = cn * luxemburg_norm(model, grad_field, norm_tol)
        except UnboundedNormError:
            target_norm = math.inf
    else:
        target_mod = target_norm = math.inf

    ev = evaluator or SmoothedQuotient(model, f, center_stride)
    eps = list(schedule.eps)
    rhos = [ev.rho(schedule, e) for e in eps]
    norms = []
    for e in eps:
        try:
            norms.append(ev.norm(schedule, e, norm_tol))
        except UnboundedNormError:
            norms.append(math.inf)
    ext_mod = richardson(eps, rhos) if len(eps) > 1 else rhos[-1]
    ext_norm = richardson(eps, norms) if len(eps) > 1 else norms[-1]
    label = classify(eps, rhos, ext_mod, target_mod, tolerance, band, divergence_ratio)
    meta = {
        "n": domain.n,
        "h": domain.h,
        "nodes": domain.size,
        "c_n": cn,
        "kernel": schedule.to_json(),
        "model": model.to_json(),
        "function": target.to_json() if isinstance(target, FunctionEntry) else "grid-field",
        "radius_floor": ev.floor,
        "floor_mass": [ev.floor_mass(schedule, e) for e in eps],
        "center_stride": ev.stride,
        "growth_ratios": growth_ratios(eps, rhos),
    }
    return ConvergenceReport(eps, rhos, norms, target_mod, target_norm, ext_mod, ext_norm, label,
                             tolerance, band, metadata=meta, seed=seed)


@dataclass
class UpperBoundResult:
    constants: list
    passed: bool
    spread: float
    gradient_norm: float
    exponents: tuple


def upper_bound_check(model: PhiModel, target, schedule: KernelSchedule, exponents: tuple[float, float],
                      domain=None, center_stride: int = 1, max_spread: float = 2.0) -> UpperBoundResult:
    """Measure ``c_eps = rho_eps(f) / max(N^lo, N^hi)`` with ``N = ||grad f||``.

    Passes when the constants are finite and vary by less than ``max_spread``
    across the schedule.
    """
    if isinstance(target, FunctionEntry):
        f, grad_mag = _gradient(target, domain)
    else:
        f, grad_mag = _gradient(target, target.domain)
    lo, hi = exponents
    ev = SmoothedQuotient(model, f, center_stride)
    rhos = [ev.rho(schedule, e) for e in schedule.eps]
    if not np.any(grad_mag):
        ok = all(r == 0 for r in rhos)
        return UpperBoundResult([0.0] * len(rhos), ok, 1.0 if ok else math.inf, 0.0, exponents)
    N = luxemburg_norm(model, GridField(f.domain, grad_mag))
    bound = max(N ** lo, N ** hi)
    consts = [r / bound for r in rhos]
    spread = max(consts) / min(consts) if min(consts) > 0 else math.inf
    return UpperBoundResult(consts, bool(math.isfinite(spread) and spread < max_spread), spread, N, exponents)
