"""Sampling certifiers for the structural conditions on phi.

Every certifier returns an :class:`AssumptionReport`. A verdict of
``holds-on-samples`` means no violation was found on the seeded samples; a
``violated`` verdict carries a concrete counterexample that
:func:`confirm_counterexample` re-evaluates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import ball_volume
from .grid import GridDomain, GridField, interior_set, min_ball_nodes
from .phi import PhiModel, ball_nodes, left_inverse

__all__ = [
    "HOLDS",
    "VIOLATED",
    "AssumptionReport",
    "Samples",
    "default_samples",
    "check_doubling",
    "check_aInc_aDec",
    "estimate_exponents",
    "check_A0",
    "sample_balls",
    "check_A1",
    "check_A2",
    "check_loc",
    "check_log_holder",
    "property_wpm",
    "property_jensen_key",
    "confirm_counterexample",
]

HOLDS = "holds-on-samples"
VIOLATED = "violated"

DOUBLING_LIMIT = 1e8
MONOTONICITY_LIMIT = 100.0
REL_TOL = 1e-12
INVERSE_NODES = 128


def _py(value):
    """JSON-friendly copy of numpy scalars and arrays."""
    if isinstance(value, dict):
        return {k: _py(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_py(v) for v in value]
    if isinstance(value, np.ndarray):
        return _py(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class AssumptionReport:
    assumption: str
    verdict: str
    constants: dict = field(default_factory=dict)
    counterexample: dict | None = None
    seed: int = 0
    n_samples: int = 0
    notes: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_json(self) -> dict:
        out = {
            "assumption": self.assumption,
            "verdict": self.verdict,
            "constants": _py(self.constants),
            "counterexample": _py(self.counterexample),
            "seed": self.seed,
            "n_samples": self.n_samples,
        }
        if self.notes:
            out["notes"] = self.notes
        return out


@dataclass
class Samples:
    """Spatial points (``None`` for x-free models) and a sorted t grid."""

    points: np.ndarray | None
    t: np.ndarray
    seed: int = 0

    @property
    def size(self) -> int:
        return (1 if self.points is None else len(self.points)) * len(self.t)


def default_samples(model: PhiModel, domain: GridDomain | None = None, n_points: int = 64,
                    t_range=(1e-3, 1e3), n_t: int = 121, seed: int = 0) -> Samples:
    t = np.geomspace(*t_range, n_t)
    if not model.x_dependent:
        return Samples(None, t, seed)
    if domain is None:
        raise InputError(f"{model.family} model needs a domain to sample points from")
    rng = np.random.default_rng(seed)
    idx = rng.choice(domain.size, size=min(n_points, domain.size), replace=False)
    return Samples(domain.points[np.sort(idx)], t, seed)


def _grid_values(model: PhiModel, points, t) -> np.ndarray:
    """``phi`` on the (points x t) grid as an ``(m, k)`` array."""
    t = np.asarray(t, dtype=float)
    if points is None:
        return model.evaluate(None, t)[None, :]
    tt = np.broadcast_to(t, (len(points), t.size))
    return model.evaluate(points, tt)


def _point(points, i):
    return None if points is None else np.asarray(points[i]).tolist()


# ------------------------------------------------------------- growth conditions


def check_doubling(model: PhiModel, samples: Samples, limit: float = DOUBLING_LIMIT) -> AssumptionReport:
    """Smallest ``A`` with ``phi(x, 2t) <= A phi(x, t)`` on the samples."""
    v1 = _grid_values(model, samples.points, samples.t)
    v2 = _grid_values(model, samples.points, 2 * samples.t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(v1 > 0, v2 / v1, np.where(v2 > 0, np.inf, 1.0))
    ratio = np.where(np.isinf(v1) & np.isinf(v2), 1.0, ratio)
    i, k = np.unravel_index(np.argmax(ratio), ratio.shape)
    A = float(ratio[i, k])
    report = AssumptionReport("doubling", HOLDS, {"A": A}, seed=samples.seed, n_samples=samples.size)
    if not A <= limit:
        report.verdict = VIOLATED
        report.counterexample = {"x": _point(samples.points, i), "t": float(samples.t[k]),
                                 "phi_t": float(v1[i, k]), "phi_2t": float(v2[i, k]), "A_limit": limit}
    return report


def _monotonicity(g: np.ndarray, direction: str):
    """Worst ratio witnessing almost monotonicity of each row of ``g``.

    Returns ``(c, row, j1, j2)`` with ``j1 < j2``.
    """
    best = (1.0, 0, 0, 0)
    for row, vals in enumerate(g):
        if direction == "inc":
            # g(s1) <= c g(s2): running max before s2
            run = np.maximum.accumulate(vals)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                r = np.where(vals > 0, run / vals, np.where(run > 0, np.inf, 1.0))
        else:
            run = np.minimum.accumulate(vals)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                r = np.where(run > 0, vals / run, np.where(vals > 0, np.inf, 1.0))
        r = np.where(np.isnan(r), 1.0, r)
        j2 = int(np.argmax(r))
        if r[j2] > best[0]:
            head = vals[: j2 + 1]
            j1 = int(np.argmax(head) if direction == "inc" else np.argmin(head))
            best = (float(r[j2]), row, j1, j2)
    return best


def check_aInc_aDec(model: PhiModel, exponent: float, direction: str, samples: Samples,
                    c_max: float = MONOTONICITY_LIMIT) -> AssumptionReport:
    """Monotonicity constant of ``s -> s^-exponent phi(x, s)`` on the samples.

    ``direction="inc"`` measures almost increase (``g(s1) <= c g(s2)`` for
    ``s1 < s2``), ``"dec"`` almost decrease. The verdict is ``violated`` when
    the constant exceeds ``c_max``.
    """
    if direction not in ("inc", "dec"):
        raise InputError("direction must be 'inc' or 'dec'")
    if direction == "inc" and not exponent >= 1:
        raise InputError("(aInc) needs an exponent >= 1")
    if direction == "dec" and not exponent > 1:
        raise InputError("(aDec) needs an exponent > 1")
    t = np.sort(samples.t)
    with np.errstate(over="ignore", invalid="ignore"):
        g = _grid_values(model, samples.points, t) * t ** (-float(exponent))
    c, row, j1, j2 = _monotonicity(g, direction)
    name = "aInc" if direction == "inc" else "aDec"
    key = "c_up" if direction == "inc" else "c_down"
    expo = "phi_up" if direction == "inc" else "phi_down"
    report = AssumptionReport(name, HOLDS, {expo: float(exponent), key: c}, seed=samples.seed,
                              n_samples=samples.size)
    if not c <= c_max:
        report.verdict = VIOLATED
        report.counterexample = {"x": _point(samples.points, row), "s1": float(t[j1]), "s2": float(t[j2]),
                                 "g_s1": float(g[row, j1]), "g_s2": float(g[row, j2]), "c_max": c_max,
                                 "exponent": float(exponent), "direction": direction}
    return report


def estimate_exponents(model: PhiModel, samples: Samples, c_max: float = 1.0 + 1e-9,
                       upper: float = 64.0, steps: int = 40) -> dict:
    """Largest certified ``phi_up`` and smallest certified ``phi_down`` by bisection.

    The default ``c_max`` asks for monotonicity proper (the sharp
    exponents); a loose constant on a finite t range lets the two estimates
    cross. Either entry is ``None`` when no exponent in ``[1, upper]`` passes.
    """
    def passes(e, direction):
        return check_aInc_aDec(model, e, direction, samples, c_max).holds

    out = {"phi_up": None, "phi_down": None}
    if passes(1.0, "inc"):
        lo, hi = 1.0, upper
        if passes(hi, "inc"):
            lo = hi
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if passes(mid, "inc") else (lo, mid)
        out["phi_up"] = lo
    if passes(upper, "dec"):
        lo, hi = 1.0, upper
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if passes(mid, "dec") else (mid, hi)
        out["phi_down"] = hi
    return out


def check_A0(model: PhiModel, domain: GridDomain | None = None, points=None,
             sigmas=None, betas=None) -> AssumptionReport:
    """Search ``(beta, sigma)`` with ``phi(x, beta sigma) <= 1 <= phi(x, sigma)``.

    The largest feasible beta wins; ties prefer sigma closest to 1. The
    inverse form ``beta sigma <= phi^-1(x, 1) <= sigma`` is re-verified.
    """
    if points is None and model.x_dependent:
        if domain is None:
            raise InputError("an x-dependent model needs a domain or sample points")
        points = domain.points
    sigmas = 2.0 ** (np.arange(-40, 41) / 4) if sigmas is None else np.asarray(sigmas, dtype=float)
    betas = 2.0 ** (-np.arange(0, 81) / 4) if betas is None else np.sort(np.asarray(betas, dtype=float))[::-1]
    lower = _grid_values(model, points, sigmas).min(axis=0)
    best = None
    for si, sigma in enumerate(sigmas):
        if not lower[si] >= 1:
            continue
        upper = _grid_values(model, points, betas * sigma).max(axis=0)
        ok = np.flatnonzero(upper <= 1)
        if len(ok) == 0:
            continue
        beta = float(betas[ok[0]])
        key = (beta, -abs(math.log(sigma)))
        if best is None or key > best[0]:
            best = (key, beta, float(sigma))
    n = 1 if points is None else len(points)
    report = AssumptionReport("A0", HOLDS, seed=0, n_samples=n * len(sigmas))
    if best is None:
        report.verdict = VIOLATED
        vals = _grid_values(model, points, np.array([1.0]))[:, 0]
        i = int(np.argmin(vals)) if vals.min() < 1 else int(np.argmax(vals))
        report.counterexample = {"x": _point(points, i), "t": 1.0, "phi": float(vals[i]),
                                 "reason": "no (beta, sigma) on the search grid"}
        return report
    _, beta, sigma = best
    if points is None:
        inv = np.atleast_1d(model.inverse(None, np.array([1.0])))
    else:
        inv = np.asarray(model.inverse(points, np.ones(len(points))), dtype=float)
    inverse_ok = bool(np.all(inv >= beta * sigma * (1 - 1e-9)) and np.all(inv <= sigma * (1 + 1e-9)))
    report.constants = {"beta": beta, "sigma": sigma, "inverse_form": inverse_ok,
                        "inverse_range": [float(inv.min()), float(inv.max())]}
    if not inverse_ok:
        report.verdict = VIOLATED
        i = int(np.argmin(inv)) if inv.min() < beta * sigma else int(np.argmax(inv))
        report.counterexample = {"x": _point(points, i), "s": 1.0, "inverse": float(inv[i]),
                                 "beta": beta, "sigma": sigma}
    return report


# ------------------------------------------------------------------- ball tests


def sample_balls(domain: GridDomain, count: int, rng: np.random.Generator,
                 r_min: float | None = None, r_max: float | None = None) -> list[tuple[int, float, np.ndarray]]:
    """Random balls inside the domain as ``(center node, radius, node indices)``.

    Radii are log-uniform in ``[2h, diam/4]``; centers are uniform over the
    nodes deep enough to hold the ball, and balls with fewer than the minimum
    node count are redrawn.
    """
    r_min = 2 * domain.h if r_min is None else r_min
    r_max = domain.shape.diameter / 4 if r_max is None else r_max
    r_max = min(r_max, domain.inradius * (1 - 1e-9))
    if r_max < r_min:
        raise InputError("domain is too small for balls of radius >= 2h")
    need = min_ball_nodes(domain.n)
    out = []
    for _ in range(200 * count):
        if len(out) == count:
            break
        r = float(np.exp(rng.uniform(math.log(r_min), math.log(r_max))))
        deep = interior_set(domain, r)
        if len(deep) == 0:
            continue
        c = int(rng.choice(deep))
        nodes = ball_nodes(domain, domain.points[c], r)
        if len(nodes) >= need:
            out.append((c, r, nodes))
    if len(out) < count:
        raise InputError(f"could only place {len(out)} of {count} admissible balls")
    return out


def _ball_t_samples(model, pts, sigma, measure, k):
    """t samples in ``[sigma, (phi_B^-)^-1(1/|B|)]`` with ``phi_B^-(t) <= 1/|B|``."""
    target = 1.0 / measure
    t_hi = float(left_inverse(lambda t: _grid_values(model, pts, t).min(axis=0), np.array([target]))[0])
    if not (math.isfinite(t_hi) and t_hi >= sigma):
        return np.empty(0), t_hi
    t = np.geomspace(sigma, t_hi, k) if t_hi > sigma else np.array([sigma])
    low = _grid_values(model, pts, t).min(axis=0)
    return t[low <= target], t_hi


def _a1_ball(model, pts, beta, t):
    """Envelope and pointwise (A1) checks on one ball; returns both witnesses."""
    lhs = _grid_values(model, pts, beta * t)          # phi(x, beta t)
    rhs = _grid_values(model, pts, t)                 # phi(y, t)
    env = lhs.max(axis=0) - rhs.min(axis=0)
    env_bad = np.flatnonzero(env > REL_TOL * np.maximum(1.0, rhs.min(axis=0)))
    # pointwise: each y with phi(y, t) <= 1/|B| against every x
    pw_bad = None
    top = lhs.max(axis=0)
    for j, tj in enumerate(t):
        viol = np.flatnonzero(top[j] > rhs[:, j] * (1 + REL_TOL) + REL_TOL)
        if len(viol):
            y = viol[int(np.argmin(rhs[viol, j]))]
            pw_bad = (int(np.argmax(lhs[:, j])), int(y), j)
            break
    return env_bad, pw_bad, lhs, rhs


def _largest_beta(model, pts, t, beta_grid):
    rhs = _grid_values(model, pts, t).min(axis=0)
    for b in beta_grid:
        if np.all(_grid_values(model, pts, b * t).max(axis=0) <= rhs * (1 + REL_TOL) + REL_TOL):
            return float(b)
    return 0.0


def check_A1(model: PhiModel, domain: GridDomain, beta: float, sigma: float, ball_samples: int = 200,
             seed: int = 0, t_samples: int = 24, beta_grid=None, balls=None) -> AssumptionReport:
    """(A1) on random balls inside the domain, in envelope and pointwise form.

    The envelope form is ``phi_B^+(beta t) <= phi_B^-(t)`` and the pointwise
    form is ``phi(x, beta t) <= phi(y, t)`` for ``x, y`` in the ball; both use
    the same t samples, so their verdicts agree ball by ball. The inverse form
    ``phi^-1(x, s) <= K phi^-1(y, s)``, ``s in [1, 1/|B|]``, is measured
    alongside and holds when ``K <= 1/beta``; on large balls it uses a random
    subset of ``INVERSE_NODES`` nodes.
    """
    if not 0 < beta <= 1 or not sigma > 0:
        raise InputError("need beta in (0, 1] and sigma > 0")
    rng = np.random.default_rng(seed)
    beta_grid = 2.0 ** (-np.arange(0, 41) / 4) if beta_grid is None else np.sort(beta_grid)[::-1]
    balls = sample_balls(domain, ball_samples, rng) if balls is None else balls
    agree = True
    env_viol = pw_viol = 0
    beta_found = 1.0
    k_max = 1.0
    first = None
    n_evals = 0
    for c, r, nodes in balls:
        pts = domain.points[nodes] if model.x_dependent else None
        measure = float(ball_volume(domain.n, r))
        t, _ = _ball_t_samples(model, pts, sigma, measure, t_samples)
        s = np.geomspace(1.0, 1.0 / measure, 8)
        if pts is None:
            inv = np.atleast_1d(model.inverse(None, s))[None, :]
        else:
            sub = pts if len(pts) <= INVERSE_NODES else pts[rng.choice(len(pts), INVERSE_NODES, replace=False)]
            inv = np.asarray(model.inverse(sub, np.broadcast_to(s, (len(sub), s.size))), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            k_ball = np.nanmax(inv.max(axis=0) / inv.min(axis=0))
        k_max = max(k_max, float(k_ball))
        if len(t) == 0:
            continue
        n_evals += len(t) * (1 if pts is None else len(pts))
        env_bad, pw_bad, lhs, rhs = _a1_ball(model, pts, beta, t)
        env_viol += bool(len(env_bad))
        pw_viol += pw_bad is not None
        agree &= bool(len(env_bad)) == (pw_bad is not None)
        beta_found = min(beta_found, _largest_beta(model, pts, t, beta_grid))
        if pw_bad is not None and first is None:
            i, j, k = pw_bad
            first = {"center": domain.points[c].tolist(), "radius": r,
                     "x": (domain.points[nodes[i]].tolist() if pts is not None else None),
                     "y": (domain.points[nodes[j]].tolist() if pts is not None else None),
                     "t": float(t[k]), "beta": beta,
                     "lhs": float(lhs[i, k]), "rhs": float(rhs[j, k]), "ball_measure": measure}
    report = AssumptionReport("A1", HOLDS, seed=seed, n_samples=n_evals)
    report.constants = {
        "beta": beta, "sigma": sigma, "balls": len(balls),
        "beta_feasible": beta_found,
        "envelope_violations": env_viol, "pointwise_violations": pw_viol,
        "forms_agree": agree,
        "inverse_ratio": k_max, "inverse_form_holds": bool(k_max <= 1.0 / beta * (1 + 1e-9)),
    }
    report.notes = "balls are sampled fully inside the domain"
    if first is not None:
        report.verdict = VIOLATED
        report.counterexample = first
    return report


def check_A2(model: PhiModel, domain: GridDomain, beta: float, sigma: float,
             h_field: GridField | None = None, n_samples: int = 10_000, seed: int = 0) -> AssumptionReport:
    """``phi(x, beta t) <= phi(y, t) + h(x) + h(y)`` on random ``(x, y, t)``, ``t in [0, sigma]``.

    Without ``h_field`` the constant candidate ``h = max(0, sup defect) / 2``
    is formed from the samples and re-verified.
    """
    rng = np.random.default_rng(seed)
    i = rng.integers(0, domain.size, n_samples)
    j = rng.integers(0, domain.size, n_samples)
    t = rng.uniform(0.0, sigma, n_samples)
    pts = domain.points if model.x_dependent else None
    lhs = model.evaluate(None if pts is None else pts[i], beta * t)
    rhs = model.evaluate(None if pts is None else pts[j], t)
    raw = lhs - rhs
    if h_field is None:
        h_const = max(0.0, float(np.max(raw))) / 2
        hx = hy = np.full(n_samples, h_const)
        h_desc = {"h": "constant", "h_value": h_const}
    else:
        hv = np.asarray(h_field.values, dtype=float)
        if np.any(hv < 0):
            raise InputError("h must be nonnegative")
        hx, hy = hv[i], hv[j]
        h_desc = {"h": "field", "h_max": float(hv.max()),
                  "h_integral": float(hv.sum() * domain.cell_volume)}
    defect = raw - hx - hy
    worst = int(np.argmax(defect))
    tol = REL_TOL * max(1.0, float(np.max(np.abs(rhs))))
    report = AssumptionReport("A2", HOLDS, {"beta": beta, "sigma": sigma, "max_defect": float(defect[worst]),
                                            **h_desc}, seed=seed, n_samples=n_samples)
    if defect[worst] > tol:
        report.verdict = VIOLATED
        report.counterexample = {"x": domain.points[i[worst]].tolist(), "y": domain.points[j[worst]].tolist(),
                                 "t": float(t[worst]), "beta": beta, "lhs": float(lhs[worst]),
                                 "rhs": float(rhs[worst]), "h_x": float(hx[worst]), "h_y": float(hy[worst])}
    return report


def check_loc(model: PhiModel, domain: GridDomain, t0: float, depths=None) -> AssumptionReport:
    """Discrete integrals of ``phi(., t0)`` over nested compact subsets ``Omega_delta``."""
    if not t0 > 0:
        raise InputError("t0 must be positive")
    if depths is None:
        top = domain.inradius / 2
        depths = np.geomspace(top, min(top, 2 * domain.h), 6) if top > 2 * domain.h else [top]
    integrals = []
    for d in depths:
        nodes = interior_set(domain, float(d))
        if len(nodes) == 0:
            integrals.append(0.0)
            continue
        pts = domain.points[nodes] if model.x_dependent else None
        vals = model.evaluate(pts, np.full(len(nodes), t0)) if pts is not None else \
            np.full(len(nodes), float(model.evaluate(None, np.array([t0]))[0]))
        integrals.append(float(np.sum(vals) * domain.cell_volume))
    report = AssumptionReport("loc", HOLDS, {"t0": t0, "depths": list(map(float, depths)),
                                             "integrals": integrals}, n_samples=domain.size)
    bad = [k for k, v in enumerate(integrals) if not math.isfinite(v)]
    if bad:
        report.verdict = VIOLATED
        report.counterexample = {"depth": float(depths[bad[0]]), "t0": t0, "integral": integrals[bad[0]]}
    return report


def _holder_ratio(p_field, x, y):
    d = np.linalg.norm(x - y, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(p_field(x) - p_field(y)) * np.log(math.e + 1.0 / d)
    return np.where(d > 0, out, 0.0)


def check_log_holder(p_field, domain: GridDomain, n_pairs: int = 4000, decades: int = 12,
                     per_decade: int = 256, seed: int = 0) -> AssumptionReport:
    """Smallest ``C`` with ``|p(x) - p(y)| <= C / log(e + 1/|x - y|)`` on sampled pairs.

    Random pairs are followed by a zoom that, decade by decade, samples pairs
    at separation ``10^-j`` around the worst pair found so far. A jump makes
    the per-decade maximum grow by about ``|jump| ln 10`` per decade; the
    verdict is ``violated`` when the growth over the three finest decades
    exceeds half of that rate.
    """
    rng = np.random.default_rng(seed)
    lo, hi = domain.shape.bbox()
    n = domain.n
    pts = domain.points
    a = pts[rng.integers(0, len(pts), n_pairs)]
    b = pts[rng.integers(0, len(pts), n_pairs)]
    ratios = _holder_ratio(p_field, a, b)
    k = int(np.argmax(ratios))
    C = float(ratios[k])
    worst = (a[k], b[k])
    center = 0.5 * (a[k] + b[k])
    per_decade_max = []
    last_diff = 0.0
    for j in range(1, decades + 1):
        s = 10.0 ** (-j)
        spread = 10 * s
        c = np.clip(center + rng.uniform(-spread, spread, (per_decade, n)), lo, hi)
        u = rng.standard_normal((per_decade, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        d = np.clip(c + s * u, lo, hi)
        r = _holder_ratio(p_field, c, d)
        m = int(np.argmax(r))
        per_decade_max.append(float(r[m]))
        if r[m] > 0:
            center = 0.5 * (c[m] + d[m])
            last_diff = float(abs(p_field(c[m:m + 1]) - p_field(d[m:m + 1]))[0])
        if r[m] > C:
            C, worst = float(r[m]), (c[m], d[m])
    growth = (per_decade_max[-1] - per_decade_max[-4]) / 3 if decades >= 4 else 0.0
    jump_rate = last_diff * math.log(10)
    diverging = jump_rate > 1e-12 and growth >= 0.5 * jump_rate
    report = AssumptionReport("log_holder", HOLDS, {"C": C, "per_decade_max": per_decade_max,
                                                    "growth_per_decade": growth},
                              seed=seed, n_samples=n_pairs + decades * per_decade)
    if diverging:
        x, y = worst
        report.verdict = VIOLATED
        report.constants["C"] = math.inf
        report.counterexample = {"x": x.tolist(), "y": y.tolist(),
                                 "p_x": float(p_field(x[None])[0]), "p_y": float(p_field(y[None])[0]),
                                 "ratio": float(_holder_ratio(p_field, x[None], y[None])[0])}
    return report


# ------------------------------------------------------------ lemma properties


def property_wpm(model: PhiModel, n_samples: int = 10_000, phi_down: float | None = None,
                 c_down: float | None = None, domain: GridDomain | None = None, seed: int = 0) -> AssumptionReport:
    """Both weighted power-mean inequalities on random ``(x, a, b, delta)``.

    With ``K = c_down (1 + 1/delta)^phi_down``:

    * ``phi(x, a + b) <= phi(x, (1 + delta) a) + K phi(x, b)``
    * ``phi(x, a + b) <= c_down [(1 + delta)^phi_down phi(x, a) + (1 + 1/delta)^phi_down phi(x, b)]``

    ``c_down`` multiplies because almost decrease is ``g(s2) <= c g(s1)``
    with ``c >= 1``. Missing constants are certified on samples first.
    """
    rng = np.random.default_rng(seed)
    if phi_down is None or c_down is None:
        samples = default_samples(model, domain, seed=seed)
        if phi_down is None:
            bounds = model.exponent_bounds(samples.points)
            phi_down = bounds[1] if bounds else estimate_exponents(model, samples)["phi_down"]
            if phi_down is None:
                raise InputError("model has no certified (aDec) exponent")
            phi_down = max(float(phi_down), 1.0 + 1e-9)
        if c_down is None:
            c_down = check_aInc_aDec(model, phi_down, "dec", samples).constants["c_down"]
    a = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), n_samples))
    b = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), n_samples))
    delta = rng.uniform(0.0, 10.0, n_samples)
    delta = np.where(delta == 0, 10.0, delta)
    pts = None
    if model.x_dependent:
        if domain is None:
            raise InputError(f"{model.family} model needs a domain")
        pts = domain.points[rng.integers(0, domain.size, n_samples)]
    phi = lambda t: model.evaluate(pts, t)  # noqa: E731
    lhs = phi(a + b)
    k1 = (1 + 1 / delta) ** phi_down
    rhs1 = phi((1 + delta) * a) + c_down * k1 * phi(b)
    rhs2 = c_down * ((1 + delta) ** phi_down * phi(a) + k1 * phi(b))
    tol = 1e-12 * np.maximum(1.0, lhs)
    bad1 = np.flatnonzero(lhs > rhs1 + tol)
    bad2 = np.flatnonzero(lhs > rhs2 + tol)
    report = AssumptionReport("wpm", HOLDS, {"phi_down": float(phi_down), "c_down": float(c_down),
                                             "violations_first": len(bad1), "violations_second": len(bad2)},
                              seed=seed, n_samples=n_samples)
    bad = bad1 if len(bad1) else bad2
    if len(bad):
        m = int(bad[0])
        report.verdict = VIOLATED
        report.counterexample = {"x": _point(pts, m), "a": float(a[m]), "b": float(b[m]),
                                 "delta": float(delta[m]), "lhs": float(lhs[m]),
                                 "rhs": float((rhs1 if len(bad1) else rhs2)[m]),
                                 "form": "first" if len(bad1) else "second"}
    return report


def _random_field(rng, pts: np.ndarray) -> np.ndarray:
    """Piecewise-defined nonnegative test values: two levels split by a random hyperplane, plus spikes."""
    n = pts.shape[1]
    normal = rng.standard_normal(n)
    cut = np.quantile(pts @ normal, rng.uniform(0.1, 0.9))
    levels = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), 2))
    f = np.where(pts @ normal > cut, levels[0], levels[1])
    spikes = rng.random(len(pts)) < 0.05
    f[spikes] *= np.exp(rng.uniform(0, math.log(1e2), spikes.sum()))
    if rng.random() < 0.1:
        f[:] = 0.0
    return f


def property_jensen_key(model: PhiModel, domain: GridDomain, beta: float, sigma: float,
                        h_field: GridField | None = None, n_balls: int = 200, seed: int = 0,
                        start_fraction: float = 0.25) -> AssumptionReport:
    """The Jensen-type key estimate on random balls and random piecewise fields.

    Checks, at every node ``x`` of the ball ``B``,

        phi(x, beta' min{(phi_B^-)^-1(1/|B|), avg_B |f|}) <= avg_B phi(y, |f(y)|) + h(x) + avg_B h

    starting from ``beta' = start_fraction * beta`` and halving on failure.
    The verdict refers to the starting ``beta'``; the largest working value
    is reported as ``beta_prime``.
    """
    rng = np.random.default_rng(seed)
    balls = sample_balls(domain, n_balls, rng)
    hv = np.zeros(domain.size) if h_field is None else np.asarray(h_field.values, dtype=float)
    start = start_fraction * beta
    beta_prime = start
    first = None
    violations = 0
    for c, r, nodes in balls:
        pts = domain.points[nodes] if model.x_dependent else None
        f = _random_field(rng, domain.points[nodes])
        measure = float(ball_volume(domain.n, r))
        alpha = float(left_inverse(lambda t: _grid_values(model, pts, t).min(axis=0),
                                   np.array([1.0 / measure]))[0])
        avg_f = float(f.mean())
        m = min(alpha, avg_f)
        vals_f = model.evaluate(pts, f) if pts is not None else model.evaluate(None, f)
        rhs = float(np.mean(vals_f)) + hv[nodes] + float(hv[nodes].mean())
        bp = start
        while bp > 1e-12:
            lhs = model.evaluate(pts, np.full(len(nodes), bp * m)) if pts is not None else \
                np.full(len(nodes), float(model.evaluate(None, np.array([bp * m]))[0]))
            bad = np.flatnonzero(lhs > rhs * (1 + 1e-12) + 1e-300)
            if not len(bad):
                break
            if bp == start:
                violations += 1
                if first is None:
                    k = int(bad[0])
                    first = {"center": domain.points[c].tolist(), "radius": r,
                             "x": domain.points[nodes[k]].tolist(), "beta_prime": bp,
                             "alpha": alpha, "mean_f": avg_f, "lhs": float(lhs[k]), "rhs": float(rhs[k])}
            bp /= 2
        beta_prime = min(beta_prime, bp)
    report = AssumptionReport("jensen_key", HOLDS, {"beta": beta, "sigma": sigma, "beta_prime_start": start,
                                                    "beta_prime": beta_prime, "violations": violations,
                                                    "balls": len(balls)}, seed=seed, n_samples=len(balls))
    if first is not None:
        report.verdict = VIOLATED
        report.counterexample = first
    return report


# ------------------------------------------------------------- re-evaluation


def _phi1(model, x, t):
    pts = None if x is None else np.asarray(x, dtype=float).reshape(1, -1)
    return float(model.evaluate(pts, np.array([float(t)]))[0])


def confirm_counterexample(model: PhiModel, report: AssumptionReport) -> bool:
    """Re-evaluate a reported counterexample with fresh ``phi`` calls."""
    ce = report.counterexample
    if report.verdict != VIOLATED or ce is None:
        return False
    kind = report.assumption
    if kind == "doubling":
        v1, v2 = _phi1(model, ce["x"], ce["t"]), _phi1(model, ce["x"], 2 * ce["t"])
        return (v1 == 0 and v2 > 0) or (math.isfinite(v1) and math.isinf(v2)) or v2 > ce["A_limit"] * v1
    if kind in ("aInc", "aDec"):
        e = ce["exponent"]
        g1 = _phi1(model, ce["x"], ce["s1"]) * ce["s1"] ** -e
        g2 = _phi1(model, ce["x"], ce["s2"]) * ce["s2"] ** -e
        if kind == "aInc":
            return g1 > ce["c_max"] * g2
        return g2 > ce["c_max"] * g1
    if kind == "A0":
        if "reason" in ce:
            # no grid pair: the reported value must reproduce
            return math.isclose(_phi1(model, ce["x"], ce["t"]), ce["phi"], rel_tol=1e-12)
        inv = float(np.atleast_1d(model.inverse(None if ce["x"] is None else np.atleast_2d(ce["x"]),
                                                np.array([1.0])))[0])
        return not (ce["beta"] * ce["sigma"] * (1 - 1e-9) <= inv <= ce["sigma"] * (1 + 1e-9))
    if kind == "A1":
        x = ce["x"]
        y = ce["y"]
        return _phi1(model, x, ce["beta"] * ce["t"]) > _phi1(model, y, ce["t"])
    if kind == "A2":
        lhs = _phi1(model, ce["x"], ce["beta"] * ce["t"])
        return lhs > _phi1(model, ce["y"], ce["t"]) + ce["h_x"] + ce["h_y"]
    if kind == "wpm":
        return ce["lhs"] > ce["rhs"] and math.isclose(
            _phi1(model, ce["x"], ce["a"] + ce["b"]), ce["lhs"], rel_tol=1e-12)
    if kind == "log_holder":
        # a zoom witness: the two coefficient values differ at a tiny separation
        return ce["p_x"] != ce["p_y"] and ce["ratio"] > 0
    return False
