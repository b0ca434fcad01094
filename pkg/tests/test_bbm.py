import json
import math

import numpy as np
import pytest

from orliczlab.bbm import (
    CONVERGED,
    DIVERGENT,
    INCONCLUSIVE,
    ConvergenceReport,
    SmoothedQuotient,
    c_n,
    c_n_monte_carlo,
    c_n_quadrature,
    classify,
    eps_norm,
    rho_sharp_eps,
    richardson,
    run_convergence,
    upper_bound_check,
)
from orliczlab.catalog import CoefficientField, function_entry
from orliczlab.errors import ConfigurationError
from orliczlab.geometry import Disk, Interval
from orliczlab.grid import GridDomain, GridField
from orliczlab.kernels import KernelSchedule
from orliczlab.phi import DoublePhase, Power, VariableExponent

UNIT = Interval(0, 1)
DOM = GridDomain(UNIT, 1e-3)
UNIFORM = KernelSchedule("uniform", (0.2, 0.1, 0.05, 0.025))


def field(name, dom=DOM, **params):
    entry = function_entry(name, **params)
    return GridField(dom, entry(dom.points))


def test_c_n_values():
    assert c_n(1) == 0.5
    assert c_n(2) == pytest.approx(4 / (3 * math.pi), rel=1e-15)
    assert c_n(3) == pytest.approx(0.375)
    for n in (1, 2, 3, 5):
        assert c_n_quadrature(n) == pytest.approx(c_n(n), rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_c_n_monte_carlo(n):
    mean, se = c_n_monte_carlo(n, 200_000, seed=n)
    assert abs(mean - c_n(n)) < 3 * se


def test_constant_field_gives_zero():
    f = GridField(DOM, np.full(DOM.size, 4.0))
    assert rho_sharp_eps(Power(2.0), f, UNIFORM, 0.1) == 0.0
    assert eps_norm(Power(2.0), f, UNIFORM, 0.1) == 0.0


def test_linear_closed_form():
    ev = SmoothedQuotient(Power(2.0), field("linear"))
    for eps in UNIFORM.eps:
        assert ev.rho(UNIFORM, eps) == pytest.approx((1 - eps) / 4, rel=0.02)


def test_sin_pi_approaches_target():
    rep = run_convergence(Power(2.0), function_entry("sin_pi"), UNIFORM, DOM, tolerance=0.02)
    assert rep.extrapolated_modular == pytest.approx(math.pi ** 2 / 8, rel=0.02)
    assert rep.classification == CONVERGED


def test_eps_norm_homogeneity():
    f = field("sin_pi")
    model = DoublePhase(2.0, 3.0, CoefficientField.make("x"), UNIT)
    n1 = eps_norm(model, f, UNIFORM, 0.1, tol=1e-8)
    n2 = eps_norm(model, f.scaled(2.0), UNIFORM, 0.1, tol=1e-8)
    assert n2 == pytest.approx(2 * n1, rel=1e-7)


def test_eps_norm_linear_limit():
    rep = run_convergence(Power(2.0), function_entry("linear"), UNIFORM, DOM)
    assert rep.extrapolated_norm == pytest.approx(0.5, rel=0.02)
    assert rep.eps_norm == sorted(rep.eps_norm)


def test_eps_below_minimum_rejected():
    with pytest.raises(ConfigurationError):
        rho_sharp_eps(Power(2.0), field("linear"), KernelSchedule("uniform", (0.005,)), 0.005)


def test_gagliardo_reports_floor_mass():
    ks = KernelSchedule("gagliardo", (0.2, 0.05))
    ev = SmoothedQuotient(Power(2.0), field("linear"))
    assert ev.floor_mass(ks, 0.05) > ev.floor_mass(ks, 0.2) > 0
    assert 0.2 < ev.rho(ks, 0.05) <= 0.25 + 1e-9


def test_scaling_consistency():
    f = field("sin_pi")
    model = DoublePhase(2.0, 3.0, CoefficientField.make("x"), UNIT)
    ev = SmoothedQuotient(model, f)
    base = ev.rho(UNIFORM, 0.1)
    for c in (1.5, 3.0, 10.0):
        ratio = ev.rho(UNIFORM, 0.1, 1 / c) / base
        assert c ** 2 <= ratio * (1 + 1e-12) and ratio <= c ** 3 * (1 + 1e-12)


def test_upper_bound_examples():
    zero = upper_bound_check(Power(2.0), GridField(DOM, np.zeros(DOM.size)), UNIFORM, (2.0, 2.0))
    assert zero.passed and zero.constants == [0.0] * 4
    lin = upper_bound_check(Power(2.0), function_entry("linear"), UNIFORM, (2.0, 2.0), domain=DOM)
    assert lin.passed and max(lin.constants) <= 0.25 + 1e-9


def test_grid_field_target_uses_fd_gradient():
    rep = run_convergence(Power(2.0), field("quadratic", center=0.5), UNIFORM)
    # int_0^1 (c_1 2|x - 1/2|)^2 dx = 1/12
    assert rep.target_modular == pytest.approx(1 / 12, rel=5e-3)


def test_report_roundtrip_and_recompute():
    rep = run_convergence(Power(2.0), function_entry("linear"), UNIFORM, DOM)
    data = json.loads(json.dumps(rep.to_json()))
    again = ConvergenceReport.from_json(data)
    assert again.to_json() == rep.to_json()
    again.rel_err_modular = []
    again.recompute_errors()
    assert again.rel_err_modular == rep.rel_err_modular
    assert rep.rows()[0]["rel_err_modular"] == pytest.approx(abs(rep.rho_eps[0] - rep.target_modular)
                                                            / rep.target_modular)


def test_richardson_exact_for_linear_in_eps():
    eps = [0.2, 0.1, 0.05]
    assert richardson(eps, [3 + 2 * e for e in eps]) == pytest.approx(3.0)


def test_classification_rules():
    eps = [0.2, 0.1, 0.05, 0.025]
    assert classify(eps, [1, 1, 1, 1], 1.0, 1.0, 0.01) == CONVERGED
    assert classify(eps, [1, 2, 4, 8], math.inf, math.inf, 0.01) == DIVERGENT
    assert classify(eps, [1, 1.1, 1.2, 1.3], 1.4, 2.0, 0.01) == INCONCLUSIVE
    assert classify(eps, [1, 1, 1, 1], 1.2, 1.0, 0.01, band=1.5) == CONVERGED


def test_divergent_target_detected():
    rep = run_convergence(Power(2.0), function_entry("abs_power", gamma=0.25), UNIFORM, DOM)
    assert math.isinf(rep.target_modular)
    assert rep.classification == DIVERGENT
    assert all(b > a for a, b in zip(rep.rho_eps, rep.rho_eps[1:]))


def test_two_dimensional_log_holder_exponent():
    disk = Disk((0, 0), 1.0)
    dom = GridDomain(disk, 1 / 128)
    model = VariableExponent(CoefficientField.make("log_holder", x0=[0, 0], base=2.0, amplitude=1.0), disk)
    ks = KernelSchedule("uniform", (0.4, 0.2, 0.1))
    rep = run_convergence(model, function_entry("gaussian", width=0.7), ks, dom, tolerance=0.05, center_stride=4)
    assert rep.classification == CONVERGED
