import json
import math

import numpy as np
import pytest

from orliczlab import assumptions as asm
from orliczlab.catalog import CoefficientField
from orliczlab.geometry import Disk, Interval
from orliczlab.grid import GridDomain, GridField
from orliczlab.phi import DoublePhase, LogPerturbedExponent, OrliczTable, PhiModel, Power, StepIndicator, VariableExponent

UNIT = Interval(0, 1)
DOM = GridDomain(UNIT, 1e-3)
COARSE = GridDomain(UNIT, 1e-2)
LOG_HOLDER_P = CoefficientField.make("log_holder", x0=0.0, base=2.0, amplitude=1.0)
JUMP_P = CoefficientField.make("smoothed_step", x0=0.5, width=0.0, low=2.0, high=3.0)
LOG_HOLDER = VariableExponent(LOG_HOLDER_P, UNIT)
JUMP = VariableExponent(JUMP_P, UNIT)


def dp(q=2.5):
    return DoublePhase(2.0, q, CoefficientField.make("holder_bump", x0=0.5, alpha=0.5), UNIT)


def builtins():
    return [
        Power(1.5), Power(2.0), LOG_HOLDER, JUMP, dp(), dp(3.0),
        LogPerturbedExponent(CoefficientField.make("sine", offset=2.0, amplitude=0.5), UNIT),
        OrliczTable.from_function(lambda t: t ** 2 + t ** 3),
        StepIndicator(1.0),
    ]


def samples(model):
    return asm.default_samples(model, COARSE)


def test_doubling_examples():
    assert asm.check_doubling(Power(2.5), samples(Power(2.5))).constants["A"] == pytest.approx(2 ** 2.5)
    step = asm.check_doubling(StepIndicator(1.0), samples(StepIndicator(1.0)))
    assert not step.holds and asm.confirm_counterexample(StepIndicator(1.0), step)
    # the sup 2^2.5 is approached as a(x) t^0.5 grows
    rep = asm.check_doubling(dp(), asm.default_samples(dp(), COARSE, t_range=(1e-3, 1e6)))
    assert rep.holds and rep.constants["A"] == pytest.approx(2 ** 2.5, rel=0.01)
    assert rep.constants["A"] <= 2 ** 2.5


def test_monotonicity_examples():
    s = samples(Power(2.0))
    rep = asm.check_aInc_aDec(Power(2.0), 2.0, "inc", s)
    assert rep.holds and rep.constants["c_up"] == pytest.approx(1.0)
    bad = asm.check_aInc_aDec(Power(2.0), 3.0, "inc", s)
    assert not bad.holds and asm.confirm_counterexample(Power(2.0), bad)
    rep = asm.check_aInc_aDec(dp(3.0), 3.0, "dec", samples(dp(3.0)))
    assert rep.holds and rep.constants["c_down"] >= 1
    with pytest.raises(Exception):
        asm.check_aInc_aDec(Power(2.0), 0.5, "inc", s)


@pytest.mark.parametrize("k", range(9))
def test_doubling_agrees_with_adec(k):
    model = builtins()[k]
    s = samples(model)
    expo = asm.estimate_exponents(model, s)
    doubling = asm.check_doubling(model, s).holds
    adec = expo["phi_down"] is not None
    assert doubling == adec


@pytest.mark.parametrize("k", range(9))
def test_certified_exponents_ordered(k):
    model = builtins()[k]
    expo = asm.estimate_exponents(model, samples(model))
    if expo["phi_up"] is not None and expo["phi_down"] is not None:
        assert expo["phi_up"] <= expo["phi_down"] * (1 + 1e-9)


def test_a0_examples():
    rep = asm.check_A0(Power(3.0), COARSE)
    assert rep.holds and rep.constants["beta"] == 1.0 and rep.constants["sigma"] == 1.0
    varexp = VariableExponent(CoefficientField.make("linear", offset=2.0, slope=1.0), UNIT)
    rep = asm.check_A0(varexp, COARSE)
    assert rep.constants["beta"] == 1.0 and rep.constants["sigma"] == 1.0
    rep = asm.check_A0(dp(), COARSE)
    assert rep.holds and rep.constants["sigma"] == 1.0
    assert rep.constants["beta"] <= 2 ** -0.5 + 1e-12
    assert rep.constants["inverse_form"]


@pytest.mark.parametrize("k", range(9))
def test_a0_implies_loc(k):
    model = builtins()[k]
    a0 = asm.check_A0(model, COARSE)
    if a0.holds:
        t0 = a0.constants["beta"] * a0.constants["sigma"]
        assert asm.check_loc(model, COARSE, t0).holds


def test_a1_examples():
    rep = asm.check_A1(Power(2.0), DOM, 1.0, 1.0, ball_samples=50)
    assert rep.holds and rep.constants["beta_feasible"] == 1.0
    rep = asm.check_A1(LOG_HOLDER, DOM, 0.5, 1.0)
    assert rep.holds and 0 < rep.constants["beta_feasible"] < 1
    bad = asm.check_A1(JUMP, DOM, 0.5, 1.0)
    assert not bad.holds and asm.confirm_counterexample(JUMP, bad)
    ce = bad.counterexample
    assert ce["center"][0] - ce["radius"] < 0.5 < ce["center"][0] + ce["radius"]
    assert bad.constants["forms_agree"]
    assert not bad.constants["inverse_form_holds"]


def test_a1_forms_agree_in_two_dimensions():
    disk = Disk((0, 0), 1.0)
    model = DoublePhase(2.0, 3.0, CoefficientField.make("holder_bump", x0=[0, 0], alpha=0.5), disk)
    rep = asm.check_A1(model, GridDomain(disk, 1 / 32), 0.9, 1.0, ball_samples=60)
    assert rep.constants["forms_agree"]
    assert rep.constants["envelope_violations"] == rep.constants["pointwise_violations"]


def test_a2_examples():
    zero = GridField(COARSE, np.zeros(COARSE.size))
    assert asm.check_A2(Power(2.0), COARSE, 1.0, 1.0, zero).holds
    ones = GridField(COARSE, np.ones(COARSE.size))
    varexp = VariableExponent(CoefficientField.make("linear", offset=2.0, slope=1.0), UNIT)
    assert asm.check_A2(varexp, COARSE, 1.0, 1.0, ones).holds
    wide = Interval(-1, 1)
    adv = DoublePhase(2.0, 2.0, CoefficientField.make("smoothed_step", x0=0.0, width=0.0, low=1e6, high=0.0), wide)
    dom = GridDomain(wide, 0.01)
    rep = asm.check_A2(adv, dom, 1.0, 1.0, GridField(dom, np.zeros(dom.size)))
    assert not rep.holds and asm.confirm_counterexample(adv, rep)
    auto = asm.check_A2(adv, dom, 1.0, 1.0)
    assert auto.holds and auto.constants["h_value"] > 0


class InverseDistance(PhiModel):
    """phi(x, t) = t / |x| on (0, 1)."""

    family = "inverse_distance"
    x_dependent = True
    domain = UNIT

    def _evaluate(self, points, t):
        x = points[:, 0].reshape((-1,) + (1,) * max(np.ndim(t) - 1, 0))
        return t / x


def test_loc_examples():
    assert asm.check_loc(Power(2.0), COARSE, 3.0).holds
    rep = asm.check_loc(StepIndicator(1.0), COARSE, 0.5)
    assert rep.holds and max(rep.constants["integrals"]) == 0.0
    rep = asm.check_loc(InverseDistance(), DOM, 1.0)
    assert rep.holds
    ints = rep.constants["integrals"]
    assert all(b > a for a, b in zip(ints, ints[1:]))


def test_log_holder_examples():
    assert asm.check_log_holder(CoefficientField.make("constant", value=2.0), DOM).constants["C"] == 0.0
    rep = asm.check_log_holder(LOG_HOLDER_P, DOM)
    assert rep.holds and rep.constants["C"] == pytest.approx(1.0, rel=1e-6)
    bad = asm.check_log_holder(JUMP_P, DOM)
    assert not bad.holds
    assert abs(bad.counterexample["x"][0] - 0.5) < 1e-6


def test_wpm_examples():
    phi = Power(2.0)
    # a = b = 1, delta = 1: phi(2) = 4 <= phi(2) + 2^2 phi(1) = 8
    assert phi.evaluate(None, np.array([2.0]))[0] <= 4 + 4 * 1
    for model, dom in ((Power(2.0), None), (dp(), COARSE), (LOG_HOLDER, COARSE)):
        rep = asm.property_wpm(model, 10_000, domain=dom)
        assert rep.holds and rep.constants["violations_first"] == 0


def test_jensen_examples():
    rep = asm.property_jensen_key(Power(2.0), COARSE, 1.0, 1.0, n_balls=50)
    assert rep.holds and rep.constants["beta_prime"] == 0.25


def test_report_json():
    rep = asm.check_doubling(StepIndicator(1.0), samples(StepIndicator(1.0)))
    data = json.loads(json.dumps(rep.to_json()))
    assert set(data) >= {"assumption", "verdict", "constants", "counterexample", "seed", "n_samples"}
    assert data["verdict"] == "violated"
    assert math.isinf(data["constants"]["A"])


def test_seeded_reproducible():
    a = asm.check_A1(LOG_HOLDER, DOM, 0.5, 1.0, ball_samples=30, seed=7).to_json()
    b = asm.check_A1(LOG_HOLDER, DOM, 0.5, 1.0, ball_samples=30, seed=7).to_json()
    assert a == b
