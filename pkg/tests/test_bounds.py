import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mompair.bounds import (
    coverage_check,
    morm_constants,
    moru_constants,
    plan_mogu,
    plan_moiu,
    plan_mom,
    plan_mom_split_pairs,
    plan_morgu,
    plan_morm,
    plan_mou,
    plan_moru,
    plan_with_plugin,
    run_plan,
)
from mompair.distributions import NORMAL, constant_law
from mompair.errors import InvalidArgument, OutOfRange
from mompair.kernels import variance_kernel


def test_plan_mom_examples():
    p = plan_mom(1000, 0.001, 1.0)
    assert (p.K, p.B) == (7, 142)
    # 2 sqrt(2) e sqrt(7.9078 / 1000) = 0.68366...
    assert p.radius == pytest.approx(0.6835, rel=1e-3)
    assert p.radius == pytest.approx(2 * math.sqrt(2) * math.e * math.sqrt((1 + math.log(1000)) / 1000), rel=1e-15)
    assert plan_mom(1000, math.exp(1 - 500)).K == 499
    with pytest.raises(OutOfRange, match="e\\^\\(1 - n/2\\)"):
        plan_mom(10, 1e-6)


def test_plan_morm_examples():
    p = plan_morm(1000, 0.001, 9 / 20, sigma=1.0)
    assert (p.K, p.B) == (1521, 23)
    q = plan_morm(1000, 0.001, 1 / 6)
    assert (q.K, q.B) == (35, 3)
    # the displayed formula evaluates to 0.7504 at these inputs
    assert p.radius == pytest.approx(3 * math.sqrt(3) / (2 * 0.45**1.5) * math.sqrt(math.log(2000) / 1000), rel=1e-14)
    assert p.radius == pytest.approx(0.7504, rel=1e-3)
    with pytest.raises(OutOfRange):
        plan_morm(20, 1e-6, 0.1)
    with pytest.raises(InvalidArgument):
        plan_morm(1000, 0.01, 0.5)


def test_plan_mou_examples():
    assert plan_mou(1000, 0.001).K == 32
    assert plan_mou(1000, 0.001, 0.0, 0.0).radius == 0
    assert plan_mou(1000, 0.001, 0.5, 1.0).radius == pytest.approx(0.6205, abs=1e-4)
    with pytest.raises(OutOfRange):
        plan_mou(20, 1e-3)


def test_plan_moru_examples():
    p = plan_moru(1000, 0.001, 0.45, 0.5, 1.0)
    assert (p.K, p.B) == (1521, 23)
    c1, c2 = moru_constants(0.45, 0.5, 1.0)
    assert (c1, c2) == pytest.approx((74.074074, 666.666667), rel=1e-7)
    L = math.log(2000)
    assert p.radius == pytest.approx(math.sqrt(c1 * L / 1000 + c2 * L**2 / (1000 * (8000 - 9 * L))), rel=1e-14)
    assert p.radius == pytest.approx(0.7536, abs=1e-4)
    assert plan_moru(1000, 0.001, 0.45, 0.0, 0.0).radius == 0
    with pytest.raises(OutOfRange):
        plan_moru(1000, 0.001, 0.05)  # B = 1


def test_tau_half_limit():
    tau = 0.5 - 1e-8
    c1, c2 = moru_constants(tau, 1.0, 1.0)
    assert c1 == pytest.approx(108, rel=1e-6) and c2 == pytest.approx(486, rel=1e-6)
    # with a linear kernel only the leading term is present and the radii coincide
    n, delta = 1000, 0.01
    L = math.log(2 / delta)
    mou_radius = math.sqrt(108 * 0.7 * L / n)
    assert plan_moru(n, delta, tau, 0.7, 0.0).radius == pytest.approx(mou_radius, abs=1e-6)


deltas = st.floats(1e-4, 0.4)
taus = st.floats(0.05, 0.49)


@settings(max_examples=60, deadline=None)
@given(st.integers(200, 5000), deltas, taus)
def test_monotonicity(n, delta, tau):
    for f in (
        lambda n, d: plan_mom(n, d, 1.0).radius,
        lambda n, d: plan_morm(n, d, tau, 1.0).radius,
        lambda n, d: plan_mou(n, d, 0.5, 1.0).radius,
        lambda n, d: plan_moru(n, d, tau, 0.5, 1.0).radius,
    ):
        try:
            r = f(n, delta)
            r_bigger_n = f(2 * n, delta)
            r_smaller_delta = f(n, delta / 2)
        except OutOfRange:
            continue
        assert r_bigger_n < r
        assert r_smaller_delta > r


@settings(max_examples=40, deadline=None)
@given(st.integers(500, 5000), deltas, taus, taus)
def test_tau_trade_off(n, delta, t1, t2):
    lo, hi = sorted((t1, t2))
    try:
        a, b = plan_morm(n, delta, lo, 1.0), plan_morm(n, delta, hi, 1.0)
    except OutOfRange:
        return
    assert a.K <= b.K
    assert a.radius >= b.radius


def test_morm_constant():
    assert morm_constants(0.45) == pytest.approx(3 * math.sqrt(3) / (2 * 0.45**1.5))


def test_other_planners():
    p = plan_mom_split_pairs(1000, 0.001, 0.5, 1.0)
    assert (p.K, p.B) == (7, 71)
    assert plan_moiu(1000, 0.001, 1 / 6).K == 35 and plan_moiu(1000, 0.001, 1 / 6).M == 1000
    g = plan_mogu([300, 400], [1, 2], 0.01)
    assert g.K == math.ceil(4.5 * math.log(100))
    with pytest.raises(OutOfRange):
        plan_mogu([30, 40], [1, 2], 0.001)
    with pytest.raises(OutOfRange):
        plan_morgu([1000, 30], [1, 2], 0.01, 0.3)


def test_plugin_plan_is_labelled():
    x = np.random.default_rng(0).standard_normal(500)
    p = plan_with_plugin("MoU", x, 0.01, kernel=variance_kernel(), rng=1)
    assert "plug-in" in p.note and p.radius > 0


def test_run_plan_requires_kernel():
    with pytest.raises(InvalidArgument):
        run_plan(plan_mou(100, 0.1), np.zeros(100))


def test_coverage_check_examples():
    assert coverage_check(plan_mom(200, 0.01, 0.0), constant_law(2.0), 100, seed=1) == 0
    p = plan_mom(1000, 0.01, 1.0)
    assert coverage_check(p, NORMAL, 200, seed=2) <= 0.01
    with pytest.raises(InvalidArgument):
        coverage_check(p, NORMAL, 99, seed=2)
