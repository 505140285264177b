from __future__ import annotations

from math import factorial, pi

import numpy as np
import pytest

from bisteklov.core import Problem
from bisteklov.weyl import (
    ball_boundary_measure,
    ball_closed_form,
    compare,
    fit_power_law,
    omega,
    predicted,
    weyl_check,
)


def test_ball_volumes():
    assert omega(1) == pytest.approx(2.0)
    assert omega(2) == pytest.approx(pi)
    assert omega(3) == pytest.approx(4 * pi / 3)
    assert ball_boundary_measure(2) == pytest.approx(2 * pi)


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("problem", list(Problem))
def test_law_constant_equals_ball_closed_form(problem, N):
    pred = predicted(problem, N)
    assert pred.constant == pytest.approx(pred.ball_constant, rel=1e-12)


def test_closed_forms_for_the_disk():
    # N = 2: 2^-2 * 1^3 and 2^0 * 1
    assert ball_closed_form(Problem.NBS, 2) == pytest.approx(0.25)
    assert ball_closed_form(Problem.DBS, 2) == pytest.approx(1.0)
    assert ball_closed_form(Problem.BSM, 2) == pytest.approx(0.75)
    assert ball_closed_form(Problem.BSL, 2) == pytest.approx(0.1875)
    assert ball_closed_form(Problem.NBS, 3) == pytest.approx(2 ** (-0.5) * factorial(2) ** 1.5)


def test_prediction_scales_with_boundary_measure():
    a = predicted("dbs", 2, 2 * pi)
    b = predicted("dbs", 2, 4.0)
    assert b.ball_constant is None
    assert b.constant == pytest.approx(a.law_constant / 4.0)


def test_fit_recovers_exact_power_law():
    j = np.arange(1, 1001, dtype=float)
    fit = fit_power_law(2.5 * j**1.5)
    assert fit.exponent == pytest.approx(1.5, abs=1e-12)
    assert fit.constant == pytest.approx(2.5, rel=1e-12)
    assert fit.window == (500, 1000)


def test_fit_input_checks():
    with pytest.raises(ValueError):
        fit_power_law(np.ones(50))
    with pytest.raises(ValueError):
        fit_power_law(np.ones(200), J=300)
    with pytest.raises(ValueError):
        fit_power_law(-np.ones(200))


def test_compare_tolerances():
    j = np.arange(1, 201, dtype=float)
    fit = fit_power_law(1.01 * j)
    assert compare(fit, (1.0, 1.0)).passed
    assert not compare(fit, (1.0, 1.0), tol_constant=0.005).passed


@pytest.mark.parametrize("problem,exp,const", [("nbs", 3.0, 0.25), ("dbs", 1.0, 1.0)])
def test_disk_weyl_fits(problem, exp, const):
    res = weyl_check(problem, 2, 10_000)
    assert res.passed
    assert res.fit.exponent == pytest.approx(exp, rel=0.005)
    assert res.fit.constant == pytest.approx(const, rel=0.02)


def test_parameter_families_carry_three_quarters():
    dbs = weyl_check("dbs", 2, 10_000).fit.constant
    nbs = weyl_check("nbs", 2, 10_000).fit.constant
    assert weyl_check("bsm", 2, 10_000, -10.0).fit.constant / dbs == pytest.approx(0.75, rel=0.05)
    assert weyl_check("bsl", 2, 10_000, -10.0).fit.constant / nbs == pytest.approx(0.75, rel=0.05)
