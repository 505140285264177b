"""Leading-order eigenvalue asymptotics and power-law fits."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, gamma, pi

import numpy as np

from . import ball
from .core import Problem, SpectralParameter


def omega(N: int) -> float:
    """Volume of the unit ball in R^N."""
    return pi ** (N / 2) / gamma(N / 2 + 1)


def ball_boundary_measure(N: int) -> float:
    return N * omega(N)


# (numerator, exponent multiplier): value_j ~ num / omega_{N-1}^{e} (j / |bd|)^{e}
_LAWS = {
    Problem.DBS: (4 * pi, 1),
    Problem.NBS: (16 * pi**3, 3),
    Problem.BSM: (3 * pi, 1),
    Problem.BSL: (12 * pi**3, 3),
}


@dataclass(frozen=True)
class WeylPrediction:
    """value_j ~ constant * j^exponent for a domain with the given |boundary|.

    ``law_constant`` is the domain-independent coefficient multiplying
    (j / |boundary|)^exponent; ``constant`` already absorbs |boundary|.
    ``ball_constant`` is the closed form for the unit ball, when applicable.
    """

    problem: Problem
    N: int
    exponent: float
    law_constant: float
    boundary_measure: float
    constant: float
    ball_constant: float | None


def ball_closed_form(problem: Problem, N: int) -> float:
    """Ball-side constants 2^((N-4)/(N-1)) ((N-1)!)^(3/(N-1)) and the eta analogue."""
    f = factorial(N - 1)
    if problem in (Problem.NBS, Problem.BSL):
        c = 2.0 ** ((N - 4) / (N - 1)) * f ** (3.0 / (N - 1))
    else:
        c = 2.0 ** ((N - 2) / (N - 1)) * f ** (1.0 / (N - 1))
    if problem in (Problem.BSM, Problem.BSL):
        c *= 0.75
    return c


def predicted(problem: Problem | str, N: int, boundary_measure: float | None = None) -> WeylPrediction:
    """Weyl law for the problem; ``boundary_measure`` defaults to the unit ball's."""
    problem = Problem.parse(problem)
    if N < 2:
        raise ValueError("N must be >= 2")
    num, mult = _LAWS[problem]
    e = mult / (N - 1)
    law = num / omega(N - 1) ** e
    unit_ball = boundary_measure is None or np.isclose(boundary_measure, ball_boundary_measure(N))
    bd = ball_boundary_measure(N) if boundary_measure is None else float(boundary_measure)
    return WeylPrediction(problem, N, e, law, bd, law / bd**e,
                          ball_closed_form(problem, N) if unit_ball else None)


@dataclass(frozen=True)
class PowerFit:
    constant: float
    exponent: float
    residual: float
    window: tuple[int, int]


def fit_power_law(values, J: int | None = None) -> PowerFit:
    """Least squares of log(value_j) against log(j) over j in [J/2, J]."""
    v = np.asarray(values, dtype=float)
    J = v.size if J is None else int(J)
    if J < 100:
        raise ValueError("fit needs J >= 100")
    if v.size < J:
        raise ValueError(f"only {v.size} values available for J = {J}")
    lo = J // 2
    j = np.arange(lo, J + 1, dtype=float)
    w = v[lo - 1: J]
    if np.any(w <= 0):
        raise ValueError("nonpositive values in the fitted window; shift or skip them")
    A = np.column_stack([np.ones_like(j), np.log(j)])
    coef, res, *_ = np.linalg.lstsq(A, np.log(w), rcond=None)
    resid = float(np.sqrt(res[0] / j.size)) if res.size else 0.0
    return PowerFit(float(np.exp(coef[0])), float(coef[1]), resid, (lo, J))


@dataclass(frozen=True)
class WeylComparison:
    fit: PowerFit
    constant: float
    exponent: float
    rel_err_exponent: float
    rel_err_constant: float
    tol_exponent: float
    tol_constant: float

    @property
    def passed(self) -> bool:
        return self.rel_err_exponent <= self.tol_exponent and self.rel_err_constant <= self.tol_constant

    def as_dict(self) -> dict:
        return {
            "fit": {"constant": self.fit.constant, "exponent": self.fit.exponent,
                    "residual": self.fit.residual, "window": list(self.fit.window)},
            "prediction": {"constant": self.constant, "exponent": self.exponent},
            "rel_err_exponent": self.rel_err_exponent,
            "rel_err_constant": self.rel_err_constant,
            "tol_exponent": self.tol_exponent,
            "tol_constant": self.tol_constant,
            "pass": self.passed,
        }


def compare(fit: PowerFit, prediction: WeylPrediction | tuple[float, float],
            tol_exponent: float = 0.005, tol_constant: float = 0.02) -> WeylComparison:
    """Relative errors of a fit against a prediction (constant, exponent)."""
    if isinstance(prediction, WeylPrediction):
        c, e = prediction.constant, prediction.exponent
    else:
        c, e = prediction
    return WeylComparison(fit, c, e, abs(fit.exponent - e) / abs(e), abs(fit.constant - c) / abs(c),
                          tol_exponent, tol_constant)


def ball_values(problem: Problem | str, N: int, J: int, param: float | None = None) -> np.ndarray:
    """First J sorted analytic ball eigenvalues (multiplicities expanded)."""
    problem = Problem.parse(problem)
    l = 0
    count = 0
    while count < J:
        count += ball.multiplicity(l, N)
        l += 1
    # a few extra degrees so that the sorted prefix is complete
    l_max = l + 4
    if problem in (Problem.BSM, Problem.BSL):
        sp = SpectralParameter(problem, float(param))
    else:
        sp = SpectralParameter(problem)
    return ball.ball_spectrum(N, sp, l_max).values[:J]


def weyl_check(problem: Problem | str, N: int = 2, J: int = 10_000, param: float | None = None,
               tol_exponent: float = 0.005, tol_constant: float = 0.02) -> WeylComparison:
    """Fit the analytic ball spectrum and compare with the unit-ball prediction."""
    problem = Problem.parse(problem)
    if problem in (Problem.BSM, Problem.BSL) and param is None:
        param = -10.0
    vals = ball_values(problem, N, J, param)
    return compare(fit_power_law(vals, J), predicted(problem, N), tol_exponent, tol_constant)


__all__ = [
    "omega",
    "ball_boundary_measure",
    "WeylPrediction",
    "PowerFit",
    "WeylComparison",
    "ball_closed_form",
    "predicted",
    "fit_power_law",
    "compare",
    "ball_values",
    "weyl_check",
]
