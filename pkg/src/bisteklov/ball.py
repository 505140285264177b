"""Closed-form spectra of the four Steklov problems on the unit N-ball at sigma = 0.

Every eigenfunction separates as (A r^l + B r^(l+2)) H_l with H_l a spherical
harmonic of degree l, and (A, B) lies in the kernel of a 2x2 matrix M_l whose
determinant couples lambda and mu. For fixed l the coupling is a rectangular
hyperbola with asymptotes at the clamped values eta_l = 2l + 1 and
xi_l = l(2l^2 + (N-1)l - N + 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Problem, SpectralParameter, Spectrum, first_positive_index


class PoleError(ValueError):
    """Raised when a parameter coincides with a vertical asymptote."""


class OffBranchError(ValueError):
    """Raised when (lambda, mu) does not make M_l singular."""


@dataclass(frozen=True)
class PoleAt:
    """Marker returned by a branch evaluator at its vertical asymptote."""

    location: float
    l: int

    def __float__(self) -> float:  # pragma: no cover - guard against silent use
        raise TypeError(f"branch l={self.l} has a pole at {self.location}")


@dataclass(frozen=True)
class BallBranch:
    """Data attached to the degree-l family of ball eigenfunctions."""

    l: int
    N: int

    @property
    def eta(self) -> float:
        return eta_l(self.l)

    @property
    def xi(self) -> float:
        return xi_l(self.l, self.N)

    @property
    def multiplicity(self) -> int:
        return multiplicity(self.l, self.N)


@dataclass(frozen=True)
class ModeEigenfunction:
    """Radial profile A r^l + B r^(l+2) times the harmonic with given index."""

    l: int
    A: float
    B: float
    harmonic_index: int = 0

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.A * r**self.l + self.B * r ** (self.l + 2)


def _check(l: int, N: int) -> None:
    if l < 0 or int(l) != l:
        raise ValueError(f"harmonic degree must be a non-negative integer, got {l}")
    if N < 2 or int(N) != N:
        raise ValueError(f"dimension must be an integer >= 2, got {N}")


def eta_l(l: int) -> float:
    return 2.0 * l + 1.0


def xi_l(l: int, N: int) -> float:
    return float(l * (2 * l * l + (N - 1) * l - N + 2))


def multiplicity(l: int, N: int) -> int:
    """Dimension of the space of degree-l spherical harmonics in N variables."""
    _check(l, N)
    if l == 0:
        return 1
    # (2l+N-2)(l+N-3)! / (l! (N-2)!) written with a binomial to stay small
    return (2 * l + N - 2) * math.comb(l + N - 3, N - 2) // l


def _quartic(l, N):
    return 3 * l**4 + 2 * (N - 2) * l**3 - (N + 1) * l**2 - (N - 2) * l


def matrix_Ml(l: int, N: int, lam: float, mu: float) -> np.ndarray:
    _check(l, N)
    return np.array(
        [
            [l * (l - 1 - lam), (l + 2) * (l + 1 - lam)],
            [l * (l + N - 2) * (l - 1) - mu, l * (l * (l - 5) + N * (l - 1) - 2) - mu],
        ],
        dtype=float,
    )


def det_Ml(l: int, N: int, lam: float, mu: float) -> float:
    m = matrix_Ml(l, N, lam, mu)
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def lambda_branch(l: int, N: int, mu: float) -> float | PoleAt:
    """lambda on branch l as a function of mu; l = 0 is the constant branch 1."""
    _check(l, N)
    if l == 0:
        return 1.0
    xi = xi_l(l, N)
    if mu == xi:
        return PoleAt(xi, l)
    return (_quartic(l, N) - eta_l(l) * mu) / (xi - mu)


def mu_branch(l: int, N: int, lam: float) -> float | PoleAt:
    """mu on branch l as a function of lambda; l = 0 is the constant branch 0."""
    _check(l, N)
    if l == 0:
        return 0.0
    eta = eta_l(l)
    if lam == eta:
        return PoleAt(eta, l)
    return (_quartic(l, N) - xi_l(l, N) * lam) / (eta - lam)


def branch_values(problem: Problem, N: int, param: float | None, ls: np.ndarray) -> np.ndarray:
    """Vectorized branch values for degrees ``ls``; NaN marks a pole."""
    ls = np.asarray(ls, dtype=float)
    eta = 2.0 * ls + 1.0
    xi = ls * (2 * ls**2 + (N - 1) * ls - N + 2)
    if problem is Problem.DBS:
        return eta
    if problem is Problem.NBS:
        return xi
    quartic = _quartic(ls, N)
    with np.errstate(divide="ignore", invalid="ignore"):
        if problem is Problem.BSM:
            out = (quartic - eta * param) / (xi - param)
            out = np.where(ls == 0, 1.0, out)
            out = np.where((ls > 0) & (xi == param), np.nan, out)
        else:
            out = (quartic - xi * param) / (eta - param)
            out = np.where(ls == 0, 0.0, out)
            out = np.where((ls > 0) & (eta == param), np.nan, out)
    return out


def ball_spectrum(N: int, param: SpectralParameter, l_max: int) -> Spectrum:
    """Sorted spectrum from branches l = 0..l_max expanded by multiplicity."""
    _check(l_max, N)
    kind = param.kind
    if kind is Problem.BSM and not param.value < 0:
        raise ValueError("analytic BSM spectrum needs mu < 0; use the deflated solver")
    if kind is Problem.BSL and not param.value < 1.0:
        raise ValueError("analytic BSL spectrum needs lambda < eta_1 = 1; use the deflated solver")
    ls = np.arange(l_max + 1)
    vals = branch_values(kind, N, param.value, ls)
    if np.any(np.isnan(vals)):
        bad = int(ls[np.isnan(vals)][0])
        which = "xi" if kind is Problem.BSM else "eta"
        raise PoleError(f"parameter {param.value} collides with {which}_({bad})")
    mults = np.array([multiplicity(int(l), N) for l in ls])
    expanded = np.repeat(vals, mults)
    # stable sort keeps lower degrees first among ties
    order = np.argsort(expanded, kind="stable")
    values = expanded[order]
    j0 = None
    if kind is Problem.BSL:
        j0 = first_positive_index(values, 1e-12 * max(1.0, np.abs(values).max()))
    return Spectrum(kind=kind, values=values, j0=j0, param=param.value)


def spectrum_degrees(N: int, l_max: int) -> np.ndarray:
    """Degree l of each entry of an unsorted multiplicity-expanded list."""
    ls = np.arange(l_max + 1)
    return np.repeat(ls, [multiplicity(int(l), N) for l in ls])


def eigenfunction_coeffs(l: int, N: int, lam: float, mu: float, tol: float = 1e-9) -> tuple[float, float]:
    """Unit kernel vector (A, B) of M_l with A >= 0 (B > 0 when A = 0).

    At (lambda, mu) = (1, 0) and l = 0 the matrix vanishes and the kernel is
    the whole plane; the constant profile (1, 0) is returned.
    """
    m = matrix_Ml(l, N, lam, mu)
    scale = 1.0 + np.abs(m).max()
    if abs(det_Ml(l, N, lam, mu)) > tol * scale * scale:
        raise OffBranchError(
            f"(lambda, mu) = ({lam}, {mu}) is not on branch l={l} (det={det_Ml(l, N, lam, mu)})"
        )
    if np.abs(m).max() <= tol:
        return (1.0, 0.0)
    _, _, vt = np.linalg.svd(m)
    A, B = vt[-1]
    if A < 0 or (A == 0 and B < 0):
        A, B = -A, -B
    if abs(A) <= 1e-15:
        A = 0.0
    return float(A), float(B)


__all__ = [
    "PoleAt",
    "PoleError",
    "OffBranchError",
    "BallBranch",
    "ModeEigenfunction",
    "eta_l",
    "xi_l",
    "multiplicity",
    "matrix_Ml",
    "det_Ml",
    "lambda_branch",
    "mu_branch",
    "branch_values",
    "ball_spectrum",
    "spectrum_degrees",
    "eigenfunction_coeffs",
]
