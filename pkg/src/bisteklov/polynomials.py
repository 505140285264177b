"""Exact bivariate polynomials and closed-form integrals on the unit disk.

A polynomial is a dict mapping exponent pairs (a, b) to rational
coefficients of x^a y^b. Integrals of monomials over the unit disk and
around the unit circle are rational multiples of pi, so every disk
integral below is returned exactly as a Fraction c meaning c * pi.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Dict, Tuple

import numpy as np

Poly = Dict[Tuple[int, int], Fraction]


def clean(p: dict) -> Poly:
    return {k: Fraction(v) for k, v in p.items() if v != 0}


def add(p: Poly, q: Poly) -> Poly:
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0) + v
    return clean(out)


def scale(p: Poly, c) -> Poly:
    return clean({k: v * c for k, v in p.items()})


def mul(p: Poly, q: Poly) -> Poly:
    out: dict = {}
    for (a1, b1), c1 in p.items():
        for (a2, b2), c2 in q.items():
            key = (a1 + a2, b1 + b2)
            out[key] = out.get(key, 0) + c1 * c2
    return clean(out)


def dx(p: Poly) -> Poly:
    return clean({(a - 1, b): c * a for (a, b), c in p.items() if a > 0})


def dy(p: Poly) -> Poly:
    return clean({(a, b - 1): c * b for (a, b), c in p.items() if b > 0})


def radial_derivative(p: Poly) -> Poly:
    """x p_x + y p_y, which equals the normal derivative on the unit circle."""
    out: dict = {}
    for (a, b), c in p.items():
        if a + b:
            out[(a, b)] = c * (a + b)
    return clean(out)


def degree(p: Poly) -> int:
    return max((a + b for a, b in p), default=0)


def evaluate(p: Poly, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for (a, b), c in p.items():
        out = out + float(c) * x**a * y**b
    return out


def harmonic(l: int, parity: str) -> Poly:
    """Re (x + iy)^l for parity 'c', Im (x + iy)^l for parity 's'."""
    out: dict = {}
    for k in range(l + 1):
        if parity == "c" and k % 2 == 0:
            out[(l - k, k)] = Fraction(comb(l, k) * (-1) ** (k // 2))
        elif parity == "s" and k % 2 == 1:
            out[(l - k, k)] = Fraction(comb(l, k) * (-1) ** ((k - 1) // 2))
    return clean(out)


def r2_power(k: int) -> Poly:
    """(x^2 + y^2)^k."""
    return clean({(2 * i, 2 * (k - i)): Fraction(comb(k, i)) for i in range(k + 1)})


@lru_cache(maxsize=None)
def circle_monomial(a: int, b: int) -> Fraction:
    """Integral of cos^a sin^b over [0, 2pi], divided by pi."""
    if a % 2 or b % 2:
        return Fraction(0)
    m, n = a // 2, b // 2
    num = 2 * factorial(2 * m) * factorial(2 * n)
    den = 4 ** (m + n) * factorial(m) * factorial(n) * factorial(m + n)
    return Fraction(num, den)


def disk_monomial(a: int, b: int) -> Fraction:
    """Integral of x^a y^b over the unit disk, divided by pi."""
    return circle_monomial(a, b) / (a + b + 2)


def disk_integral(p: Poly) -> Fraction:
    return sum((c * disk_monomial(a, b) for (a, b), c in p.items()), Fraction(0))


def circle_integral(p: Poly) -> Fraction:
    return sum((c * circle_monomial(a, b) for (a, b), c in p.items()), Fraction(0))


def hessian(p: Poly) -> tuple[Poly, Poly, Poly]:
    px, py = dx(p), dy(p)
    return dx(px), dy(px), dy(py)


def hessian_inner(p: Poly, q: Poly) -> Fraction:
    """Integral of D^2 p : D^2 q over the disk, divided by pi."""
    pxx, pxy, pyy = hessian(p)
    qxx, qxy, qyy = hessian(q)
    integrand = add(add(mul(pxx, qxx), scale(mul(pxy, qxy), 2)), mul(pyy, qyy))
    return disk_integral(integrand)


def laplacian_inner(p: Poly, q: Poly) -> Fraction:
    """Integral of Lap p * Lap q over the disk, divided by pi."""
    pxx, _, pyy = hessian(p)
    qxx, _, qyy = hessian(q)
    return disk_integral(mul(add(pxx, pyy), add(qxx, qyy)))
