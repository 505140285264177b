"""Randomized invariants, 200 cases each."""

from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from bisteklov.assembly import build_pencil, disk_mode_basis, is_positive_definite, pencil_parts, square_basis
from bisteklov.core import CoeffSequence, SpectralParameter, seq_membership
from bisteklov.eigensolver import choose_shift_b, solve_basis, solve_disk, solve_pencil, solve_square, trace_basis

CASES = settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])

sigmas = st.floats(-0.9, 0.9)
mus = st.floats(-100.0, -0.01)
# below eta_1 = 1 on the disk and above the first deflation threshold
lams = st.floats(-100.0, 0.8)


@st.composite
def bases(draw):
    if draw(st.booleans()):
        l = draw(st.integers(0, 8))
        par = "c" if l == 0 else draw(st.sampled_from(["c", "s"]))
        return disk_mode_basis(l, draw(st.integers(1, 5)), par)
    return square_basis(draw(st.integers(2, 4)))


@st.composite
def disk_params(draw):
    kind = draw(st.sampled_from(["bsm", "bsl", "dbs", "nbs"]))
    if kind == "bsm":
        return SpectralParameter.bsm(draw(mus))
    if kind == "bsl":
        return SpectralParameter.bsl(draw(lams))
    return SpectralParameter.dbs() if kind == "dbs" else SpectralParameter.nbs()


def _pencil(basis, sigma, param):
    base, Bmass, _ = pencil_parts(basis, sigma, param)
    b = choose_shift_b((base, Bmass), param.value if param.kind.value == "bsl" else -1.0)
    return build_pencil(basis, sigma, param, b)


@CASES
@given(bases(), sigmas, mus)
def test_pencil_is_symmetric_and_coercive(basis, sigma, mu):
    pen = build_pencil(basis, sigma, SpectralParameter.bsm(mu), b=0.0)
    for M in (pen.A, pen.Bmass):
        assert np.abs(M - M.T).max() <= 1e-12 * max(1.0, np.abs(M).max())
    # Q_sigma - mu M0 is a scalar product for mu < 0
    assert is_positive_definite(pen.A)


@CASES
@given(bases(), sigmas, st.one_of(mus.map(SpectralParameter.bsm), st.floats(-50.0, 0.5).map(SpectralParameter.bsl)))
def test_eigenvectors_are_orthonormal_in_the_form(basis, sigma, param):
    pen = _pencil(basis, sigma, param)
    rep = solve_pencil(pen)
    X = rep.eigenvectors
    np.testing.assert_allclose(X.T @ pen.A @ X, np.eye(X.shape[1]), atol=1e-8)


@CASES
@given(st.integers(1, 6), st.integers(1, 4), sigmas, disk_params())
def test_disk_trace_basis_is_orthonormal(l_max, K, sigma, param):
    tb = trace_basis(solve_disk(param, sigma, l_max=l_max, K=K))
    np.testing.assert_allclose(tb.gram(), np.eye(len(tb)), atol=1e-9)


@CASES
@given(st.integers(2, 5), st.sampled_from([0.0, 0.3]),
       st.sampled_from([SpectralParameter.bsm(-1.0), SpectralParameter.bsl(-1.0),
                        SpectralParameter.dbs(), SpectralParameter.nbs()]))
def test_square_trace_basis_is_orthonormal(degree, sigma, param):
    tb = trace_basis(solve_square(param, sigma, degree=degree))
    np.testing.assert_allclose(tb.gram(), np.eye(len(tb)), atol=1e-9)


@CASES
@given(bases(), sigmas, st.one_of(mus.map(SpectralParameter.bsm), st.floats(-50.0, 0.5).map(SpectralParameter.bsl)),
       st.floats(0.5, 20.0))
def test_spectrum_does_not_depend_on_the_shift(basis, sigma, param, extra):
    base, Bmass, _ = pencil_parts(basis, sigma, param)
    b = choose_shift_b((base, Bmass), param.value if param.kind.value == "bsl" else -1.0)
    v1 = solve_basis(basis, sigma, param, b=b).values
    v2 = solve_basis(basis, sigma, param, b=b + extra).values
    assert v1.size == v2.size
    np.testing.assert_allclose(v1, v2, rtol=1e-8, atol=1e-8)


coeffs = st.lists(st.floats(-10.0, 10.0, allow_nan=False), min_size=6, max_size=60)


@CASES
@given(coeffs, st.data(), st.floats(0.0, 2.0), st.one_of(st.none(), st.floats(0.0, 4.0)))
def test_membership_is_monotone_under_domination(t, data, exponent, p_t):
    t = np.array(t)
    u = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=t.size, max_size=t.size)))
    s = u * t
    # a dominated sequence decays at least as fast: its declared tail is no slower
    p_s = None if p_t is None else p_t + data.draw(st.floats(0.0, 2.0))
    vt = seq_membership(CoeffSequence(t, tail_model=p_t), exponent)
    vs = seq_membership(CoeffSequence(s, tail_model=p_s), exponent)
    assert vs.partial_sum <= vt.partial_sum * (1 + 1e-12) + 1e-300
    if vt.member:
        assert vs.member


@CASES
@given(st.integers(12, 80), st.floats(0.2, 4.0), st.floats(0.01, 1.0), st.floats(0.0, 2.0))
def test_membership_monotone_with_fitted_tails(n, p, scale, exponent):
    j = np.arange(1, n + 1, dtype=float)
    t = j**-p
    vt = seq_membership(CoeffSequence(t, tail_model="fit"), exponent)
    vs = seq_membership(CoeffSequence(scale * t, tail_model="fit"), exponent)
    assert vs.partial_sum <= vt.partial_sum
    if vt.member:
        assert vs.member
