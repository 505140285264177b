from __future__ import annotations

import numpy as np
import pytest
from oracles import subspace_angle
from scipy import linalg

from bisteklov import ball
from bisteklov.assembly import build_pencil, disk_mode_basis, square_basis
from bisteklov.core import Problem, SpectralParameter
from bisteklov.eigensolver import (
    ContractViolation,
    DegenerateParameterError,
    ShiftSearchError,
    choose_shift_b,
    deflated_solve,
    merge_reports,
    solve_basis,
    solve_disk,
    solve_pencil,
    solve_square,
    trace_basis,
)
from bisteklov.linalg import fix_signs, jacobi_eigh, symmetric_eigh


def analytic(param, n, l_max=10):
    return ball.ball_spectrum(2, param, l_max).values[:n]


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(3)
    for n in (1, 2, 7, 30):
        M = rng.standard_normal((n, n))
        S = M + M.T
        w, V = jacobi_eigh(S)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(S), atol=1e-12 * max(1, np.abs(w).max()))
        np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-12)
        np.testing.assert_allclose(S @ V, V * w, atol=1e-11)


def test_jacobi_converges_on_a_spread_spectrum():
    # the stopping test must see off-diagonal mass far below sqrt(eps)
    rng = np.random.default_rng(11)
    Qm, _ = np.linalg.qr(rng.standard_normal((16, 16)))
    w0 = np.concatenate([np.logspace(0, -4, 12), np.zeros(4)])
    S = (Qm * w0) @ Qm.T
    w, V = jacobi_eigh(S)
    assert np.abs(S @ V - V * w).max() < 1e-14
    np.testing.assert_allclose(w, np.sort(w0), atol=1e-14)


def test_symmetric_eigh_large_uses_lapack_path():
    S = np.diag(np.arange(80, dtype=float))
    w, _ = symmetric_eigh(S)
    np.testing.assert_array_equal(w, np.arange(80))


def test_fix_signs():
    X = fix_signs(np.array([[0.1, 0.9], [-0.8, -0.1]]))
    assert X[1, 0] > 0 and X[0, 1] > 0


def test_solve_pencil_matches_scipy_generalized_eigh():
    basis = disk_mode_basis(2, 5, "c")
    pen = build_pencil(basis, 0.2, SpectralParameter.bsm(-3.0), b=0.0)
    rep = solve_pencil(pen)
    # values are 1/theta - b for the positive theta of Bmass x = theta A x
    theta = linalg.eigh(pen.Bmass, pen.A, eigvals_only=True)
    theta = np.sort(theta[theta > 1e-10])[::-1]
    np.testing.assert_allclose(rep.values, 1 / theta, rtol=1e-9)
    assert rep.discarded_kernel_dim == 6 - rep.values.size
    assert rep.residuals.max() < 1e-10


def test_eigenvectors_are_A_orthonormal():
    pen = build_pencil(square_basis(4), 0.0, SpectralParameter.bsm(-1.0), b=0.0)
    rep = solve_pencil(pen)
    X = rep.eigenvectors
    np.testing.assert_allclose(X.T @ pen.A @ X, np.eye(X.shape[1]), atol=1e-9)


@pytest.mark.parametrize("param", [SpectralParameter.bsm(-1.0), SpectralParameter.bsm(-25.0),
                                   SpectralParameter.bsl(-1.0), SpectralParameter.bsl(0.5),
                                   SpectralParameter.dbs(), SpectralParameter.nbs()])
def test_disk_galerkin_matches_ball_formulas(param):
    rep = solve_disk(param, 0.0, l_max=10, K=4)
    np.testing.assert_allclose(rep.values[:15], analytic(param, 15), rtol=1e-9, atol=1e-12)


def test_large_radial_order_is_stable():
    rep = solve_disk(SpectralParameter.bsm(-1.0), 0.0, l_max=4, K=14)
    np.testing.assert_allclose(rep.values[:7], analytic(SpectralParameter.bsm(-1.0), 7, 4), rtol=1e-9)


def test_bsl_zero_eigenspace_is_affine():
    rep = solve_disk(SpectralParameter.bsl(0.0), 0.0, l_max=4, K=3)
    assert rep.spectrum.j0 == 4
    np.testing.assert_allclose(rep.values[:3], 0.0, atol=1e-10)
    # compare the span of the three eigenfunctions with {1, x, y} at sample points
    rng = np.random.default_rng(0)
    r, t = np.sqrt(rng.uniform(size=40)), rng.uniform(0, 2 * np.pi, 40)
    x, y = r * np.cos(t), r * np.sin(t)
    U = rep.values_at(x, y) @ rep.eigenvectors[:, :3]
    assert subspace_angle(U, np.column_stack([np.ones_like(x), x, y])) < 1e-8


def test_shift_is_chosen_from_the_sequence():
    basis = disk_mode_basis(2, 3, "c")
    from bisteklov.assembly import pencil_parts

    parts = pencil_parts(basis, 0.0, SpectralParameter.bsl(-5.0))
    # the l = 2 block has no constants, so lambda < 0 admits b = 0
    assert choose_shift_b(parts[:2], -5.0) == 0.0
    parts0 = pencil_parts(disk_mode_basis(0, 3, "c"), 0.0, SpectralParameter.bsl(-5.0))
    # constants make Q - lambda M1 singular, so the search starts at 1
    assert choose_shift_b(parts0[:2], -5.0) == 1.0
    parts_hi = pencil_parts(basis, 0.0, SpectralParameter.bsl(50.0))
    with pytest.raises(ShiftSearchError):
        choose_shift_b(parts_hi[:2], 50.0)


def test_values_do_not_depend_on_the_shift():
    basis = disk_mode_basis(1, 4, "s")
    p = SpectralParameter.bsl(-2.0)
    v1 = solve_basis(basis, 0.0, p, b=1.0).values
    v2 = solve_basis(basis, 0.0, p, b=8.0).values
    np.testing.assert_allclose(v1, v2, rtol=1e-9, atol=1e-10)


def test_deflated_regime_bsm():
    rep = solve_disk(SpectralParameter.bsm(10.0), 0.0, l_max=4, K=4)
    l2 = ball.lambda_branch(2, 2, 10.0)
    assert np.min(np.abs(rep.values - l2)) < 1e-8
    assert np.min(np.abs(rep.values - (-1.4))) < 1e-8


def test_deflated_regime_bsl_matches_branches():
    rep = solve_disk(SpectralParameter.bsl(2.0), 0.0, l_max=3, K=4)
    expected = {ball.mu_branch(l, 2, 2.0) for l in range(4)}
    for v in expected:
        assert np.min(np.abs(rep.values - v)) < 1e-8 * max(1, abs(v))


def test_degenerate_parameters_are_flagged():
    with pytest.raises(DegenerateParameterError):
        solve_disk(SpectralParameter.bsm(0.0), 0.0, l_max=2, K=2)
    with pytest.raises(DegenerateParameterError):
        solve_disk(SpectralParameter.bsm(3.0), 0.0, l_max=2, K=2)
    basis = disk_mode_basis(1, 3, "c")
    lim = solve_basis(basis, 0.0, SpectralParameter.dbs())
    with pytest.raises(DegenerateParameterError):
        deflated_solve(basis, 0.0, SpectralParameter.bsl(3.0), lim)


def test_deflation_needs_the_matching_limit():
    basis = disk_mode_basis(1, 3, "c")
    lim = solve_basis(basis, 0.0, SpectralParameter.dbs())
    with pytest.raises(ValueError):
        deflated_solve(basis, 0.0, SpectralParameter.bsm(5.0), lim)


def test_trace_basis_is_orthonormal_on_the_boundary():
    for param in (SpectralParameter.bsm(-2.0), SpectralParameter.bsl(-2.0), SpectralParameter.bsl(0.0),
                  SpectralParameter.nbs(), SpectralParameter.dbs()):
        rep = solve_disk(param, 0.0, l_max=5, K=3)
        tb = trace_basis(rep)
        np.testing.assert_allclose(tb.gram(), np.eye(len(tb)), atol=1e-9)


def test_trace_basis_square():
    tb = trace_basis(solve_square(SpectralParameter.bsl(-1.0), 0.0, degree=4))
    np.testing.assert_allclose(tb.gram(), np.eye(len(tb)), atol=1e-8)


def test_trace_basis_contract():
    rep = solve_disk(SpectralParameter.bsm(-1.0), 0.0, l_max=1, K=2)
    bad = rep.spectrum.__class__(rep.spectrum.kind, rep.values, eigenvectors=2 * rep.eigenvectors)
    broken = rep.__class__(bad, rep.discarded_kernel_dim, rep.residuals, rep.b_used, rep.thetas,
                           rep.kernel_tol, rep.blocks, rep.origin)
    with pytest.raises(ContractViolation):
        trace_basis(broken)


def test_merge_reports_requires_common_shift():
    a = solve_basis(disk_mode_basis(0, 2, "c"), 0.0, SpectralParameter.bsl(-1.0), b=1.0)
    b = solve_basis(disk_mode_basis(1, 2, "c"), 0.0, SpectralParameter.bsl(-1.0), b=2.0)
    with pytest.raises(ValueError):
        merge_reports([a, b])


def test_thread_count_does_not_change_results():
    p = SpectralParameter.bsm(-4.0)
    a = solve_disk(p, 0.1, l_max=6, K=3, threads=1).values
    b = solve_disk(p, 0.1, l_max=6, K=3, threads=4).values
    np.testing.assert_array_equal(a, b)


def test_square_spectra_sanity():
    rep = solve_square(SpectralParameter.bsm(-1.0), 0.0, degree=6)
    # symmetric pair from the x/y reflection
    assert rep.values[0] == pytest.approx(rep.values[1], rel=1e-8)
    nbs = solve_square(SpectralParameter.nbs(), 0.0, degree=6)
    assert nbs.values[0] == pytest.approx(0.0, abs=1e-8)
    assert rep.spectrum.kind is Problem.BSM
