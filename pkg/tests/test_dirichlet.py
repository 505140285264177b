from __future__ import annotations

import numpy as np
import pytest

from bisteklov.core import CoeffSequence
from bisteklov.dirichlet import (
    EdgeFunction,
    HarmonicModes,
    IncompatibleDataError,
    SampledCircle,
    TraceSpaceError,
    ball_mode_oracle,
    compat_residual,
    corner_compat_check,
    lift_interior,
    project_to_steklov,
    solve_dirichlet,
    trace_fields,
)
from bisteklov.core import SpectralParameter
from bisteklov.eigensolver import solve_disk, trace_basis

T = np.linspace(0, 2 * np.pi, 128, endpoint=False)


def interior_points(n=100, seed=1):
    rng = np.random.default_rng(seed)
    r, t = np.sqrt(rng.uniform(size=n)) * 0.999, rng.uniform(0, 2 * np.pi, n)
    return r * np.cos(t), r * np.sin(t)


def test_cosine_data_gives_closed_form():
    x, y = interior_points()
    res = solve_dirichlet(HarmonicModes({(1, "c"): 1.0}), HarmonicModes({}))
    r, th = np.hypot(x, y), np.arctan2(y, x)
    exact = (1.5 * r - 0.5 * r**3) * np.cos(th)
    assert np.abs(res.form_i.evaluate(x, y) - exact).max() < 1e-12
    assert np.abs(res.form_ii.evaluate(x, y) - exact).max() < 1e-12


def test_mode_oracle_satisfies_boundary_conditions():
    # u = A r^l + B r^(l+2): u(1) = A + B and u'(1) = l A + (l+2) B
    rng = np.random.default_rng(5)
    for _ in range(20):
        l = int(rng.integers(0, 9))
        f, g = rng.normal(size=2)
        A, B = ball_mode_oracle(l, f, g)
        assert A + B == pytest.approx(f)
        assert l * A + (l + 2) * B == pytest.approx(g)


def test_series_matches_mode_oracle():
    rng = np.random.default_rng(7)
    modes = [(0, "c"), (1, "c"), (2, "s"), (3, "c"), (4, "s")]
    fvals, gvals = rng.normal(size=5), rng.normal(size=5)
    f = HarmonicModes(dict(zip(modes, fvals)))
    g = HarmonicModes(dict(zip(modes, gvals)))
    res = solve_dirichlet(f, g, K=2)
    for (l, par), fl, gl in zip(modes, fvals, gvals):
        A, B = ball_mode_oracle(l, fl, gl)
        for sol in (res.form_i, res.form_ii):
            np.testing.assert_allclose(sol.radial_coefficients(l, par, K=2), [A, B, 0.0], atol=1e-10)


def test_boundary_data_reproduced():
    f = HarmonicModes({(0, "c"): 0.3, (2, "c"): -1.0, (5, "s"): 0.25})
    g = HarmonicModes({(1, "s"): 2.0, (2, "c"): 0.5})
    res = solve_dirichlet(f, g, lam=-3.0, mu=-0.5)
    for sol in (res.form_i, res.form_ii):
        assert np.abs(sol.boundary(0, T) - f.evaluate(T)).max() < 1e-11
        assert np.abs(sol.boundary(1, T) - g.evaluate(T)).max() < 1e-11


def test_sampled_data_with_smooth_function():
    f = SampledCircle.from_callable(lambda x, y, nx, ny: np.exp(x) * np.sin(y))
    g = SampledCircle.from_callable(lambda x, y, nx, ny: x * y)
    res = solve_dirichlet(f, g, l_max=20)
    assert res.compat.verdict == "compatible"
    assert np.abs(res.form_i.boundary(0, T) - f.evaluate(T)).max() < 1e-9
    assert np.abs(res.form_i.boundary(1, T) - g.evaluate(T)).max() < 1e-9
    x, y = interior_points(30)
    assert np.abs(res.form_i.evaluate(x, y) - res.form_ii.evaluate(x, y)).max() < 1e-9


def test_sampled_circle_interpolates():
    f = SampledCircle.from_callable(lambda x, y, nx, ny: 1 + x - 2 * y * y, n=16)
    t = np.array([0.1, 1.7, 4.0])
    np.testing.assert_allclose(f.evaluate(t), 1 + np.cos(t) - 2 * np.sin(t) ** 2, atol=1e-12)
    assert f.norm2() == pytest.approx(HarmonicModes({(0, "c"): 0.0, (1, "c"): 1.0, (2, "c"): 1.0}).norm2())


def test_projection_parseval_flag():
    tb = trace_basis(solve_disk(SpectralParameter.bsl(-1.0), 0.0, l_max=2, K=1))
    inside = project_to_steklov(HarmonicModes({(2, "c"): 1.0}), tb)
    assert inside.parseval_defect < 1e-12 and not inside.under_resolved
    outside = project_to_steklov(HarmonicModes({(2, "c"): 1.0, (6, "s"): 1.0}), tb)
    assert outside.parseval_defect == pytest.approx(0.5, abs=1e-12)
    assert outside.under_resolved


def test_lift_rejects_non_members():
    tf = trace_fields(trace_basis(solve_disk(SpectralParameter.bsl(-1.0), 0.0, l_max=10, K=1)))
    j = np.arange(1, len(tf) + 1, dtype=float)
    with pytest.raises(TraceSpaceError):
        lift_interior(CoeffSequence(j**-1.0, tail_model=1.0), tf)
    part = lift_interior(CoeffSequence(j**-3.0, tail_model=3.0), tf)
    assert part.verdict.member
    with pytest.raises(ValueError):
        lift_interior(CoeffSequence(np.ones(len(tf) + 1)), tf)


def test_square_corner_jumps():
    f = EdgeFunction(lambda x, y, nx, ny: x)
    rep = corner_compat_check(f, EdgeFunction(lambda x, y, nx, ny: 0 * x))
    # d_tau x1 tau is e1 on the horizontal edges and 0 on the vertical ones
    assert [j.jump for j in rep.jumps] == pytest.approx([1.0] * 4, abs=1e-9)
    assert len(rep.failing) == 4
    ok = corner_compat_check(f, EdgeFunction(lambda x, y, nx, ny: nx))
    assert ok.ok and max(j.jump for j in ok.jumps) < 1e-9


def test_square_incompatible_data_refused():
    f = EdgeFunction(lambda x, y, nx, ny: x)
    g = EdgeFunction(lambda x, y, nx, ny: 0 * x)
    assert compat_residual(f, g).verdict == "incompatible"
    with pytest.raises(IncompatibleDataError):
        solve_dirichlet(f, g)


def test_square_biharmonic_polynomial_reproduced():
    def u(x, y):
        return x * x * y + 0.3 * x * y**3 - 0.2 * x**3

    def grad(x, y):
        return 2 * x * y + 0.3 * y**3 - 0.6 * x * x, x * x + 0.9 * x * y * y

    f = EdgeFunction(lambda x, y, nx, ny: u(x, y))
    g = EdgeFunction(lambda x, y, nx, ny: grad(x, y)[0] * nx + grad(x, y)[1] * ny)
    res = solve_dirichlet(f, g, degree=5)
    assert res.compat.verdict == "compatible"
    rng = np.random.default_rng(2)
    x, y = rng.uniform(size=(2, 25))
    for sol in (res.form_i, res.form_ii):
        assert np.abs(sol.evaluate(x, y) - u(x, y)).max() < 1e-9


def test_under_resolved_disk_data_is_inconclusive():
    f = HarmonicModes({(1, "c"): 1.0})
    g = HarmonicModes({(9, "c"): 1.0})
    rep = compat_residual(f, g, l_max=3)
    assert rep.verdict == "inconclusive"
    with pytest.raises(IncompatibleDataError):
        solve_dirichlet(f, g, l_max=3, allow_inconclusive=False)


def test_geometry_mismatch():
    with pytest.raises(ValueError):
        solve_dirichlet(HarmonicModes({}), EdgeFunction(lambda x, y, nx, ny: 0 * x))


def test_harmonic_modes_validation():
    with pytest.raises(ValueError):
        HarmonicModes({(0, "s"): 1.0})
    with pytest.raises(ValueError):
        HarmonicModes({(-1, "c"): 1.0})
