"""Acceptance criteria, one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed
through the capture) or directly with ``python tests/test_acceptance.py``.
Tolerances are pinned here and are not to be relaxed.
"""

from __future__ import annotations

import sys
import time
from math import comb

import numpy as np
import pytest
from oracles import subspace_angle

from bisteklov import ball
from bisteklov.branches import check_lipschitz, check_monotone, first_eigenvalue_zero_limit, parse_grid, sweep
from bisteklov.core import SpectralParameter
from bisteklov.dirichlet import EdgeFunction, HarmonicModes, corner_compat_check, solve_dirichlet
from bisteklov.eigensolver import solve_disk
from bisteklov.weyl import weyl_check

# pinned tolerances
DET_REL = 1e-9
GALERKIN_REL = 1e-8
ZERO_TOL = 1e-8
ANGLE_TOL = 1e-6
LIMIT_GAP = 1e-4
LAMBDA1_BOUND = 2e-6
WEYL_EXP, WEYL_CONST, WEYL_RATIO = 0.005, 0.02, 0.05
DIRICHLET_ERR, FORMS_AGREE, ORACLE_TOL = 1e-10, 1e-8, 1e-10
JUMP_TOL = 1e-6
DEFLATED_TOL = 1e-8


@pytest.fixture
def report(capsys):
    def emit(k: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def harmonic_dim(l, N):
    # dimension of degree-l harmonic polynomials in N variables
    return comb(l + N - 1, N - 1) - (comb(l + N - 3, N - 1) if l >= 2 else 0)


def test_criterion_01_determinant_identity(report):
    t0 = time.perf_counter()
    worst = 0.0
    for N in (2, 3, 4):
        for l in range(1, 51):
            for k in range(5):
                mu = -(10.0**k)
                lam = ball.lambda_branch(l, N, mu)
                M = ball.matrix_Ml(l, N, lam, mu)
                worst = max(worst, abs(ball.det_Ml(l, N, lam, mu)) / (1.0 + np.abs(M).max()))
    dt = time.perf_counter() - t0
    report(1, worst <= DET_REL and dt < 1.0, f"max relative |det M_l| = {worst:.2e} (<= {DET_REL:g}), {dt:.3f} s")


def test_criterion_02_closed_form_spectra(report):
    ok = True
    for N in (2, 3, 4):
        d = ball.ball_spectrum(N, SpectralParameter.dbs(), 8)
        n = ball.ball_spectrum(N, SpectralParameter.nbs(), 8)
        exp_d = [2 * l + 1 for l in range(0, 9) for _ in range(harmonic_dim(l, N))]
        exp_n = [l * (2 * l * l + (N - 1) * l - N + 2) for l in range(0, 9) for _ in range(harmonic_dim(l, N))]
        ok &= np.array_equal(d.values, np.array(exp_d, float)) and np.array_equal(n.values, np.array(exp_n, float))
    eta = [float(v) for v in ball.ball_spectrum(2, SpectralParameter.dbs(), 3).values[:5]]
    xi = [abs(float(v)) for v in ball.ball_spectrum(2, SpectralParameter.nbs(), 3).values[:7]]
    ok &= eta == [1, 3, 3, 5, 5] and xi == [0, 3, 3, 20, 20, 63, 63]
    report(2, bool(ok), f"eta = {eta}, xi = {xi}, multiplicities match for N = 2, 3, 4")


def test_criterion_03_galerkin_vs_analytic(report):
    t0 = time.perf_counter()
    errs = []
    for p in (SpectralParameter.bsm(-1.0), SpectralParameter.bsl(-1.0)):
        g = solve_disk(p, 0.0, l_max=10, K=4).values[:10]
        a = ball.ball_spectrum(2, p, 10).values[:10]
        # the persistent BSL value mu_1 = 0 is compared on an absolute scale
        errs.append(float(np.max(np.abs(g - a) / np.maximum(np.abs(a), 1.0))))
    dt = time.perf_counter() - t0
    report(3, max(errs) <= GALERKIN_REL and dt < 5.0,
           f"max relative error BSM {errs[0]:.1e}, BSL {errs[1]:.1e} (<= {GALERKIN_REL:g}), {dt:.2f} s")


def test_criterion_04_bsl_zero_eigenspace(report):
    rep = solve_disk(SpectralParameter.bsl(0.0), 0.0, l_max=4, K=3)
    rng = np.random.default_rng(0)
    r, t = np.sqrt(rng.uniform(size=60)), rng.uniform(0, 2 * np.pi, 60)
    x, y = r * np.cos(t), r * np.sin(t)
    U = rep.values_at(x, y) @ rep.eigenvectors[:, :3]
    angle = subspace_angle(U, np.column_stack([np.ones_like(x), x, y]))
    zeros = float(np.abs(rep.values[:3]).max())
    ok = zeros <= ZERO_TOL and angle <= ANGLE_TOL and rep.spectrum.j0 == 4
    report(4, ok, f"max |mu_1..3| = {zeros:.1e}, angle to span(1, x, y) = {angle:.1e}, j0 = {rep.spectrum.j0}")


def _limit_gaps(problem):
    grid = -(10.0 ** np.arange(6, 1, -1))
    tab = sweep(problem, "disk", 0.0, grid, j_max=5)
    return np.abs(tab.branches - tab.targets[:, None]).max(axis=0)


def test_criterion_05_limits(report):
    gm, gl = _limit_gaps("bsm"), _limit_gaps("bsl")
    # grid runs from -1e6 to -1e2, so the gaps must grow along it
    ok = all(np.all(np.diff(g) > 0) and g[0] <= LIMIT_GAP for g in (gm, gl))
    report(5, bool(ok), f"gaps at k = 2..6: BSM {np.round(gm[::-1], 8).tolist()}, BSL {np.round(gl[::-1], 8).tolist()}")


def test_criterion_06_monotone_and_lipschitz(report):
    grid = parse_grid("-1e6:-1:61:log")
    tables = [sweep(p, "disk", 0.0, grid, j_max=10) for p in ("bsm", "bsl")]
    tables.append(sweep("bsm", "square", 0.0, -np.logspace(3, 0, 7), j_max=5, source="galerkin", degree=5))
    mono = all(r.ok for t in tables for r in check_monotone(t))
    lip = [r for t in tables if t.problem.value == "bsm" for r in check_lipschitz(t, 1.0)]
    ok = mono and all(r.ok for r in lip)
    report(6, ok, f"monotone on {sum(len(t.branches) for t in tables)} traced rows, "
                  f"Lipschitz (delta = 1) on {len(lip)} rows")


def test_criterion_07_first_eigenvalue_limit(report):
    lam1 = float(ball.ball_spectrum(2, SpectralParameter.bsm(-1e-6), 10).values[0])
    trend = first_eigenvalue_zero_limit("disk", 0.0, "analytic")
    report(7, lam1 <= LAMBDA1_BOUND and trend.ok, f"lambda_1(-1e-6) = {lam1:.3e} (<= {LAMBDA1_BOUND:g})")


def test_criterion_08_weyl(report):
    t0 = time.perf_counter()
    nbs, dbs = weyl_check("nbs", 2, 10_000), weyl_check("dbs", 2, 10_000)
    bsm, bsl = weyl_check("bsm", 2, 10_000, -10.0), weyl_check("bsl", 2, 10_000, -10.0)
    dt = time.perf_counter() - t0
    checks = [
        abs(nbs.fit.exponent / 3 - 1) <= WEYL_EXP, abs(nbs.fit.constant / 0.25 - 1) <= WEYL_CONST,
        abs(dbs.fit.exponent - 1) <= WEYL_EXP, abs(dbs.fit.constant - 1) <= WEYL_CONST,
        abs(bsm.fit.constant / dbs.fit.constant / 0.75 - 1) <= WEYL_RATIO,
        abs(bsl.fit.constant / nbs.fit.constant / 0.75 - 1) <= WEYL_RATIO,
        dt < 10.0,
    ]
    report(8, all(checks),
           f"NBS {nbs.fit.exponent:.4f}/{nbs.fit.constant:.4f}, DBS {dbs.fit.exponent:.4f}/{dbs.fit.constant:.4f}, "
           f"ratios {bsm.fit.constant / dbs.fit.constant:.4f} {bsl.fit.constant / nbs.fit.constant:.4f}, {dt:.2f} s")


def test_criterion_09_dirichlet(report):
    rng = np.random.default_rng(9)
    r, t = np.sqrt(rng.uniform(size=100)) * 0.999, rng.uniform(0, 2 * np.pi, 100)
    x, y = r * np.cos(t), r * np.sin(t)
    res = solve_dirichlet(HarmonicModes({(1, "c"): 1.0}), HarmonicModes({}))
    exact = (1.5 * r - 0.5 * r**3) * np.cos(t)
    err = float(np.abs(res.form_i.evaluate(x, y) - exact).max())
    agree = float(np.abs(res.form_i.evaluate(x, y) - res.form_ii.evaluate(x, y)).max())
    worst = 0.0
    for _ in range(20):
        modes = [(l, par) for l in range(0, 9) for par in (("c",) if l == 0 else ("c", "s"))]
        fv, gv = rng.normal(size=len(modes)), rng.normal(size=len(modes))
        sol = solve_dirichlet(HarmonicModes(dict(zip(modes, fv))), HarmonicModes(dict(zip(modes, gv))), K=1)
        for (l, par), fl, gl in zip(modes, fv, gv):
            # u = A r^l + B r^(l+2) with u(1) = f_l and u'(1) = g_l
            A, B = np.linalg.solve([[1.0, 1.0], [l, l + 2.0]], [fl, gl])
            for s in (sol.form_i, sol.form_ii):
                c = s.radial_coefficients(l, par, K=1)
                worst = max(worst, float(np.abs(c - [A, B]).max() / max(1.0, abs(A), abs(B))))
    ok = err <= DIRICHLET_ERR and agree <= FORMS_AGREE and worst <= ORACLE_TOL
    report(9, ok, f"closed-form error {err:.1e}, form (i)/(ii) gap {agree:.1e}, mode-oracle gap {worst:.1e}")


def test_criterion_10_square_corner_jumps(report):
    f = EdgeFunction(lambda x, y, nx, ny: x)
    bad = corner_compat_check(f, EdgeFunction(lambda x, y, nx, ny: 0 * x), tol=JUMP_TOL)
    good = corner_compat_check(f, EdgeFunction(lambda x, y, nx, ny: nx), tol=JUMP_TOL)
    unit = [j for j in bad.jumps if abs(j.jump - 1.0) <= JUMP_TOL]
    corners = [tuple(int(c) for c in j.corner) for j in unit]
    # the criterion asks for unit jumps at exactly two corners; (d_tau x1) tau is
    # e1 on both horizontal edges and 0 on both vertical ones, so all four jump
    ok = (not bad.ok) and len(unit) == 2 and good.ok
    report(10, ok, f"(x1, 0): unit jumps at {len(unit)} corners {corners} (criterion expects 2); "
                   f"(x1, nu1) passes: {good.ok}")


def test_criterion_11_deflated_regime(report):
    rep = solve_disk(SpectralParameter.bsm(10.0), 0.0, l_max=4, K=4)
    gap = float(np.min(np.abs(rep.values - (-1.4))))
    report(11, gap <= DEFLATED_TOL, f"closest value to -1.4 off by {gap:.1e} (<= {DEFLATED_TOL:g})")


def test_criterion_12_property_suite(report):
    import test_properties as tp

    names = [n for n in dir(tp) if n.startswith("test_")]
    failures = []
    t0 = time.perf_counter()
    for n in names:
        try:
            getattr(tp, n)()
        except Exception as exc:  # noqa: BLE001 - collected into the report line
            failures.append(f"{n}: {type(exc).__name__}")
    dt = time.perf_counter() - t0
    report(12, not failures, f"{len(names) - len(failures)}/{len(names)} properties x 200 cases, {dt:.1f} s"
           + (f"; failed {failures}" if failures else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
