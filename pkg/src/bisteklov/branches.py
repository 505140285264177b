"""Parameter sweeps of Steklov spectra and checks on the resulting branches.

A sweep stores two views of the same data. The sorted view has row j equal
to the j-th smallest eigenvalue at each grid point. The continued view
follows individual branches: on the disk each angular mode carries exactly
one branch, on the square branches are matched between neighbouring grid
points by maximal boundary overlap of their eigenfunctions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import ball
from .assembly import Geometry, boundary_points, primitive_boundary_gram
from .core import ConfigurationError, Problem, SpectralParameter
from .eigensolver import _primitive_coords, solve_geometry

logger = logging.getLogger(__name__)


class PreconditionError(ValueError):
    """A check was asked for outside the range where its bound applies."""


@dataclass(frozen=True, eq=False)
class BranchTable:
    """Eigenvalue branches over a strictly increasing parameter grid.

    ``branches`` is the sorted view (rows j = 1..j_max), ``continued`` the
    branch-following view with row labels in ``continued_labels``. NaN marks
    a grid point where a branch sits on a pole; poles are listed in
    ``poles`` as (label, parameter) pairs.
    """

    problem: Problem
    geometry: str
    grid: np.ndarray
    branches: np.ndarray
    continued: np.ndarray
    continued_labels: tuple
    source: str
    targets: np.ndarray | None = None
    continued_targets: np.ndarray | None = None
    poles: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        g = np.asarray(self.grid, dtype=float)
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("parameter grid must be strictly increasing")
        object.__setattr__(self, "grid", g)

    @property
    def j_max(self) -> int:
        return int(self.branches.shape[0])

    def view(self, which: str = "sorted") -> tuple[np.ndarray, tuple, np.ndarray | None]:
        """(matrix, row labels, row targets) for 'sorted' or 'continued'."""
        if which == "sorted":
            labels = tuple(range(1, self.j_max + 1))
            return self.branches, labels, self.targets
        if which == "continued":
            return self.continued, self.continued_labels, self.continued_targets
        raise ValueError(f"unknown view {which!r}")

    def long_rows(self, which: str = "sorted"):
        """Rows (param, j, value, source[, branch]) for long-format CSV output."""
        mat, labels, _ = self.view(which)
        for i, lab in enumerate(labels):
            for k, p in enumerate(self.grid):
                row = [p, i + 1, mat[i, k], self.source]
                if which == "continued":
                    row.append(lab)
                yield row


def parse_grid(text: str) -> np.ndarray:
    """Grid from 'a:b:steps' (linear) or 'a:b:steps:log' (log-spaced in |param|)."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ValueError(f"grid must look like a:b:steps or a:b:steps:log, got {text!r}")
    a, b, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1:
        raise ValueError("grid needs at least one step")
    if len(parts) == 4:
        if parts[3] != "log":
            raise ValueError(f"unknown grid spacing {parts[3]!r}")
        if a * b <= 0:
            raise ValueError("log grid endpoints must share a sign and be nonzero")
        sign = np.sign(a)
        g = sign * np.logspace(np.log10(abs(a)), np.log10(abs(b)), steps)
    else:
        g = np.linspace(a, b, steps)
    return np.unique(g)


def _limit_kind(problem: Problem) -> Problem:
    return Problem.DBS if problem is Problem.BSM else Problem.NBS


def _analytic_cap(problem: Problem, grid: np.ndarray, j_max: int, N: int) -> int:
    """Smallest degree cap whose next few degrees all sit above the j_max-th value."""
    cap = j_max + 3
    while True:
        ls = np.arange(cap + 1)
        mults = np.array([ball.multiplicity(int(l), N) for l in ls])
        probe = np.arange(cap + 1, 2 * cap + 2)
        ok = True
        for p in grid:
            vals = ball.branch_values(problem, N, p, ls)
            kth = np.sort(np.repeat(vals[~np.isnan(vals)], mults[~np.isnan(vals)]))[j_max - 1]
            tail = ball.branch_values(problem, N, p, probe)
            if np.any(tail[~np.isnan(tail)] < kth):
                ok = False
                break
        if ok:
            return cap
        cap *= 2


def _analytic_sweep(problem, grid, j_max, N) -> tuple:
    cap = _analytic_cap(problem, grid, j_max, N)
    ls = np.arange(cap + 1)
    mults = np.array([ball.multiplicity(int(l), N) for l in ls])
    cont = np.empty((ls.size, grid.size))
    sorted_rows = np.full((j_max, grid.size), np.nan)
    poles = []
    for k, p in enumerate(grid):
        vals = ball.branch_values(problem, N, p, ls)
        cont[:, k] = vals
        for l in ls[np.isnan(vals)]:
            poles.append((f"l={int(l)}", float(p)))
        finite = ~np.isnan(vals)
        expanded = np.sort(np.repeat(vals[finite], mults[finite]), kind="stable")
        m = min(j_max, expanded.size)
        sorted_rows[:m, k] = expanded[:m]
    labels = tuple(f"l={int(l)}" for l in ls)
    lim = _limit_kind(problem)
    cont_targets = ball.branch_values(lim, N, None, ls)
    targets = np.sort(np.repeat(cont_targets, mults))[:j_max]
    return sorted_rows, cont, labels, targets, cont_targets, tuple(poles)


def _boundary_modes(rep, order: int) -> np.ndarray:
    """Eigenvectors in primitive coordinates, normalized in the boundary Gram."""
    basis = rep.blocks[0].basis
    P = _primitive_coords(basis, rep.eigenvectors)
    G = primitive_boundary_gram(basis, order)
    nrm = np.sqrt(np.maximum(np.einsum("ij,ik,kj->j", P, G, P), 1e-300))
    return P / nrm, G


def _match_by_overlap(prev_rep, cur_rep, n: int, order: int) -> np.ndarray:
    """Assignment maximizing boundary overlap of eigenfunctions."""
    Pp, G = _boundary_modes(prev_rep, order)
    Pc, _ = _boundary_modes(cur_rep, order)
    overlap = np.abs(Pp[:, :n].T @ G @ Pc[:, :n])
    _, cols = linear_sum_assignment(-overlap)
    return cols


def _galerkin_sweep(problem, geometry, sigma, grid, j_max, l_max, K, degree, threads):
    reports = [
        solve_geometry(geometry, SpectralParameter(problem, float(p)), sigma, l_max, K, degree, threads=threads)
        for p in grid
    ]
    sorted_rows = np.full((j_max, grid.size), np.nan)
    for k, rep in enumerate(reports):
        m = min(j_max, rep.values.size)
        sorted_rows[:m, k] = rep.values[:m]
    limit = solve_geometry(geometry, SpectralParameter(_limit_kind(problem)), sigma, l_max, K, degree,
                           threads=threads)
    targets = np.full(j_max, np.nan)
    m = min(j_max, limit.values.size)
    targets[:m] = limit.values[:m]
    if Geometry(geometry) is Geometry.DISK:
        # one eigenvalue per angular mode: continue each branch by its mode
        modes = [blk.mode for blk in reports[0].blocks]
        cont = np.full((len(modes), grid.size), np.nan)
        for k, rep in enumerate(reports):
            for j in range(rep.values.size):
                cont[int(rep.origin[j]), k] = rep.values[j]
        labels = tuple(f"l={l}{par}" for l, par in modes)
        cont_targets = np.full(len(modes), np.nan)
        for j in range(limit.values.size):
            cont_targets[int(limit.origin[j])] = limit.values[j]
    else:
        # branches are followed by the boundary overlap of their eigenfunctions
        n = min(rep.values.size for rep in reports)
        order = 1 if problem is Problem.BSM else 0
        cont = np.empty((n, grid.size))
        cont[:, 0] = reports[0].values[:n]
        perm = np.arange(n)
        for k in range(1, grid.size):
            cols = _match_by_overlap(reports[k - 1], reports[k], n, order)
            # row i followed column perm[i] at k-1, which continues as cols[perm[i]]
            perm = cols[perm]
            cont[:, k] = reports[k].values[perm]
        labels = tuple(f"b{i + 1}" for i in range(n))
        cont_targets = np.full(n, np.nan)
        m = min(n, limit.values.size)
        cont_targets[:m] = limit.values[:m]
    return sorted_rows, cont, labels, targets, cont_targets, ()


def sweep(
    problem: Problem | str,
    geometry: str = "disk",
    sigma: float = 0.0,
    grid=(-1.0,),
    j_max: int = 5,
    source: str = "analytic",
    N: int = 2,
    l_max: int = 10,
    K: int = 2,
    degree: int = 6,
    threads: int = 1,
) -> BranchTable:
    """Eigenvalues 1..j_max at every grid point, in sorted and continued views.

    ``source='analytic'`` uses the closed-form ball branches (disk = ball
    with N = 2, sigma must be 0); ``'galerkin'`` runs the pencil solver.
    """
    problem = Problem.parse(problem)
    if problem not in (Problem.BSM, Problem.BSL):
        raise ValueError("sweeps apply to the parameter-dependent problems bsm and bsl")
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("parameter grid must be strictly increasing")
    if source == "analytic":
        if sigma != 0:
            raise ValueError("closed-form branches exist only for sigma = 0")
        if geometry not in ("disk", "ball"):
            raise ValueError("analytic branches are available for the disk/ball only")
        parts = _analytic_sweep(problem, grid, j_max, N if geometry == "ball" else 2)
    elif source == "galerkin":
        parts = _galerkin_sweep(problem, geometry, sigma, grid, j_max, l_max, K, degree, threads)
    else:
        raise ValueError(f"unknown source {source!r}")
    sorted_rows, cont, labels, targets, cont_targets, poles = parts
    return BranchTable(problem, geometry, grid, sorted_rows, cont, labels, source,
                       targets, cont_targets, poles, {"sigma": sigma, "N": N})


@dataclass(frozen=True)
class RowVerdict:
    label: object
    ok: bool
    first_violation: int | None = None
    detail: str = ""


def check_monotone(table: BranchTable, view: str = "sorted", slack: float = 1e-10) -> list[RowVerdict]:
    """Each row must be non-increasing as the parameter increases."""
    mat, labels, _ = table.view(view)
    out = []
    for row, lab in zip(mat, labels):
        bad = None
        finite = np.nonzero(np.isfinite(row))[0]
        for a, b in zip(finite[:-1], finite[1:]):
            if row[b] > row[a] + slack * max(1.0, abs(row[a])):
                bad = int(b)
                break
        out.append(RowVerdict(lab, bad is None, bad))
    return out


def check_lipschitz(table: BranchTable, delta: float, view: str = "sorted") -> list[RowVerdict]:
    """|lambda(m1) - lambda(m2)| <= lambda(m1) |m2 - m1| / delta for all m1 < m2 <= -delta."""
    if table.problem is not Problem.BSM:
        raise PreconditionError("the Lipschitz bound is stated for lambda_j(mu) branches")
    if delta <= 0 or np.any(table.grid > -delta):
        raise PreconditionError(f"grid must lie in (-inf, -{delta}]")
    mat, labels, _ = table.view(view)
    g = table.grid
    out = []
    for row, lab in zip(mat, labels):
        bad = None
        for a in range(g.size):
            for b in range(a + 1, g.size):
                if not (np.isfinite(row[a]) and np.isfinite(row[b])):
                    continue
                lhs = abs(row[a] - row[b])
                rhs = row[a] * abs(g[b] - g[a]) / delta
                if lhs > rhs + 1e-12 * max(1.0, abs(row[a])):
                    bad = (a, b)
                    break
            if bad:
                break
        out.append(RowVerdict(lab, bad is None, None if bad is None else bad[1],
                              "" if bad is None else f"pair {bad}"))
    return out


@dataclass(frozen=True)
class LimitRow:
    label: object
    gap_end: float
    decade_gaps: tuple
    decreasing: bool
    persistent: bool


def limit_check(table: BranchTable, targets=None, view: str = "sorted",
                decades=(4, 5, 6), persistent_tol: float = 1e-12) -> list[LimitRow]:
    """Gaps to the limiting spectrum as the parameter tends to -infinity."""
    mat, labels, default = table.view(view)
    tg = default if targets is None else np.asarray(targets, dtype=float)
    if tg is None or len(tg) != mat.shape[0]:
        raise ConfigurationError("targets must supply one value per row")
    g = table.grid
    if g[0] > -(10.0 ** max(decades)) * (1 - 1e-12):
        raise ConfigurationError(f"grid must extend to -1e{max(decades)} or beyond")
    idx = [int(np.argmin(np.abs(g + 10.0**k))) for k in decades]
    out = []
    for row, lab, t in zip(mat, labels, tg):
        gaps = tuple(float(abs(row[i] - t)) for i in idx)
        persistent = all(gp <= persistent_tol * max(1.0, abs(t)) for gp in gaps)
        decreasing = persistent or all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
        out.append(LimitRow(lab, float(abs(row[0] - t)), gaps, decreasing, persistent))
    return out


@dataclass(frozen=True)
class ZeroLimitReport:
    mus: np.ndarray
    lambda1: np.ndarray
    bound_ratio: float
    bound_ok: bool
    tends_to_zero: bool

    @property
    def ok(self) -> bool:
        return self.bound_ok and self.tends_to_zero


def affine_ratio(geometry: str, p=(1.0, 0.0), n: int = 64) -> float:
    """Boundary integral of (p.x)^2 over that of (p.nu)^2, by quadrature."""
    geometry = Geometry(geometry)
    if geometry is Geometry.DISK:
        t = 2 * np.pi * np.arange(n) / n
        w = np.full(n, 2 * np.pi / n)
    else:
        x, wt = np.polynomial.legendre.leggauss(n)
        s, ws = 0.5 * (x + 1), 0.5 * wt
        t = np.concatenate([e + s for e in range(4)])
        w = np.tile(ws, 4)
    x, y, nx, ny = boundary_points(geometry, t)
    px = p[0] * x + p[1] * y
    pn = p[0] * nx + p[1] * ny
    return float(np.sum(w * px**2) / np.sum(w * pn**2))


def first_eigenvalue_zero_limit(geometry: str = "disk", sigma: float = 0.0, source: str = "analytic",
                                ks=range(1, 7), l_max: int = 4, K: int = 2, degree: int = 4) -> ZeroLimitReport:
    """lambda_1(mu) for mu = -10^-k against the affine test-function bound."""
    mus = np.array([-(10.0 ** -k) for k in ks])
    vals = []
    for mu in mus:
        if source == "analytic":
            if geometry != "disk" or sigma != 0:
                raise ValueError("analytic first eigenvalue needs the disk at sigma = 0")
            vals.append(ball.ball_spectrum(2, SpectralParameter.bsm(mu), 2).values[0])
        else:
            rep = solve_geometry(geometry, SpectralParameter.bsm(mu), sigma, l_max, K, degree)
            vals.append(rep.values[0])
    vals = np.array(vals)
    ratio = affine_ratio(geometry)
    bound_ok = bool(np.all(vals <= -mus * ratio * (1 + 1e-9)))
    tends = bool(np.all(np.diff(vals) < 0) and vals[-1] <= 10 * abs(mus[-1]) * ratio)
    return ZeroLimitReport(mus, vals, ratio, bound_ok, tends)


def detect_persistent(table: BranchTable, targets=None, view: str = "continued", tol: float = 1e-9) -> list:
    """Labels of rows equal to their limiting value over the whole grid."""
    mat, labels, default = table.view(view)
    tg = default if targets is None else np.asarray(targets, dtype=float)
    if tg is None or len(tg) != mat.shape[0]:
        raise ConfigurationError("targets must supply one value per row")
    out = []
    for row, lab, t in zip(mat, labels, tg):
        if np.all(np.isfinite(row)) and np.all(np.abs(row - t) <= tol * max(1.0, abs(t))):
            out.append(lab)
    return out


__all__ = [
    "BranchTable",
    "PreconditionError",
    "RowVerdict",
    "LimitRow",
    "ZeroLimitReport",
    "parse_grid",
    "sweep",
    "check_monotone",
    "check_lipschitz",
    "limit_check",
    "affine_ratio",
    "first_eigenvalue_zero_limit",
    "detect_persistent",
]
