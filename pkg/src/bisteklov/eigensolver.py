"""Generalized symmetric eigensolves for the assembled Steklov pencils.

Every pencil is reduced with the Cholesky factor of its coercive side:
with A = L L^T the matrix C = L^-1 Bmass L^-T is symmetric positive
semidefinite, its positive eigenvalues theta give the weak eigenvalues
1/theta - b, and its null space is the discrete kernel (functions with
vanishing boundary data of the relevant order). C is handled through a
rank-revealing factor Bmass = F F^T so that the kernel is never resolved
by roundoff.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .assembly import (
    CoercivityError,
    FormPencil,
    Geometry,
    SpectralBasis,
    assemble_boundary_mass,
    build_pencil,
    disk_mode_basis,
    disk_modes,
    is_positive_definite,
    pencil_parts,
    square_basis,
)
from .core import Problem, SigmaParameter, SpectralParameter, Spectrum, first_positive_index
from .linalg import fix_signs, symmetric_eigh

logger = logging.getLogger(__name__)

MAX_SHIFT = 2.0**20


class ShiftSearchError(RuntimeError):
    """No admissible shift b up to 2^20; the parameter needs deflation."""


class DegenerateParameterError(ValueError):
    """The parameter coincides with an eigenvalue of the limiting problem."""


class ContractViolation(ValueError):
    """Input eigenpairs do not satisfy the normalization the caller promised."""


@dataclass(frozen=True)
class Block:
    """One independently solved pencil and its offset in the direct sum."""

    pencil: FormPencil
    offset: int

    @property
    def basis(self) -> SpectralBasis:
        return self.pencil.basis

    @property
    def mode(self):
        return self.pencil.basis.mode


@dataclass(frozen=True, eq=False)
class PencilSolveReport:
    """Spectrum of one pencil or of a direct sum of independent pencils.

    ``spectrum.eigenvectors`` columns live in the concatenated coordinates
    of ``blocks``; ``origin[j]`` names the block that produced value j.
    """

    spectrum: Spectrum
    discarded_kernel_dim: int
    residuals: np.ndarray
    b_used: float
    thetas: np.ndarray
    kernel_tol: float
    blocks: tuple[Block, ...]
    origin: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.spectrum.values

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.spectrum.eigenvectors

    @property
    def total_size(self) -> int:
        return sum(b.pencil.size for b in self.blocks)

    def block_diag(self, which: str) -> np.ndarray:
        """Block-diagonal 'A', 'Bmass', 'base', 'M0' or 'M1' over all blocks."""
        mats = []
        for blk in self.blocks:
            p = blk.pencil
            if which in ("M0", "M1"):
                mats.append(assemble_boundary_mass(p.basis, int(which[1])))
            else:
                mats.append(getattr(p, which))
        return linalg.block_diag(*mats) if mats else np.zeros((0, 0))

    def values_at(self, x, y) -> np.ndarray:
        """Direct-sum basis values at interior points, shape (npts, total)."""
        return np.hstack([blk.basis.values(x, y) for blk in self.blocks])

    def traces_at(self, order: int, t) -> np.ndarray:
        return np.hstack([blk.basis.trace(order, t) for blk in self.blocks])

    def mode_of(self, j: int):
        """Angular mode (l, parity) of the 1-based eigenvalue index j."""
        return self.blocks[int(self.origin[j - 1])].mode


def _empty_report(pencil: FormPencil) -> PencilSolveReport:
    spec = Spectrum(pencil.kind, np.zeros(0), eigenvectors=np.zeros((pencil.size, 0)),
                    j0=1 if pencil.kind is Problem.BSL else None, b=pencil.b,
                    param=pencil.param.value)
    return PencilSolveReport(spec, pencil.size, np.zeros(0), pencil.b, np.zeros(0), 0.0,
                             (Block(pencil, 0),), np.zeros(0, dtype=int))


def _zero_tol(values: np.ndarray, b: float) -> float:
    return 1e-9 * max(1.0, b)


def _make_spectrum(kind: Problem, vals: np.ndarray, X: np.ndarray, b: float, param) -> Spectrum:
    j0 = None
    if kind is Problem.BSL:
        j0 = first_positive_index(vals, _zero_tol(vals, b))
    return Spectrum(kind, vals, eigenvectors=X, j0=j0, b=b, param=param)


def boundary_factor(B: np.ndarray) -> np.ndarray:
    """Tall factor F with B = F F^T from a rank-revealing eigendecomposition.

    Forming L^-1 Bmass L^-T directly mixes the conditioning of A into the
    null space of Bmass; going through F keeps that null space exact.
    """
    s, U = np.linalg.eigh(0.5 * (B + B.T))
    cut = 1e3 * B.shape[0] * np.finfo(float).eps * max(float(np.abs(s).max()), np.finfo(float).tiny)
    keep = s > cut
    return U[:, keep] * np.sqrt(s[keep])[None, :]


def solve_pencil(pencil: FormPencil) -> PencilSolveReport:
    """Eigenvalues 1/theta - b and A-orthonormal eigenvectors of a pencil."""
    n = pencil.size
    if n == 0:
        return _empty_report(pencil)
    A, B = pencil.A, pencil.Bmass
    try:
        L = linalg.cholesky(A, lower=True)
    except linalg.LinAlgError as exc:
        raise CoercivityError("Cholesky factorization failed", float(linalg.eigvalsh(A)[0])) from exc
    F = boundary_factor(B)
    G = linalg.solve_triangular(L, F, lower=True)
    theta, Y = symmetric_eigh(G @ G.T)
    tol = n * np.finfo(float).eps * max(float(np.abs(theta).max()), np.finfo(float).tiny)
    # rank(C) = rank(F): only the top F.shape[1] eigenvalues can be genuine
    keep = theta > tol
    keep[: max(0, n - G.shape[1])] = False
    th = theta[keep]
    Y = Y[:, keep]
    X = linalg.solve_triangular(L.T, Y, lower=False)
    order = np.argsort(-th, kind="stable")
    th = th[order]
    X = fix_signs(X[:, order])
    vals = 1.0 / th - pencil.b
    AX = A @ X
    res = np.linalg.norm(AX - (B @ X) / th, axis=0) / np.maximum(np.linalg.norm(AX, axis=0), 1e-300)
    spec = _make_spectrum(pencil.kind, vals, X, pencil.b, pencil.param.value)
    return PencilSolveReport(spec, int(n - th.size), res, pencil.b, th, float(tol),
                             (Block(pencil, 0),), np.zeros(th.size, dtype=int))


def choose_shift_b(pencil_parts: tuple[np.ndarray, np.ndarray], lam: float | None) -> float:
    """Smallest admissible shift from the sequence 0 (only for lam < 0), 1, 2, 4, ...

    ``pencil_parts`` is (base, Bmass); the shifted side is base + b Bmass.
    """
    base, Bmass = pencil_parts
    if lam is not None and lam < 0 and is_positive_definite(base):
        return 0.0
    b = 1.0
    while b <= MAX_SHIFT:
        if is_positive_definite(base + b * Bmass):
            return b
        b *= 2.0
    raise ShiftSearchError(
        f"no shift b <= 2^20 makes the pencil coercive at parameter {lam}; "
        "the parameter is presumably beyond the first limiting eigenvalue, use deflated_solve"
    )


def _shift_hint(param: SpectralParameter) -> float | None:
    # BSM and DBS pencils are coercive without shift whenever the
    # parameter allows it, so they may start from b = 0 as well.
    if param.kind is Problem.BSL:
        return param.value
    if param.kind is Problem.BSM:
        return -1.0 if param.value < 0 else param.value
    if param.kind is Problem.DBS:
        return -1.0
    return None


def solve_basis(
    basis: SpectralBasis,
    sigma: SigmaParameter | float,
    param: SpectralParameter,
    b: float | str = "auto",
) -> PencilSolveReport:
    """Assemble and solve one pencil, choosing b when asked."""
    if b == "auto":
        base, Bmass, _ = pencil_parts(basis, sigma, param)
        b = choose_shift_b((base, Bmass), _shift_hint(param))
    return solve_pencil(build_pencil(basis, sigma, param, float(b)))


# ---------------------------------------------------------------------------
# trace bases


@dataclass(frozen=True, eq=False)
class TraceBasis:
    """L^2(boundary)-orthonormal traces of normalized eigenfunctions.

    Column k of ``lifts`` (direct-sum coordinates of the report) is an
    interior function whose trace of the given order is the k-th basis
    function; ``values`` are the matching eigenvalues.
    """

    report: PencilSolveReport
    lifts: np.ndarray
    order: int
    values: np.ndarray
    j0: int | None

    def __len__(self) -> int:
        return int(self.lifts.shape[1])

    def boundary(self, t) -> np.ndarray:
        """Basis functions at boundary parameters, shape (npts, len)."""
        return self.report.traces_at(self.order, t) @ self.lifts

    def gram(self) -> np.ndarray:
        M = self.report.block_diag(f"M{self.order}")
        return self.lifts.T @ M @ self.lifts


def default_trace_order(kind: Problem) -> int:
    return 1 if kind in (Problem.BSM, Problem.DBS) else 0


def trace_basis(report: PencilSolveReport, order: int | None = None, tol: float = 1e-8) -> TraceBasis:
    """Boundary Hilbert basis sqrt(value + b) * gamma(x_j) from A-normalized x_j.

    For positive values this is sqrt(value) times the trace of the
    eigenfunction normalized in the unshifted form; the block of non-positive
    values (BSL below j0, and the constant NBS mode) is L^2-orthonormalized.
    """
    kind = report.spectrum.kind
    if order is None:
        order = default_trace_order(kind)
    X = report.eigenvectors
    if X is None:
        raise ContractViolation("report carries no eigenvectors")
    if X.size and np.any(np.linalg.norm(X, axis=0) == 0):
        raise ContractViolation("zero eigenfunction supplied")
    A = report.block_diag("A")
    G = X.T @ A @ X
    if X.size and np.abs(G - np.eye(G.shape[0])).max() > tol:
        raise ContractViolation("eigenvectors are not orthonormal in the pencil's A form")
    lifts = X / np.sqrt(report.thetas)[None, :]
    vals = report.values
    low = int(np.sum(vals <= _zero_tol(vals, report.b_used)))
    if low:
        M = report.block_diag(f"M{order}")
        lifts = lifts.copy()
        for k in range(low):
            v = lifts[:, k]
            for i in range(k):
                v = v - (lifts[:, i] @ M @ v) * lifts[:, i]
            lifts[:, k] = v / np.sqrt(v @ M @ v)
    return TraceBasis(report, lifts, order, vals.copy(), report.spectrum.j0)


# ---------------------------------------------------------------------------
# deflation


def _primitive_coords(basis: SpectralBasis, X: np.ndarray) -> np.ndarray:
    return basis.float_transform() @ X


def _basis_coords(basis: SpectralBasis, Z: np.ndarray) -> np.ndarray:
    T = basis.float_transform()
    sol, *_ = np.linalg.lstsq(T, Z, rcond=None)
    return sol


def deflated_solve(
    basis: SpectralBasis,
    sigma: SigmaParameter | float,
    param: SpectralParameter,
    limit_report: PencilSolveReport,
    b: float | str = "auto",
) -> PencilSolveReport:
    """Solve BSM (resp. BSL) beyond the first NBS (resp. DBS) eigenvalue.

    The limiting eigenfunctions with eigenvalue below the parameter span
    U; the pencil is restricted to the complement of U that is orthogonal
    in the parameter-dependent form, then shifted along Bmass until
    coercive.
    """
    kind = param.kind
    want = Problem.NBS if kind is Problem.BSM else Problem.DBS
    if kind not in (Problem.BSM, Problem.BSL):
        raise ValueError("deflation applies to BSM and BSL only")
    if limit_report.spectrum.kind is not want:
        raise ValueError(f"{kind.value} deflation needs a {want.value} spectrum")
    p = param.value
    lim = limit_report.values
    close = np.abs(lim - p) <= 1e-9 * max(1.0, abs(p))
    if np.any(close):
        raise DegenerateParameterError(
            f"parameter {p} equals the {want.value} eigenvalue {lim[close][0]}; "
            "this degenerate case is flagged, not solved"
        )
    base, Bmass, pbasis = pencil_parts(basis, sigma, param)
    below = lim < p
    if len(limit_report.blocks) != 1:
        raise ValueError("deflate one basis at a time")
    lbasis = limit_report.blocks[0].basis
    U = _basis_coords(pbasis, _primitive_coords(lbasis, limit_report.eigenvectors[:, below]))
    if U.shape[1]:
        Z = linalg.null_space(U.T @ base)
    else:
        Z = np.eye(base.shape[0])
    Ar = Z.T @ base @ Z
    Br = Z.T @ Bmass @ Z
    Ar, Br = 0.5 * (Ar + Ar.T), 0.5 * (Br + Br.T)
    if b == "auto":
        if is_positive_definite(Ar):
            b = 0.0
        else:
            b = choose_shift_b((Ar, Br), None)
    b = float(b)
    A = Ar + b * Br
    if not is_positive_definite(A):
        raise CoercivityError(f"deflated pencil not coercive with b={b}", float(linalg.eigvalsh(A)[0]))
    rbasis = pbasis.with_transform(Z)
    pencil = FormPencil(A, Br, rbasis, b, param, float(sigma if not isinstance(sigma, SigmaParameter) else sigma.sigma), Ar)
    rep = solve_pencil(pencil)
    logger.info("deflated %d limiting directions at parameter %g", U.shape[1], p)
    return rep


# ---------------------------------------------------------------------------
# direct sums over disk modes


def merge_reports(reports: Sequence[PencilSolveReport]) -> PencilSolveReport:
    """Direct sum of independent reports, sorted by value (stable in input order)."""
    blocks: list[Block] = []
    vals, ths, res, origin, cols = [], [], [], [], []
    offset = 0
    total = sum(r.total_size for r in reports)
    kernel = 0
    kind = reports[0].spectrum.kind
    b = reports[0].b_used
    for rep in reports:
        if rep.b_used != b:
            raise ValueError("merged reports must share the shift b")
        for blk in rep.blocks:
            blocks.append(Block(blk.pencil, offset + blk.offset))
        X = rep.eigenvectors
        for k in range(rep.values.size):
            col = np.zeros(total)
            col[offset: offset + rep.total_size] = X[:, k]
            cols.append(col)
            origin.append(len(blocks) - len(rep.blocks) + int(rep.origin[k]))
        vals.append(rep.values)
        ths.append(rep.thetas)
        res.append(rep.residuals)
        kernel += rep.discarded_kernel_dim
        offset += rep.total_size
    vals = np.concatenate(vals)
    order = np.argsort(vals, kind="stable")
    X = np.array(cols).T[:, order] if cols else np.zeros((total, 0))
    spec = _make_spectrum(kind, vals[order], X, b, reports[0].spectrum.param)
    tol = max(r.kernel_tol for r in reports)
    return PencilSolveReport(spec, kernel, np.concatenate(res)[order], b,
                             np.concatenate(ths)[order], tol, tuple(blocks),
                             np.asarray(origin, dtype=int)[order])


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def solve_disk(
    param: SpectralParameter,
    sigma: SigmaParameter | float = 0.0,
    l_max: int = 10,
    K: int = 4,
    b: float | str = "auto",
    deflate: bool | str = "auto",
    threads: int = 1,
) -> PencilSolveReport:
    """Galerkin spectrum on the unit disk from independent angular modes.

    A common shift b is used for all modes so that the merged spectrum and
    its trace basis refer to a single shifted form.
    """
    modes = disk_modes(l_max)
    bases = [disk_mode_basis(l, K, par) for l, par in modes]
    need = _needs_deflation(param, sigma, l_max, K) if deflate == "auto" else bool(deflate)
    if need:
        return _solve_disk_deflated(param, sigma, bases, b, threads)
    if b == "auto":
        hint = _shift_hint(param)

        def pick(bs):
            base, Bmass, _ = pencil_parts(bs, sigma, param)
            return choose_shift_b((base, Bmass), hint)

        b = max(_map(pick, bases, threads))
    reports = _map(lambda bs: solve_pencil(build_pencil(bs, sigma, param, float(b))), bases, threads)
    return merge_reports(reports)


def _needs_deflation(param: SpectralParameter, sigma, l_max: int, K: int) -> bool:
    if param.kind is Problem.BSM:
        if param.value == 0:
            raise DegenerateParameterError("mu = 0 equals xi_1 = 0; flagged, not solved")
        return param.value > 0
    if param.kind is Problem.BSL:
        eta1 = solve_disk(SpectralParameter.dbs(), sigma, l_max, K, deflate=False).values[0]
        if abs(param.value - eta1) <= 1e-9 * max(1.0, eta1):
            raise DegenerateParameterError(f"lambda = {param.value} equals eta_1; flagged, not solved")
        return param.value > eta1
    return False


def _solve_disk_deflated(param, sigma, bases, b, threads) -> PencilSolveReport:
    limit = SpectralParameter.nbs() if param.kind is Problem.BSM else SpectralParameter.dbs()
    lims = _map(lambda bs: solve_basis(bs, sigma, limit), bases, threads)
    allvals = np.concatenate([r.values for r in lims])
    if np.any(np.abs(allvals - param.value) <= 1e-9 * max(1.0, abs(param.value))):
        raise DegenerateParameterError(f"parameter {param.value} is a {limit.kind.value} eigenvalue")
    if b == "auto":
        first = _map(lambda pair: deflated_solve(pair[0], sigma, param, pair[1]), list(zip(bases, lims)), threads)
        b = max(r.b_used for r in first)
    reps = _map(lambda pair: deflated_solve(pair[0], sigma, param, pair[1], b=b), list(zip(bases, lims)), threads)
    return merge_reports(reps)


def solve_square(
    param: SpectralParameter,
    sigma: SigmaParameter | float = 0.0,
    degree: int = 6,
    b: float | str = "auto",
    deflate: bool | str = "auto",
) -> PencilSolveReport:
    """Galerkin spectrum on the unit square with the tensor Legendre basis."""
    basis = square_basis(degree)
    if deflate == "auto":
        deflate = False
        if param.kind is Problem.BSM:
            if param.value == 0:
                raise DegenerateParameterError("mu = 0 equals xi_1 = 0; flagged, not solved")
            deflate = param.value > 0
        elif param.kind is Problem.BSL:
            eta1 = solve_basis(basis, sigma, SpectralParameter.dbs()).values[0]
            deflate = param.value > eta1
    if deflate:
        limit = SpectralParameter.nbs() if param.kind is Problem.BSM else SpectralParameter.dbs()
        return deflated_solve(basis, sigma, param, solve_basis(basis, sigma, limit), b=b)
    return solve_basis(basis, sigma, param, b=b)


def solve_geometry(
    geometry: Geometry | str,
    param: SpectralParameter,
    sigma: float = 0.0,
    l_max: int = 10,
    K: int = 4,
    degree: int = 6,
    b: float | str = "auto",
    deflate: bool | str = "auto",
    threads: int = 1,
) -> PencilSolveReport:
    geometry = Geometry(geometry)
    if geometry is Geometry.DISK:
        return solve_disk(param, sigma, l_max, K, b=b, deflate=deflate, threads=threads)
    return solve_square(param, sigma, degree, b=b, deflate=deflate)


__all__ = [
    "ShiftSearchError",
    "DegenerateParameterError",
    "ContractViolation",
    "Block",
    "PencilSolveReport",
    "TraceBasis",
    "solve_pencil",
    "choose_shift_b",
    "solve_basis",
    "trace_basis",
    "deflated_solve",
    "merge_reports",
    "solve_disk",
    "solve_square",
    "solve_geometry",
]
