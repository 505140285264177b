"""Galerkin realizations of the plate energy and the boundary Gram forms.

Two geometries are supported. On the unit disk every angular mode l is
treated separately with the radial family r^(l+2k) times cos(l theta) or
sin(l theta), written as exact Cartesian polynomials; all integrals are
then exact rational multiples of pi. On the unit square (0, 1)^2 the basis
is the tensor product of shifted Legendre polynomials up to degree p in
each variable, integrated by Gauss-Legendre rules that are exact for the
integrands involved.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from math import ceil, pi

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import linalg

from . import polynomials as P
from .core import Problem, SigmaParameter, SpectralParameter

logger = logging.getLogger(__name__)


class Geometry(str, Enum):
    DISK = "disk"
    SQUARE = "square"


class Constraint(str, Enum):
    TRACE_ZERO = "trace_zero"
    NORMAL_ZERO = "normal_zero"


class CoercivityError(RuntimeError):
    """The stiffness side of a pencil is not positive definite."""

    def __init__(self, message: str, smallest: float):
        super().__init__(f"{message} (smallest eigenvalue of A: {smallest:.6g})")
        self.smallest = smallest


# ---------------------------------------------------------------------------
# bases


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Ordered list of basis functions on one geometry.

    ``primitives`` are the raw functions: exact polynomials for the disk,
    Legendre index pairs (i, j) for the square. ``transform`` (primitive
    coordinates by basis functions) describes the actual basis as linear
    combinations of the primitives; ``None`` means the identity.
    """

    geometry: Geometry
    primitives: tuple
    mode: tuple[int, str] | None = None
    degree: int | None = None
    transform: np.ndarray | None = None
    condition: Constraint | None = None
    orthonormalized: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def size(self) -> int:
        if self.transform is None:
            return len(self.primitives)
        return int(self.transform.shape[1])

    @property
    def K(self) -> int | None:
        if self.geometry is Geometry.DISK:
            return len(self.primitives) - 1
        return None

    @property
    def boundary_measure(self) -> float:
        return 2.0 * pi if self.geometry is Geometry.DISK else 4.0

    def float_transform(self) -> np.ndarray:
        if self.transform is None:
            return np.eye(len(self.primitives))
        return np.asarray(self.transform, dtype=float)

    @property
    def functions(self) -> list:
        """Basis functions as polynomials (disk) or coefficient columns (square)."""
        if self.geometry is Geometry.SQUARE:
            return [self.float_transform()[:, k] for k in range(self.size)]
        if self.transform is None:
            return list(self.primitives)
        out = []
        for k in range(self.size):
            acc: P.Poly = {}
            for i, prim in enumerate(self.primitives):
                c = self.transform[i, k]
                if c != 0:
                    coef = c if isinstance(c, Fraction) else Fraction(float(c))
                    acc = P.add(acc, P.scale(prim, coef))
            out.append(acc)
        return out

    def with_transform(self, T: np.ndarray, **changes) -> "SpectralBasis":
        base = self.transform
        if base is None:
            new = T
        elif base.dtype == object and T.dtype == object:
            new = base.dot(T)
        else:
            new = np.asarray(base, dtype=float) @ np.asarray(T, dtype=float)
        kw = dict(
            geometry=self.geometry,
            primitives=self.primitives,
            mode=self.mode,
            degree=self.degree,
            transform=new,
            condition=self.condition,
            orthonormalized=self.orthonormalized,
        )
        kw.update(changes)
        return SpectralBasis(**kw)

    # evaluation ------------------------------------------------------------
    def values(self, x, y) -> np.ndarray:
        """Basis function values at points, shape (npts, size)."""
        x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
        if self.geometry is Geometry.DISK:
            raw = np.stack([P.evaluate(p, x, y) for p in self.primitives], axis=1)
        else:
            raw = _square_eval(self.degree, self.primitives, x, y, 0, 0)
        return raw @ self.float_transform()

    def gradients(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
        if self.geometry is Geometry.DISK:
            gx = np.stack([P.evaluate(P.dx(p), x, y) for p in self.primitives], axis=1)
            gy = np.stack([P.evaluate(P.dy(p), x, y) for p in self.primitives], axis=1)
        else:
            gx = _square_eval(self.degree, self.primitives, x, y, 1, 0)
            gy = _square_eval(self.degree, self.primitives, x, y, 0, 1)
        T = self.float_transform()
        return gx @ T, gy @ T

    def trace(self, order: int, t) -> np.ndarray:
        """gamma_0 (order 0) or gamma_1 (order 1) of each basis function.

        ``t`` is the angle on the circle, or the perimeter parameter in
        [0, 4) on the square (edges bottom, right, top, left).
        """
        x, y, nx, ny = boundary_points(self.geometry, t)
        if order == 0:
            return self.values(x, y)
        gx, gy = self.gradients(x, y)
        return gx * nx[:, None] + gy * ny[:, None]


def boundary_points(geometry: Geometry, t) -> tuple[np.ndarray, ...]:
    """Boundary coordinates and outward unit normal at parameter values."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if Geometry(geometry) is Geometry.DISK:
        c, s = np.cos(t), np.sin(t)
        return c, s, c, s
    edge = np.clip(np.floor(t).astype(int), 0, 3)
    s = t - edge
    x = np.select([edge == 0, edge == 1, edge == 2], [s, np.ones_like(s), 1 - s], np.zeros_like(s))
    y = np.select([edge == 0, edge == 1, edge == 2], [np.zeros_like(s), s, np.ones_like(s)], 1 - s)
    nx = np.select([edge == 1, edge == 3], [np.ones_like(s), -np.ones_like(s)], np.zeros_like(s))
    ny = np.select([edge == 0, edge == 2], [-np.ones_like(s), np.ones_like(s)], np.zeros_like(s))
    return x, y, nx, ny


def disk_mode_basis(l: int, K: int, parity: str = "c") -> SpectralBasis:
    """Mode-l disk basis {r^(l+2k) H_l : k = 0..K} as Cartesian polynomials."""
    if l < 0 or K < 0:
        raise ValueError("mode and radial order must be non-negative")
    if l == 0 and parity != "c":
        raise ValueError("mode 0 has only the cosine (constant) harmonic")
    if parity not in ("c", "s"):
        raise ValueError("parity must be 'c' or 's'")
    H = P.harmonic(l, parity)
    prims = tuple(P.mul(P.r2_power(k), H) for k in range(K + 1))
    return SpectralBasis(Geometry.DISK, prims, mode=(l, parity))


def disk_modes(l_max: int) -> list[tuple[int, str]]:
    """Angular modes (l, parity) with l <= l_max, cosine before sine."""
    out = [(0, "c")]
    for l in range(1, l_max + 1):
        out += [(l, "c"), (l, "s")]
    return out


def square_basis(degree: int) -> SpectralBasis:
    """Tensor shifted-Legendre basis P_i(2x-1) P_j(2y-1), 0 <= i, j <= degree."""
    if degree < 1:
        raise ValueError("square basis needs degree >= 1")
    prims = tuple((i, j) for i in range(degree + 1) for j in range(degree + 1))
    return SpectralBasis(Geometry.SQUARE, prims, degree=degree)


# ---------------------------------------------------------------------------
# disk: exact integrals per mode


@lru_cache(maxsize=None)
def _disk_exact(l: int, parity: str, K: int) -> dict[str, tuple]:
    """Exact matrices (divided by pi) for the unconstrained mode basis."""
    b = disk_mode_basis(l, K, parity)
    prims = b.primitives
    n = len(prims)
    radial = [P.radial_derivative(p) for p in prims]
    out = {name: [[Fraction(0)] * n for _ in range(n)] for name in ("hess", "lap", "m0", "m1")}
    for i in range(n):
        for j in range(i, n):
            vals = {
                "hess": P.hessian_inner(prims[i], prims[j]),
                "lap": P.laplacian_inner(prims[i], prims[j]),
                "m0": P.circle_integral(P.mul(prims[i], prims[j])),
                "m1": P.circle_integral(P.mul(radial[i], radial[j])),
            }
            for name, v in vals.items():
                out[name][i][j] = v
                out[name][j][i] = v
    return {k: tuple(tuple(r) for r in v) for k, v in out.items()}


def _disk_matrix(basis: SpectralBasis, name: str) -> np.ndarray:
    key = ("disk", name)
    if key in basis._cache:
        return basis._cache[key]
    l, parity = basis.mode
    raw = np.array(_disk_exact(l, parity, basis.K)[name], dtype=object)
    T = basis.transform
    if T is None:
        mat = np.array(raw, dtype=float) * pi
    elif T.dtype == object:
        mat = np.array(T.T.dot(raw).dot(T), dtype=float) * pi
    else:
        Tf = np.asarray(T, float)
        mat = Tf.T @ (np.array(raw, dtype=float) * pi) @ Tf
    mat = 0.5 * (mat + mat.T)
    basis._cache[key] = mat
    return mat


# ---------------------------------------------------------------------------
# square: Gauss-Legendre


def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = npleg.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _leg_table(degree: int, x: np.ndarray, deriv: int) -> np.ndarray:
    """d^deriv/dx^deriv of P_i(2x - 1) for i = 0..degree, shape (degree+1, len(x))."""
    out = np.empty((degree + 1, x.size))
    for i in range(degree + 1):
        c = np.zeros(i + 1)
        c[i] = 1.0
        if deriv:
            c = npleg.legder(c, deriv) * 2.0**deriv
        out[i] = npleg.legval(2.0 * x - 1.0, c)
    return out


def _square_eval(degree, prims, x, y, ox: int, oy: int) -> np.ndarray:
    tx = _leg_table(degree, x, ox)
    ty = _leg_table(degree, y, oy)
    return np.stack([tx[i] * ty[j] for i, j in prims], axis=1)


def _square_order(degree: int) -> int:
    return int(ceil((2 * degree + 1) / 2)) + 1


def _square_raw(degree: int, name: str) -> np.ndarray:
    prims = square_basis(degree).primitives
    n = _square_order(degree)
    g, w = _gauss01(n)
    if name in ("hess", "lap"):
        X, Y = np.meshgrid(g, g, indexing="ij")
        W = np.outer(w, w).ravel()
        x, y = X.ravel(), Y.ravel()
        uxx = _square_eval(degree, prims, x, y, 2, 0)
        uxy = _square_eval(degree, prims, x, y, 1, 1)
        uyy = _square_eval(degree, prims, x, y, 0, 2)
        if name == "hess":
            return uxx.T @ (W[:, None] * uxx) + 2 * uxy.T @ (W[:, None] * uxy) + uyy.T @ (W[:, None] * uyy)
        lap = uxx + uyy
        return lap.T @ (W[:, None] * lap)
    order = 0 if name == "m0" else 1
    basis = square_basis(degree)
    mats = []
    for e in range(4):
        vals = basis.trace(order, e + g)
        mats.append(vals.T @ (w[:, None] * vals))
    return sum(mats)


def _square_matrix(basis: SpectralBasis, name: str) -> np.ndarray:
    key = ("square", name)
    if key in basis._cache:
        return basis._cache[key]
    raw = _square_raw_cached(basis.degree, name)
    T = basis.float_transform()
    mat = T.T @ raw @ T
    mat = 0.5 * (mat + mat.T)
    basis._cache[key] = mat
    return mat


@lru_cache(maxsize=None)
def _square_raw_cached(degree: int, name: str) -> np.ndarray:
    m = _square_raw(degree, name)
    asym = np.abs(m - m.T).max() / max(1.0, np.abs(m).max())
    if asym > 1e-12:
        logger.warning("square %s matrix asymmetry %.2e before symmetrization", name, asym)
    m = 0.5 * (m + m.T)
    m.setflags(write=False)
    return m


def _matrix(basis: SpectralBasis, name: str) -> np.ndarray:
    if basis.geometry is Geometry.DISK:
        return _disk_matrix(basis, name)
    return _square_matrix(basis, name)


def primitive_basis(basis: SpectralBasis) -> SpectralBasis:
    """The unconstrained basis of raw primitives underlying ``basis``."""
    return SpectralBasis(basis.geometry, basis.primitives, mode=basis.mode, degree=basis.degree)


def primitive_key(basis: SpectralBasis):
    """Hashable identity of the primitive family (mode and size, or degree)."""
    if basis.geometry is Geometry.DISK:
        return ("disk", basis.mode, basis.K)
    return ("square", basis.degree)


def primitive_boundary_gram(basis: SpectralBasis, order: int) -> np.ndarray:
    """Boundary Gram matrix of the raw primitives for the given trace order."""
    name = "m0" if order == 0 else "m1"
    if basis.geometry is Geometry.DISK:
        l, parity = basis.mode
        return np.array(_disk_exact(l, parity, basis.K)[name], dtype=float) * pi
    return _square_raw_cached(basis.degree, name)


# ---------------------------------------------------------------------------
# public assembly


def _sigma(sigma: SigmaParameter | float) -> SigmaParameter:
    return sigma if isinstance(sigma, SigmaParameter) else SigmaParameter(float(sigma), 2)


def assemble_Qsigma(basis: SpectralBasis, sigma: SigmaParameter | float) -> np.ndarray:
    """(1 - sigma) int D^2 u : D^2 v + sigma int Lap u Lap v on the basis."""
    s = _sigma(sigma).sigma
    return (1.0 - s) * _matrix(basis, "hess") + s * _matrix(basis, "lap")


def assemble_boundary_mass(basis: SpectralBasis, order: int) -> np.ndarray:
    """Boundary Gram matrix of gamma_0 (order 0) or gamma_1 (order 1)."""
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    return _matrix(basis, "m0" if order == 0 else "m1").copy()


def _exact_nullspace(row: list[int]) -> np.ndarray:
    """Rational basis of {c : row . c = 0} for one integer row."""
    n = len(row)
    nz = [k for k, w in enumerate(row) if w != 0]
    if not nz:
        return np.array([[Fraction(int(i == k)) for k in range(n)] for i in range(n)], dtype=object)
    p = nz[0]
    cols = []
    for k in range(n):
        if k == p:
            continue
        v = [Fraction(0)] * n
        v[k] = Fraction(1)
        v[p] = Fraction(-row[k], row[p])
        cols.append(v)
    if not cols:
        return np.empty((n, 0), dtype=object)
    return np.array(cols, dtype=object).T


def constrain_basis(basis: SpectralBasis, condition: Constraint | str) -> SpectralBasis:
    """Sub-basis with vanishing trace (TraceZero) or normal derivative (NormalZero)."""
    cond = Constraint(condition) if not isinstance(condition, Constraint) else condition
    if basis.transform is not None:
        raise ValueError("constrain an unconstrained primitive basis")
    if basis.geometry is Geometry.DISK:
        l, _ = basis.mode
        # on r = 1, r^(l+2k) H has trace H and normal derivative (l+2k) H
        row = [1] * (basis.K + 1) if cond is Constraint.TRACE_ZERO else [l + 2 * k for k in range(basis.K + 1)]
        T = _exact_nullspace(row)
    else:
        p = basis.degree
        g, _ = _gauss01(p + 1)
        order = 0 if cond is Constraint.TRACE_ZERO else 1
        S = np.vstack([basis.trace(order, e + g) for e in range(4)])
        T = linalg.null_space(S)
    if T.shape[1] == 0:
        logger.info("constrained space is empty for %s", cond.value)
    return basis.with_transform(T, condition=cond)


def orthonormalize(basis: SpectralBasis, sigma: SigmaParameter | float) -> SpectralBasis:
    """Modified Gram-Schmidt of the basis in the Q_sigma + M0 inner product.

    On the disk the Gram matrix is an exact rational multiple of pi, so the
    orthogonalization runs in exact arithmetic and only the normalization
    factors are rounded; this is what keeps large radial orders usable.
    """
    if basis.geometry is Geometry.DISK and (basis.transform is None or basis.transform.dtype == object):
        return _orthonormalize_exact(basis, sigma)
    G = assemble_Qsigma(basis, sigma) + assemble_boundary_mass(basis, 0)
    n = G.shape[0]
    V = np.eye(n)
    for _ in range(2):  # the second pass recovers orthogonality lost to rounding
        for k in range(n):
            for i in range(k):
                V[:, k] -= (V[:, i] @ G @ V[:, k]) * V[:, i]
            nrm2 = V[:, k] @ G @ V[:, k]
            if not nrm2 > 0:
                raise np.linalg.LinAlgError("basis is numerically dependent")
            V[:, k] /= np.sqrt(nrm2)
    return basis.with_transform(V, orthonormalized=True)


def _orthonormalize_exact(basis: SpectralBasis, sigma) -> SpectralBasis:
    s = Fraction(_sigma(sigma).sigma)
    l, parity = basis.mode
    raw = _disk_exact(l, parity, basis.K)
    R = np.array(
        [[(1 - s) * h + s * q + m for h, q, m in zip(hr, qr, mr)]
         for hr, qr, mr in zip(raw["hess"], raw["lap"], raw["m0"])],
        dtype=object,
    )
    T = basis.transform if basis.transform is not None else np.array(
        [[Fraction(int(i == j)) for j in range(len(basis.primitives))] for i in range(len(basis.primitives))],
        dtype=object,
    )
    G = T.T.dot(R).dot(T)
    n = G.shape[0]
    V = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    V = np.array(V, dtype=object)
    for k in range(n):
        for i in range(k):
            num = V[:, i].dot(G).dot(V[:, k])
            den = V[:, i].dot(G).dot(V[:, i])
            V[:, k] = V[:, k] - (num / den) * V[:, i]
    for k in range(n):
        nrm2 = float(V[:, k].dot(G).dot(V[:, k])) * pi
        V[:, k] = V[:, k] * Fraction(1.0 / np.sqrt(nrm2))
    return basis.with_transform(V, orthonormalized=True)


# ---------------------------------------------------------------------------
# pencils


@dataclass(frozen=True, eq=False)
class FormPencil:
    """Symmetric pair (A, Bmass) with A = base + b * Bmass.

    Eigenvalues of the weak problem are recovered from the eigenvalues
    theta of Bmass x = theta A x as 1/theta - b.
    """

    A: np.ndarray
    Bmass: np.ndarray
    basis: SpectralBasis
    b: float
    param: SpectralParameter
    sigma: float
    base: np.ndarray

    @property
    def kind(self) -> Problem:
        return self.param.kind

    @property
    def size(self) -> int:
        return int(self.A.shape[0])


def pencil_parts(
    basis: SpectralBasis, sigma: SigmaParameter | float, param: SpectralParameter
) -> tuple[np.ndarray, np.ndarray, SpectralBasis]:
    """Unshifted stiffness part and boundary Gram for a weak eigenproblem.

    DBS and NBS are posed on the TraceZero and NormalZero sub-bases; an
    unconstrained basis is constrained here.
    """
    kind = param.kind
    if kind is Problem.DBS and basis.condition is not Constraint.TRACE_ZERO:
        basis = constrain_basis(basis, Constraint.TRACE_ZERO)
    if kind is Problem.NBS and basis.condition is not Constraint.NORMAL_ZERO:
        basis = constrain_basis(basis, Constraint.NORMAL_ZERO)
    if basis.geometry is Geometry.DISK and basis.K is not None and basis.K > 8 and not basis.orthonormalized:
        basis = orthonormalize(basis, sigma)
    Q = assemble_Qsigma(basis, sigma)
    M0 = assemble_boundary_mass(basis, 0)
    M1 = assemble_boundary_mass(basis, 1)
    if kind is Problem.BSM:
        return Q - param.value * M0, M1, basis
    if kind is Problem.BSL:
        return Q - param.value * M1, M0, basis
    if kind is Problem.DBS:
        return Q, M1, basis
    return Q, M0, basis


def is_positive_definite(A: np.ndarray) -> bool:
    if A.shape[0] == 0:
        return True
    try:
        L = linalg.cholesky(A, lower=True)
    except linalg.LinAlgError:
        return False
    # guard against factorizations that succeed on numerically singular input
    d = np.diag(L) ** 2
    return bool(d.min() > 1e3 * np.finfo(float).eps * max(d.max(), np.abs(A).max()))


def smallest_eigenvalue(A: np.ndarray) -> float:
    if A.shape[0] == 0:
        return float("inf")
    return float(linalg.eigvalsh(A)[0])


def build_pencil(
    basis: SpectralBasis,
    sigma: SigmaParameter | float,
    param: SpectralParameter,
    b: float = 0.0,
) -> FormPencil:
    """Pencil for BSM, BSL, DBS or NBS with shift b added along Bmass."""
    if b < 0:
        raise ValueError("shift b must be non-negative")
    base, Bmass, basis = pencil_parts(basis, sigma, param)
    A = base + b * Bmass
    A = 0.5 * (A + A.T)
    if not is_positive_definite(A):
        raise CoercivityError(
            f"{param.kind.value} pencil not coercive at parameter {param.value} with b={b}",
            smallest_eigenvalue(A),
        )
    return FormPencil(A, Bmass, basis, float(b), param, float(_sigma(sigma).sigma), base)


__all__ = [
    "Geometry",
    "Constraint",
    "CoercivityError",
    "SpectralBasis",
    "FormPencil",
    "boundary_points",
    "disk_mode_basis",
    "disk_modes",
    "square_basis",
    "assemble_Qsigma",
    "assemble_boundary_mass",
    "constrain_basis",
    "orthonormalize",
    "pencil_parts",
    "build_pencil",
    "primitive_basis",
    "primitive_key",
    "primitive_boundary_gram",
    "is_positive_definite",
    "smallest_eigenvalue",
]
