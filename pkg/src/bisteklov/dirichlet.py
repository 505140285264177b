"""Biharmonic Dirichlet problem through Steklov eigenfunction expansions.

The solution of Delta^2 u = 0 with u = f and d_nu u = g on the boundary is
assembled from two series. In the first form f is expanded in the trace
basis of a BSL problem (interior lift u_lambda) and the remaining normal
derivative g - d_nu u_lambda in the DBS trace basis. In the second form g is
expanded in a BSM trace basis and the remaining trace in the NBS basis.

All interior functions are stored in primitive coordinates, one coefficient
vector per primitive family (a disk angular mode, or the square's Legendre
tensor basis), so fields from different bases can be added and paired.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import pi
from typing import Callable

import numpy as np

from .assembly import (
    Geometry,
    SpectralBasis,
    boundary_points,
    disk_mode_basis,
    primitive_basis,
    primitive_boundary_gram,
    primitive_key,
)
from .core import CoeffSequence, MembershipVerdict, Problem, SpectralParameter, seq_membership, weyl_weight_exponent
from .eigensolver import TraceBasis, solve_geometry, trace_basis

logger = logging.getLogger(__name__)

PARSEVAL_FLAG = 0.01


class TraceSpaceError(ValueError):
    """Coefficients do not define an element of the required trace space."""


class IncompatibleDataError(ValueError):
    """The pair (f, g) fails the compatibility test and has no H^2 solution."""


# ---------------------------------------------------------------------------
# boundary data


class BoundaryFunction:
    """A scalar function on the boundary of the disk or the square."""

    geometry: Geometry
    tail_model: float | str | None = None

    def evaluate(self, t) -> np.ndarray:
        raise NotImplementedError

    def inner(self, basis: SpectralBasis, order: int) -> np.ndarray:
        """L^2(boundary) products with gamma_order of each primitive of ``basis``."""
        raise NotImplementedError

    def norm2(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class HarmonicModes(BoundaryFunction):
    """Finite sum of c * cos(l t) or c * sin(l t) on the unit circle.

    ``coeffs`` maps (l, parity) with parity 'c' or 's' to the amplitude.
    """

    coeffs: dict
    tail_model: float | str | None = None
    geometry: Geometry = Geometry.DISK

    def __post_init__(self) -> None:
        clean = {}
        for (l, par), c in self.coeffs.items():
            l = int(l)
            if l < 0 or par not in ("c", "s") or (l == 0 and par == "s"):
                raise ValueError(f"invalid harmonic ({l}, {par!r})")
            clean[(l, par)] = clean.get((l, par), 0.0) + float(c)
        object.__setattr__(self, "coeffs", clean)

    @property
    def l_max(self) -> int:
        return max((l for l, _ in self.coeffs), default=0)

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        for (l, par), c in self.coeffs.items():
            out += c * (np.cos(l * t) if par == "c" else np.sin(l * t))
        return out

    def inner(self, basis: SpectralBasis, order: int) -> np.ndarray:
        # primitives r^(l+2k) H_l restrict to H_l with radial derivative (l+2k) H_l
        l, par = basis.mode
        c = self.coeffs.get((l, par), 0.0)
        ks = np.arange(len(basis.primitives))
        scale = (l + 2.0 * ks) if order == 1 else np.ones(ks.size)
        return c * pi * (2.0 if l == 0 else 1.0) * scale

    def norm2(self) -> float:
        return float(sum(c * c * pi * (2.0 if l == 0 else 1.0) for (l, _), c in self.coeffs.items()))


@dataclass(frozen=True, eq=False)
class SampledCircle(BoundaryFunction):
    """Values at equispaced angles 2 pi k / n, integrated by the trapezoid rule."""

    values: np.ndarray
    tail_model: float | str | None = None
    geometry: Geometry = Geometry.DISK

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 4:
            raise ValueError("need at least four samples")
        object.__setattr__(self, "values", v)

    @property
    def angles(self) -> np.ndarray:
        return 2 * pi * np.arange(self.values.size) / self.values.size

    def evaluate(self, t) -> np.ndarray:
        # trigonometric interpolation through the samples
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n = self.values.size
        c = np.fft.rfft(self.values) / n
        out = np.full(t.shape, c[0].real)
        for k in range(1, c.size):
            w = 1.0 if (n % 2 == 0 and k == n // 2) else 2.0
            out += w * (c[k].real * np.cos(k * t) - c[k].imag * np.sin(k * t))
        return out

    def inner(self, basis: SpectralBasis, order: int) -> np.ndarray:
        tr = primitive_basis(basis).trace(order, self.angles)
        return (2 * pi / self.values.size) * (self.values @ tr)

    def norm2(self) -> float:
        return float(2 * pi / self.values.size * np.sum(self.values**2))

    @classmethod
    def from_callable(cls, func: Callable, n: int = 256, tail_model=None) -> "SampledCircle":
        t = 2 * pi * np.arange(n) / n
        x, y, nx, ny = boundary_points(Geometry.DISK, t)
        return cls(np.asarray(func(x, y, nx, ny), dtype=float) * np.ones(n), tail_model)


# edge k of the square: start point, unit tangent, outward normal
SQUARE_EDGES = (
    ((0.0, 0.0), (1.0, 0.0), (0.0, -1.0)),
    ((1.0, 0.0), (0.0, 1.0), (1.0, 0.0)),
    ((1.0, 1.0), (-1.0, 0.0), (0.0, 1.0)),
    ((0.0, 1.0), (0.0, -1.0), (-1.0, 0.0)),
)


@dataclass(frozen=True, eq=False)
class EdgeFunction(BoundaryFunction):
    """Function on the square boundary given by ``func(x, y, nx, ny)``.

    The normal is passed so that data such as nu_1 may differ on the two
    edges meeting at a corner. ``quad`` Gauss points are used per edge.
    """

    func: Callable
    quad: int = 32
    tail_model: float | str | None = None
    name: str = ""
    geometry: Geometry = Geometry.SQUARE

    def on_edge(self, edge: int, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        (px, py), (tx, ty), (nx, ny) = SQUARE_EDGES[edge]
        x, y = px + s * tx, py + s * ty
        return np.asarray(self.func(x, y, np.full_like(s, nx), np.full_like(s, ny)), dtype=float) * np.ones_like(s)

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        edge = np.clip(np.floor(t).astype(int), 0, 3)
        out = np.empty_like(t)
        for e in range(4):
            m = edge == e
            if m.any():
                out[m] = self.on_edge(e, t[m] - e)
        return out

    def _rule(self):
        x, w = np.polynomial.legendre.leggauss(self.quad)
        return 0.5 * (x + 1), 0.5 * w

    def inner(self, basis: SpectralBasis, order: int) -> np.ndarray:
        s, w = self._rule()
        pb = primitive_basis(basis)
        acc = np.zeros(len(pb.primitives))
        for e in range(4):
            acc += (w * self.on_edge(e, s)) @ pb.trace(order, e + s)
        return acc

    def norm2(self) -> float:
        s, w = self._rule()
        return float(sum(np.sum(w * self.on_edge(e, s) ** 2) for e in range(4)))


# ---------------------------------------------------------------------------
# interior fields in primitive coordinates


@dataclass(eq=False)
class Field:
    """Interior polynomial stored as primitive coefficients per family."""

    parts: dict = field(default_factory=dict)  # key -> (primitive basis, coefficients)

    def add(self, basis: SpectralBasis, coeffs: np.ndarray) -> None:
        key = primitive_key(basis)
        coeffs = np.asarray(coeffs, dtype=float)
        if key in self.parts:
            pb, c = self.parts[key]
            self.parts[key] = (pb, c + coeffs)
        else:
            self.parts[key] = (primitive_basis(basis), coeffs.copy())

    def __add__(self, other: "Field") -> "Field":
        out = Field(dict(self.parts))
        for pb, c in other.parts.values():
            out.add(pb, c)
        return out

    def evaluate(self, x, y) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(np.broadcast(x, np.asarray(y, dtype=float)).shape)
        for pb, c in self.parts.values():
            out = out + pb.values(x, y) @ c
        return out

    def trace(self, order: int, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape)
        for pb, c in self.parts.values():
            out = out + pb.trace(order, t) @ c
        return out

    def pair(self, data: BoundaryFunction, order: int) -> float:
        """<data, gamma_order(self)> on the boundary."""
        return float(sum(data.inner(pb, order) @ c for pb, c in self.parts.values()))

    def boundary_norm2(self, order: int) -> float:
        return float(sum(c @ primitive_boundary_gram(pb, order) @ c for pb, c in self.parts.values()))

    def coefficients(self, key) -> np.ndarray | None:
        hit = self.parts.get(key)
        return None if hit is None else hit[1]


@dataclass(eq=False)
class TraceFields:
    """Trace basis columns as primitive-coordinate matrices per family."""

    basis: TraceBasis
    mats: dict  # key -> (primitive basis, matrix n_prim x n_trace)

    def __len__(self) -> int:
        return len(self.basis)

    def project(self, data: BoundaryFunction) -> np.ndarray:
        out = np.zeros(len(self))
        for pb, M in self.mats.values():
            out += data.inner(pb, self.basis.order) @ M
        return out

    def project_field(self, u: Field, order: int | None = None) -> np.ndarray:
        """<gamma(u), basis_j> for an interior field u (same trace order)."""
        order = self.basis.order if order is None else order
        out = np.zeros(len(self))
        for key, (pb, M) in self.mats.items():
            c = u.coefficients(key)
            if c is not None:
                out += c @ primitive_boundary_gram(pb, order) @ M
        return out

    def combine(self, coeffs: np.ndarray) -> Field:
        f = Field()
        for pb, M in self.mats.values():
            f.add(pb, M @ coeffs)
        return f


def trace_fields(tb: TraceBasis) -> TraceFields:
    mats: dict = {}
    for blk in tb.report.blocks:
        n = blk.pencil.size
        sub = tb.lifts[blk.offset: blk.offset + n, :]
        prim = blk.basis.float_transform() @ sub
        key = primitive_key(blk.basis)
        if key in mats:
            pb, M = mats[key]
            mats[key] = (pb, M + prim)
        else:
            mats[key] = (primitive_basis(blk.basis), prim)
    return TraceFields(tb, mats)


# ---------------------------------------------------------------------------
# projections and lifts


@dataclass(frozen=True)
class Projection:
    """Coefficients of boundary data in an orthonormal trace basis."""

    coeffs: CoeffSequence
    data_norm2: float
    captured_norm2: float

    @property
    def parseval_defect(self) -> float:
        if self.data_norm2 <= 0:
            return 0.0
        return max(0.0, self.data_norm2 - self.captured_norm2) / self.data_norm2

    @property
    def under_resolved(self) -> bool:
        return self.parseval_defect > PARSEVAL_FLAG


def project_to_steklov(data: BoundaryFunction, tb: TraceBasis | TraceFields) -> Projection:
    """Coefficients <data, v_j> in the trace basis, with a Parseval check."""
    tf = tb if isinstance(tb, TraceFields) else trace_fields(tb)
    c = tf.project(data)
    proj = Projection(CoeffSequence(c, tail_model=data.tail_model), data.norm2(), float(c @ c))
    if proj.under_resolved:
        logger.warning("trace basis captures only %.1f%% of the data norm", 100 * (1 - proj.parseval_defect))
    return proj


_SPACE = {Problem.BSL: "S32", Problem.NBS: "S32", Problem.BSM: "S12", Problem.DBS: "S12"}


@dataclass(eq=False)
class SeriesPart:
    """One eigenfunction series: hat coefficients, weighted ones and the sum."""

    family: Problem
    hat: CoeffSequence
    weighted: np.ndarray
    values: np.ndarray
    field: Field
    verdict: MembershipVerdict


def weighted_coefficients(hat: np.ndarray, values: np.ndarray, b: float) -> np.ndarray:
    """sqrt(value_j) * hat_j for positive values; the low block stays unweighted."""
    tol = 1e-9 * max(1.0, b)
    w = np.where(values > tol, np.sqrt(np.maximum(values, 0.0)), 1.0)
    return w * hat


def lift_interior(coeffs: CoeffSequence, tb: TraceBasis | TraceFields, N: int = 2) -> SeriesPart:
    """Interior function sum_j c_j * lift_j after a trace-space membership test."""
    tf = tb if isinstance(tb, TraceFields) else trace_fields(tb)
    family = tf.basis.report.spectrum.kind
    if len(coeffs) > len(tf):
        raise ValueError(f"{len(coeffs)} coefficients for a trace basis of size {len(tf)}")
    verdict = seq_membership(coeffs, weyl_weight_exponent(_SPACE[family], N))
    if not verdict.member:
        raise TraceSpaceError(
            f"coefficients decay like j^-{verdict.tail_exponent:.3g}, need faster than j^-{verdict.critical_exponent:.3g}"
        )
    c = np.zeros(len(tf))
    c[: len(coeffs)] = coeffs.entries
    vals = tf.basis.values
    return SeriesPart(family, coeffs, weighted_coefficients(c, vals, tf.basis.report.b_used), vals,
                      tf.combine(c), verdict)


# ---------------------------------------------------------------------------
# compatibility


@dataclass(frozen=True)
class CornerJump:
    corner: tuple[float, float]
    jump: float


@dataclass(frozen=True)
class CornerReport:
    """Jumps of (d_tau f) tau + g nu across the four corners of the square."""

    jumps: tuple[CornerJump, ...]
    tol: float

    @property
    def failing(self) -> tuple[tuple[float, float], ...]:
        return tuple(j.corner for j in self.jumps if j.jump > self.tol)

    @property
    def ok(self) -> bool:
        return not self.failing


def _edge_derivative(func: EdgeFunction, edge: int, s: float, h: float = 1e-3) -> float:
    """Fourth-order one-sided difference of f along the edge, pointing inward."""
    sign = 1.0 if s < 0.5 else -1.0
    pts = s + sign * h * np.arange(5)
    f = func.on_edge(edge, pts)
    d = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    return float(sign * d)


def corner_compat_check(f: EdgeFunction, g: EdgeFunction, tol: float = 1e-6) -> CornerReport:
    """Continuity of F = (df/dtau) tau + g nu at each corner of the square.

    For an H^2 function F equals its gradient on the boundary, so a jump of
    F at a corner rules out every H^2 extension of (f, g).
    """
    jumps = []
    for e in range(4):
        nxt = (e + 1) % 4
        _, tau_a, nu_a = SQUARE_EDGES[e]
        _, tau_b, nu_b = SQUARE_EDGES[nxt]
        Fa = _edge_derivative(f, e, 1.0) * np.array(tau_a) + g.on_edge(e, 1.0)[0] * np.array(nu_a)
        Fb = _edge_derivative(f, nxt, 0.0) * np.array(tau_b) + g.on_edge(nxt, 0.0)[0] * np.array(nu_b)
        corner = SQUARE_EDGES[nxt][0]
        jumps.append(CornerJump(corner, float(np.linalg.norm(Fa - Fb))))
    scale = max(1.0, max(np.abs(f.on_edge(e, np.linspace(0, 1, 9))).max() for e in range(4)))
    return CornerReport(tuple(jumps), tol * scale)


@dataclass(frozen=True)
class CompatReport:
    """Outcome of the compatibility test for a Dirichlet pair (f, g).

    ``verdict`` is 'compatible', 'incompatible' or 'inconclusive'. The
    residual g - d_nu u_lambda is expanded in the DBS trace basis; its
    coefficients must define an element of the S^{1/2}-type trace space.
    """

    verdict: str
    residual: Projection
    membership: MembershipVerdict
    corners: CornerReport | None = None

    @property
    def compatible(self) -> bool:
        return self.verdict == "compatible"

    def as_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "parseval_defect": self.residual.parseval_defect,
            "residual_norm2": self.residual.data_norm2,
            "member": self.membership.member,
            "weighted_partial_sum": self.membership.partial_sum,
            "tail_exponent": self.membership.tail_exponent,
            "critical_exponent": self.membership.critical_exponent,
        }
        if self.corners is not None:
            out["corner_jumps"] = [{"corner": list(j.corner), "jump": j.jump} for j in self.corners.jumps]
            out["failing_corners"] = [list(c) for c in self.corners.failing]
        return out


def _residual_projection(g: BoundaryFunction, u: Field, tf: TraceFields) -> Projection:
    """Coefficients of r = g - d_nu u in the order-1 trace basis ``tf``."""
    c = tf.project(g) - tf.project_field(u, 1)
    norm2 = g.norm2() - 2 * u.pair(g, 1) + u.boundary_norm2(1)
    tail = g.tail_model
    return Projection(CoeffSequence(c, tail_model=tail), max(norm2, 0.0), float(c @ c))


def _assess(residual: Projection, N: int, corners: CornerReport | None) -> CompatReport:
    member = seq_membership(residual.coeffs, weyl_weight_exponent("S12", N))
    if corners is not None and not corners.ok:
        verdict = "incompatible"
    elif not member.member:
        verdict = "incompatible"
    elif residual.under_resolved:
        verdict = "inconclusive"
    else:
        verdict = "compatible"
    return CompatReport(verdict, residual, member, corners)


# ---------------------------------------------------------------------------
# the solver


@dataclass(eq=False)
class SeriesSolution:
    """u as a sum of series parts (u_lambda + v_D, or v_mu + u_N)."""

    form: str
    geometry: Geometry
    parts: tuple[SeriesPart, ...]

    @property
    def field(self) -> Field:
        out = Field()
        for p in self.parts:
            out = out + p.field
        return out

    def evaluate(self, x, y) -> np.ndarray:
        return self.field.evaluate(x, y)

    def boundary(self, order: int, t) -> np.ndarray:
        return self.field.trace(order, t)

    def radial_coefficients(self, l: int, parity: str = "c", K: int = 1) -> np.ndarray:
        """Coefficients of r^(l+2k) H_l in the mode (l, parity) of a disk solution."""
        c = self.field.coefficients(primitive_key(disk_mode_basis(l, K, parity)))
        return np.zeros(K + 1) if c is None else c


@dataclass(eq=False)
class DirichletResult:
    form_i: SeriesSolution | None
    form_ii: SeriesSolution | None
    compat: CompatReport
    lam: float
    mu: float

    @property
    def solution(self) -> SeriesSolution:
        return self.form_i if self.form_i is not None else self.form_ii


def _data_l_max(*funcs: BoundaryFunction) -> int:
    best = 0
    for fn in funcs:
        if isinstance(fn, HarmonicModes):
            best = max(best, fn.l_max)
        else:
            best = max(best, 16)
    return best


def _solve_trace(geometry, kind_param, sigma, l_max, K, degree, threads) -> TraceFields:
    rep = solve_geometry(geometry, kind_param, sigma, l_max, K, degree, threads=threads)
    return trace_fields(trace_basis(rep))


def compat_residual(
    f: BoundaryFunction,
    g: BoundaryFunction,
    lam: float = -1.0,
    sigma: float = 0.0,
    l_max: int | None = None,
    K: int = 1,
    degree: int = 6,
    threads: int = 1,
) -> CompatReport:
    """Expand g - d_nu u_lambda in the DBS trace basis and classify the pair."""
    geometry = Geometry(f.geometry)
    l_max = _data_l_max(f, g) if l_max is None else l_max
    tf_l = _solve_trace(geometry, SpectralParameter.bsl(lam), sigma, l_max, K, degree, threads)
    tf_d = _solve_trace(geometry, SpectralParameter.dbs(), sigma, l_max, K, degree, threads)
    u_l = lift_interior(project_to_steklov(f, tf_l).coeffs, tf_l).field
    corners = None
    if geometry is Geometry.SQUARE:
        if not (isinstance(f, EdgeFunction) and isinstance(g, EdgeFunction)):
            raise TypeError("square data must be EdgeFunction instances")
        corners = corner_compat_check(f, g)
    return _assess(_residual_projection(g, u_l, tf_d), 2, corners)


def ball_mode_oracle(l: int, f_l: float, g_l: float, N: int = 2) -> tuple[float, float]:
    """(A, B) with u = (A r^l + B r^(l+2)) H_l, A + B = f_l and l A + (l+2) B = g_l."""
    B = (g_l - l * f_l) / 2.0
    return f_l - B, B


def solve_dirichlet(
    f: BoundaryFunction,
    g: BoundaryFunction,
    lam: float = -1.0,
    mu: float = -1.0,
    sigma: float = 0.0,
    l_max: int | None = None,
    K: int = 1,
    degree: int = 6,
    forms: str = "both",
    threads: int = 1,
    allow_inconclusive: bool = True,
) -> DirichletResult:
    """Series solution of the biharmonic Dirichlet problem on the disk or square.

    ``forms`` is 'i', 'ii' or 'both'. Incompatible data raise
    IncompatibleDataError; inconclusive data are solved (with a warning)
    unless ``allow_inconclusive`` is False.
    """
    if f.geometry != g.geometry:
        raise ValueError("f and g must live on the same boundary")
    if forms not in ("i", "ii", "both"):
        raise ValueError("forms must be 'i', 'ii' or 'both'")
    geometry = Geometry(f.geometry)
    l_max = _data_l_max(f, g) if l_max is None else l_max
    solve = lambda p: _solve_trace(geometry, p, sigma, l_max, K, degree, threads)  # noqa: E731

    tf_l = solve(SpectralParameter.bsl(lam))
    tf_d = solve(SpectralParameter.dbs())
    u_lam = lift_interior(project_to_steklov(f, tf_l).coeffs, tf_l)
    residual = _residual_projection(g, u_lam.field, tf_d)
    corners = None
    if geometry is Geometry.SQUARE:
        corners = corner_compat_check(f, g)
    compat = _assess(residual, 2, corners)
    if compat.verdict == "incompatible":
        failing = corners.failing if corners is not None else ()
        raise IncompatibleDataError(f"(f, g) admits no H^2 solution; failing corners: {list(failing)}")
    if compat.verdict == "inconclusive":
        if not allow_inconclusive:
            raise IncompatibleDataError("compatibility inconclusive at this resolution")
        logger.warning("compatibility inconclusive (Parseval defect %.3g)", residual.parseval_defect)

    form_i = form_ii = None
    if forms in ("i", "both"):
        v_d = lift_interior(residual.coeffs, tf_d)
        form_i = SeriesSolution("i", geometry, (u_lam, v_d))
    if forms in ("ii", "both"):
        tf_m = solve(SpectralParameter.bsm(mu))
        tf_n = solve(SpectralParameter.nbs())
        v_mu = lift_interior(project_to_steklov(g, tf_m).coeffs, tf_m)
        c = tf_n.project(f) - tf_n.project_field(v_mu.field, 0)
        u_n = lift_interior(CoeffSequence(c, tail_model=f.tail_model), tf_n)
        form_ii = SeriesSolution("ii", geometry, (v_mu, u_n))
    return DirichletResult(form_i, form_ii, compat, lam, mu)


__all__ = [
    "BoundaryFunction",
    "HarmonicModes",
    "SampledCircle",
    "EdgeFunction",
    "SQUARE_EDGES",
    "Field",
    "TraceFields",
    "trace_fields",
    "Projection",
    "project_to_steklov",
    "SeriesPart",
    "weighted_coefficients",
    "lift_interior",
    "CornerJump",
    "CornerReport",
    "corner_compat_check",
    "CompatReport",
    "compat_residual",
    "ball_mode_oracle",
    "SeriesSolution",
    "DirichletResult",
    "solve_dirichlet",
    "TraceSpaceError",
    "IncompatibleDataError",
    "PARSEVAL_FLAG",
]
