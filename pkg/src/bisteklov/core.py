"""Shared domain types, trace-space sequence tests and trace-space norms."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a computation is requested with inconsistent inputs."""


class Problem(str, Enum):
    BSM = "bsm"
    BSL = "bsl"
    DBS = "dbs"
    NBS = "nbs"

    @classmethod
    def parse(cls, text: str | "Problem") -> "Problem":
        if isinstance(text, Problem):
            return text
        key = str(text).strip().lower()
        aliases = {"bsm_mu": "bsm", "bsl_lambda": "bsl"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class SigmaParameter:
    """Elastic coefficient sigma together with the space dimension N."""

    sigma: float = 0.0
    N: int = 2

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"dimension N must be an integer >= 2, got {self.N}")
        lower = -1.0 / (self.N - 1)
        if not (lower < self.sigma < 1.0):
            raise ValueError(
                f"sigma={self.sigma} outside the admissible interval ({lower}, 1)"
            )


@dataclass(frozen=True)
class SpectralParameter:
    """Which eigenproblem is solved and the value of the fixed parameter.

    ``value`` is mu for BSM and lambda for BSL; DBS and NBS carry none.
    """

    kind: Problem
    value: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Problem.parse(self.kind))
        if self.kind in (Problem.BSM, Problem.BSL):
            if self.value is None or not math.isfinite(self.value):
                raise ValueError(f"{self.kind.value} requires a finite parameter value")
        elif self.value is not None:
            raise ValueError(f"{self.kind.value} takes no parameter value")

    @classmethod
    def bsm(cls, mu: float) -> "SpectralParameter":
        return cls(Problem.BSM, float(mu))

    @classmethod
    def bsl(cls, lam: float) -> "SpectralParameter":
        return cls(Problem.BSL, float(lam))

    @classmethod
    def dbs(cls) -> "SpectralParameter":
        return cls(Problem.DBS)

    @classmethod
    def nbs(cls) -> "SpectralParameter":
        return cls(Problem.NBS)


def group_multiplicities(values: Sequence[float], rtol: float = 1e-8) -> list[int]:
    """Cluster sorted values that agree within ``rtol`` and return cluster sizes."""
    mult: list[int] = []
    prev = None
    for v in values:
        if prev is not None and abs(v - prev) <= rtol * max(1.0, abs(v), abs(prev)):
            mult[-1] += 1
        else:
            mult.append(1)
        prev = v
    return mult


@dataclass(frozen=True)
class Spectrum:
    """Non-decreasing eigenvalues, repeated by multiplicity.

    Eigenvectors, when present, are stored column-wise in ``eigenvectors``
    and refer to whatever basis produced them.
    """

    kind: Problem
    values: np.ndarray
    multiplicities: tuple[int, ...] = ()
    eigenvectors: np.ndarray | None = None
    j0: int | None = None
    b: float = 0.0
    param: float | None = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "kind", Problem.parse(self.kind))
        if vals.size > 1 and np.any(np.diff(vals) < -1e-12 * max(1.0, np.abs(vals).max())):
            raise ValueError("spectrum values must be non-decreasing")
        if not self.multiplicities:
            object.__setattr__(self, "multiplicities", tuple(group_multiplicities(vals)))
        if sum(self.multiplicities) != vals.size:
            raise ValueError("multiplicities do not add up to the number of values")
        if self.j0 is not None and self.kind is not Problem.BSL:
            raise ValueError("j0 is only defined for BSL spectra")
        if self.b < 0:
            raise ValueError("shift b must be non-negative")

    def __len__(self) -> int:
        return int(self.values.size)

    def multiplicity_column(self) -> list[int]:
        """Multiplicity of the cluster containing each value, one entry per value."""
        col: list[int] = []
        for m in self.multiplicities:
            col.extend([m] * m)
        return col

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "value", "multiplicity"])
        for j, (v, m) in enumerate(zip(self.values, self.multiplicity_column()), start=1):
            w.writerow([j, fmt(v), m])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "problem": self.kind.value,
            "param": self.param,
            "j0": self.j0,
            "b": self.b,
            "count": len(self),
        }


def fmt(x: float) -> str:
    """Format a real with 17 significant digits."""
    return format(float(x), ".17g")


def first_positive_index(values: np.ndarray, atol: float) -> int:
    """1-based index of the first value strictly above ``atol``."""
    idx = np.nonzero(np.asarray(values) > atol)[0]
    if idx.size == 0:
        return int(len(values)) + 1
    return int(idx[0]) + 1


@dataclass(frozen=True)
class CoeffSequence:
    """Finite coefficient sequence s_1, ..., s_n with an optional tail model.

    ``tail_model`` is either ``None`` (the sequence is exactly finite), a
    declared decay exponent p meaning |s_j| ~ C j^(-p) beyond the stored
    entries, or the string ``"fit"`` to estimate p from the last third of the
    entries by least squares in log-log coordinates.
    """

    entries: np.ndarray
    declared_length: int | None = None
    tail_model: float | str | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries, dtype=float).ravel()
        object.__setattr__(self, "entries", arr)
        n = arr.size if self.declared_length is None else self.declared_length
        if n < 0:
            raise ValueError("declared_length must be non-negative")
        if n != arr.size:
            raise ValueError(
                f"declared_length={n} does not match the {arr.size} stored entries"
            )
        object.__setattr__(self, "declared_length", int(n))
        if isinstance(self.tail_model, str) and self.tail_model != "fit":
            raise ValueError(f"unknown tail model {self.tail_model!r}")

    def __len__(self) -> int:
        return int(self.entries.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "s_j"])
        for j, s in enumerate(self.entries, start=1):
            w.writerow([j, fmt(s)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([float(s) for s in self.entries])

    @classmethod
    def from_csv(cls, text: str, tail_model: float | str | None = None) -> "CoeffSequence":
        rows = list(csv.DictReader(io.StringIO(text)))
        rows.sort(key=lambda r: int(r["j"]))
        return cls(np.array([float(r["s_j"]) for r in rows]), tail_model=tail_model)


@dataclass(frozen=True)
class MembershipVerdict:
    """Outcome of a weighted square-summability test."""

    member: bool
    partial_sum: float
    tail_exponent: float | None
    critical_exponent: float

    def __bool__(self) -> bool:
        return self.member


def fit_tail_exponent(entries: np.ndarray) -> float | None:
    """Decay exponent p of |s_j| ~ C j^(-p) over the last third of the entries.

    Returns ``None`` when the tail has fewer than two nonzero entries, which
    is treated as finite support.
    """
    n = entries.size
    start = (2 * n) // 3
    j = np.arange(start + 1, n + 1, dtype=float)
    tail = np.abs(entries[start:])
    keep = tail > 0
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(j[keep]), np.log(tail[keep]), 1)
    return float(-slope)


def seq_membership(s: CoeffSequence, exponent: float) -> MembershipVerdict:
    """Test whether (j^exponent s_j) is square-summable.

    Under a power tail |s_j| ~ C j^(-p) the weighted squares behave like
    j^(2 exponent - 2p), summable exactly when p > exponent + 1/2.
    """
    if exponent < 0:
        raise ValueError("weight exponent must be non-negative")
    j = np.arange(1, len(s) + 1, dtype=float)
    partial = float(np.sum(j ** (2.0 * exponent) * s.entries**2))
    critical = exponent + 0.5
    model = s.tail_model
    if model is None:
        return MembershipVerdict(True, partial, None, critical)
    p = fit_tail_exponent(s.entries) if model == "fit" else float(model)
    if p is None:
        return MembershipVerdict(True, partial, None, critical)
    return MembershipVerdict(bool(p > critical), partial, p, critical)


def weyl_weight_exponent(space: str, N: int) -> float:
    """Sequence weight exponent characterizing S^{3/2} or S^{1/2}."""
    if space.upper() == "S32":
        return 3.0 / (2.0 * (N - 1))
    if space.upper() == "S12":
        return 1.0 / (2.0 * (N - 1))
    raise ValueError(f"unknown trace space {space!r}")


def s_norm(coeffs: CoeffSequence | Sequence[float], spectrum: Spectrum, space: str) -> float:
    """Squared trace-space norm of a coefficient sequence.

    S32 uses a BSL spectrum: low modes j < j0 enter unweighted, the rest are
    weighted by mu_j. S12 uses a BSM spectrum with weights lambda_j.
    """
    a = coeffs.entries if isinstance(coeffs, CoeffSequence) else np.asarray(coeffs, float)
    if a.size > len(spectrum):
        raise ConfigurationError("more coefficients than spectrum entries")
    vals = spectrum.values[: a.size]
    key = space.upper()
    if key == "S32":
        if spectrum.kind is not Problem.BSL or spectrum.j0 is None:
            raise ConfigurationError("S32 norm needs a BSL spectrum with known j0")
        k = min(spectrum.j0 - 1, a.size)
        return float(np.sum(a[:k] ** 2) + np.sum(vals[k:] * a[k:] ** 2))
    if key == "S12":
        if spectrum.kind is not Problem.BSM:
            raise ConfigurationError("S12 norm needs a BSM spectrum")
        return float(np.sum(vals * a**2))
    raise ValueError(f"unknown trace space {space!r}")


def spectrum_from_csv(text: str, kind: Problem | str, sidecar: dict | None = None) -> Spectrum:
    rows = list(csv.DictReader(io.StringIO(text)))
    rows.sort(key=lambda r: int(r["j"]))
    values = np.array([float(r["value"]) for r in rows])
    side = sidecar or {}
    mult = _cluster_sizes([int(r["multiplicity"]) for r in rows])
    return Spectrum(
        kind=Problem.parse(kind),
        values=values,
        multiplicities=tuple(mult),
        j0=side.get("j0"),
        b=float(side.get("b", 0.0)),
        param=side.get("param"),
    )


def _cluster_sizes(column: Iterable[int]) -> list[int]:
    out: list[int] = []
    col = list(column)
    i = 0
    while i < len(col):
        out.append(col[i])
        i += max(col[i], 1)
    return out


__all__ = [
    "ConfigurationError",
    "Problem",
    "SigmaParameter",
    "SpectralParameter",
    "Spectrum",
    "CoeffSequence",
    "MembershipVerdict",
    "seq_membership",
    "s_norm",
    "fit_tail_exponent",
    "weyl_weight_exponent",
    "group_multiplicities",
    "first_positive_index",
    "spectrum_from_csv",
    "fmt",
]
