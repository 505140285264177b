"""Spectra of multi-parameter biharmonic Steklov problems.

The package computes eigenvalues of the biharmonic Steklov problems with a
mass-type parameter (BSM, eigenvalue lambda at fixed mu) or a
stiffness-type parameter (BSL, eigenvalue mu at fixed lambda) and of their
limiting problems DBS and NBS, on the unit ball in closed form and on the
disk or square by a Galerkin method. It also solves the biharmonic
Dirichlet problem by Steklov eigenfunction series.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .core import (  # noqa: E402
    CoeffSequence,
    ConfigurationError,
    MembershipVerdict,
    Problem,
    SigmaParameter,
    SpectralParameter,
    Spectrum,
    seq_membership,
)

__all__ = [
    "__version__",
    "CoeffSequence",
    "ConfigurationError",
    "MembershipVerdict",
    "Problem",
    "SigmaParameter",
    "SpectralParameter",
    "Spectrum",
    "seq_membership",
]
