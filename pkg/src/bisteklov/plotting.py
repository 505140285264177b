"""Figures written to files next to the delimited outputs (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .branches import BranchTable  # noqa: E402
from .weyl import PowerFit, WeylPrediction  # noqa: E402


def _symlog_axis(ax, grid: np.ndarray) -> None:
    if grid.size > 1 and np.abs(grid).max() / max(np.abs(grid).min(), 1e-300) > 1e3:
        ax.set_xscale("symlog", linthresh=max(np.abs(grid).min(), 1e-12))
    if grid.size > 1:
        ax.set_xlim(grid.min(), grid.max())


def plot_branches(table: BranchTable, path: str | Path, view: str = "sorted", max_rows: int = 12) -> Path:
    """Eigenvalue branches against the parameter with limiting values dashed."""
    mat, labels, targets = table.view(view)
    rows = min(max_rows, mat.shape[0])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i in range(rows):
        ax.plot(table.grid, mat[i], lw=1.2, label=str(labels[i]))
        if targets is not None and i < len(targets) and np.isfinite(targets[i]):
            ax.axhline(targets[i], color="0.6", lw=0.6, ls="--")
    for _, p in table.poles:
        ax.axvline(p, color="tab:red", lw=0.6, ls=":")
    _symlog_axis(ax, table.grid)
    sym = "mu" if table.problem.value == "bsm" else "lambda"
    ax.set_xlabel(sym)
    ax.set_ylabel("eigenvalue")
    ax.set_title(f"{table.problem.value} on the {table.geometry} ({view} view, {table.source})")
    if rows <= 12:
        ax.legend(fontsize=7, ncol=2, loc="best")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_weyl(values: np.ndarray, fit: PowerFit, prediction: WeylPrediction, path: str | Path) -> Path:
    """Log-log plot of value_j with the fitted and predicted power laws."""
    v = np.asarray(values, dtype=float)
    j = np.arange(1, v.size + 1, dtype=float)
    keep = v > 0
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(j[keep], v[keep], ".", ms=2, color="0.3", label="eigenvalues")
    lo, hi = fit.window
    jj = np.array([lo, hi], dtype=float)
    ax.loglog(jj, fit.constant * jj**fit.exponent, lw=2, label=f"fit {fit.constant:.4g} j^{fit.exponent:.4g}")
    ax.loglog(j, prediction.constant * j**prediction.exponent, lw=1, ls="--",
              label=f"law {prediction.constant:.4g} j^{prediction.exponent:.4g}")
    ax.set_xlabel("j")
    ax.set_ylabel("value")
    ax.set_title(f"{prediction.problem.value}, N = {prediction.N}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


__all__ = ["plot_branches", "plot_weyl"]
