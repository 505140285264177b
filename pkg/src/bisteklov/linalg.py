"""Dense symmetric eigensolvers used by the pencil reduction."""

from __future__ import annotations

import numpy as np

JACOBI_MAX_N = 64


def jacobi_eigh(S: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors (columns).
    Rotations follow the stable formulation of Rutishauser; sweeps stop
    when the off-diagonal Frobenius mass is below ``tol`` times the norm.
    """
    A = np.array(S, dtype=float, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    if n <= 1:
        return np.diag(A).copy(), V
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        # summing the off-diagonal entries directly; subtracting the diagonal
        # mass from the total cancels below sqrt(eps) and stops too early
        off = np.linalg.norm(A[mask])
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Rp = A[p, :].copy()
                Rq = A[q, :].copy()
                A[p, :] = c * Rp - s * Rq
                A[q, :] = s * Rp + c * Rq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def symmetric_eigh(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi for small matrices, LAPACK's tridiagonal solver beyond that."""
    S = 0.5 * (S + S.T)
    if S.shape[0] <= JACOBI_MAX_N:
        return jacobi_eigh(S)
    return np.linalg.eigh(S)


def fix_signs(X: np.ndarray) -> np.ndarray:
    """Flip columns so that the entry of largest magnitude is positive."""
    X = np.array(X, dtype=float, copy=True)
    if X.size == 0:
        return X
    idx = np.argmax(np.abs(X), axis=0)
    signs = np.sign(X[idx, np.arange(X.shape[1])])
    signs[signs == 0] = 1.0
    return X * signs
