"""Hermitian linear-algebra helpers shared by the model and the solvers."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


def herm(X: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.swapaxes(X, -1, -2))


def hermitize(X: np.ndarray) -> np.ndarray:
    """Symmetric part (X + X^H)/2, removing round-off skew."""
    return 0.5 * (X + herm(X))


def regularize(R: np.ndarray, label: str = "matrix") -> np.ndarray:
    """Return ``R`` or, when its condition number exceeds 1e12, ``R + eps I``.

    ``eps = 1e-12 * trace(R) / dim``; a warning with the condition number is logged.
    """
    R = hermitize(np.asarray(R, dtype=complex))
    w = np.linalg.eigvalsh(R)
    top = max(abs(w[-1]), abs(w[0]))
    if top == 0.0:
        return R
    cond = top / w[0] if w[0] > 0 else np.inf
    if cond > COND_LIMIT:
        eps = 1e-12 * max(np.trace(R).real, top) / R.shape[0]
        log.warning("%s is ill-conditioned (cond=%.3e); adding %.3e*I", label, cond, eps)
        R = R + eps * np.eye(R.shape[0])
    return R


def inv_herm(R: np.ndarray, label: str = "matrix") -> np.ndarray:
    """Inverse of a Hermitian positive-definite matrix via Cholesky.

    The squared ratio of the Cholesky diagonal bounds the condition number
    from below; when it exceeds the limit (or the factorization fails) the
    matrix goes through :func:`regularize` first.
    """
    R = hermitize(np.asarray(R, dtype=complex))
    try:
        L = np.linalg.cholesky(R)
        d = np.abs(np.diag(L))
        if d.min() == 0.0 or (d.max() / d.min()) ** 2 > COND_LIMIT:
            raise np.linalg.LinAlgError(label)
    except np.linalg.LinAlgError:
        R = regularize(R, label)
        L = np.linalg.cholesky(R)
    Linv = np.linalg.solve(L, np.eye(R.shape[0]))
    return herm(Linv) @ Linv


def solve_herm(R: np.ndarray, B: np.ndarray, label: str = "matrix") -> np.ndarray:
    """Solve ``R X = B`` for Hermitian positive-definite ``R``."""
    return inv_herm(R, label) @ B


def logdet_herm(R: np.ndarray) -> float:
    """log2 det of a Hermitian positive-definite matrix (sum of log-eigenvalues)."""
    w = np.linalg.eigvalsh(hermitize(np.asarray(R, dtype=complex)))
    if w[0] <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return float(np.sum(np.log2(w)))


def logdet2(R: np.ndarray) -> float:
    """log2 |det R| for a general square matrix."""
    sign, ld = np.linalg.slogdet(R)
    if sign == 0:
        raise np.linalg.LinAlgError("singular matrix")
    return float(ld / np.log(2.0))


def range_basis(U: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column space of ``U``."""
    Q, s, _ = np.linalg.svd(U, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return Q[:, :0]
    return Q[:, s > rtol * s[0]]


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian draws (unit variance)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def orthonormal_columns(X: np.ndarray, ncols: int) -> np.ndarray:
    """First ``ncols`` columns of the Q factor of ``X`` (phase-normalized)."""
    Q, Rr = np.linalg.qr(X)
    d = np.diag(Rr)[:ncols]
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return Q[:, :ncols] * phase
