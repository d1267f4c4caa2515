"""Generalized Sylvester equations ``A X + sum_t F_t X B_t = C`` via Kronecker vectorization."""

from __future__ import annotations

import numpy as np

from .gradients import SylvesterSystem


class SylvesterError(np.linalg.LinAlgError):
    """Raised when the vectorized Sylvester system is numerically singular."""


def vec(X: np.ndarray) -> np.ndarray:
    return X.reshape(-1, order="F")


def unvec(x: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    return x.reshape(shape, order="F")


def solve_sylvester(A: np.ndarray, Fs, Bs, C: np.ndarray, cond_limit: float = 1e14) -> np.ndarray:
    """Dense solve of ``A X + sum_t F_t X B_t = C``.

    ``Fs`` and ``Bs`` are equal-length sequences; ``C`` fixes the shape of ``X``.
    """
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    if C.shape[0] != A.shape[0]:
        raise ValueError("A and C row counts differ")
    n, q = C.shape
    op = np.kron(np.eye(q), A).astype(complex)
    for F, B in zip(Fs, Bs):
        if B.shape != (q, q) or F.shape != (n, n):
            raise ValueError("inconsistent Sylvester coefficient shapes")
        op = op + np.kron(B.T, F)
    cond = np.linalg.cond(op)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SylvesterError(f"Kronecker system is singular (cond={cond:.3e})")
    return unvec(np.linalg.solve(op, vec(C)), (n, q))


class ShiftedSolver:
    """Repeated solves of ``(A0 + lam I) X + sum F X B = C`` for many ``lam``.

    The Kronecker operator without the shift is Hermitian positive
    semidefinite, so one eigendecomposition serves every dual value.
    """

    def __init__(self, system: SylvesterSystem):
        self.system = system
        self.shape = system.C0.shape
        n, q = self.shape
        op = np.kron(np.eye(q), system.A0).astype(complex)
        for F, B in zip(system.F, system.B):
            op = op + np.kron(B.T, F)
        op = 0.5 * (op + op.conj().T)
        self.evals, self.evecs = np.linalg.eigh(op)
        self._proj_c = self.evecs.conj().T @ vec(system.C0 + system.rate_fixed)
        self._proj_own = self.evecs.conj().T @ vec(system.rate_own)

    def solve(self, lam: float, mu_own: float) -> np.ndarray:
        denom = self.evals + lam
        if np.min(np.abs(denom)) <= 1e-14 * max(1.0, np.max(np.abs(self.evals))):
            raise SylvesterError(f"shifted Sylvester operator is singular (lambda={lam})")
        y = (self._proj_c + mu_own * self._proj_own) / denom
        return unvec(self.evecs @ y, self.shape)
