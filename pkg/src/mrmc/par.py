"""Nearest vector with prescribed energy and bounded peak-to-average power ratio."""

from __future__ import annotations

import dataclasses

import numpy as np

from .config import SystemConfig


@dataclasses.dataclass(frozen=True)
class ParFeasibleSet:
    """Vectors of length ``K`` with ``||a||^2 = P_r`` and ``K max|a_k|^2 / P_r <= gamma``."""

    P_r: float
    gamma: float
    K: int

    def __post_init__(self) -> None:
        if self.P_r <= 0:
            raise ValueError("P_r must be positive")
        if not 1.0 - 1e-12 <= self.gamma <= self.K + 1e-12:
            raise ValueError(f"gamma must lie in [1, K={self.K}], got {self.gamma}")

    @property
    def peak(self) -> float:
        """Largest admissible entry modulus ``sqrt(P_r gamma / K)``."""
        return float(np.sqrt(self.P_r * self.gamma / self.K))

    def contains(self, a: np.ndarray, rtol: float = 1e-9) -> bool:
        a = np.asarray(a)
        energy = float(np.sum(np.abs(a) ** 2))
        if abs(energy - self.P_r) > rtol * self.P_r:
            return False
        par = self.K * float(np.max(np.abs(a) ** 2)) / self.P_r
        return par <= self.gamma + rtol


def par_project(a_prime: np.ndarray, feasible: ParFeasibleSet) -> np.ndarray:
    """Closest point of ``feasible`` to the direction of ``a_prime``.

    The input is first normalized to energy ``P_r``. Entries are then clipped
    to the peak modulus from the largest down; each pass rescales the
    unclipped entries so the total energy stays ``P_r`` and stops once none
    of them exceeds the peak. Phases are kept throughout. An all-zero input
    maps to the constant-modulus vector with zero phases.
    """
    a = np.asarray(a_prime, dtype=complex).ravel()
    K = feasible.K
    if a.size != K:
        raise ValueError(f"expected length {K}, got {a.size}")
    P_r, sigma = feasible.P_r, feasible.peak
    peak_in = np.max(np.abs(a))
    if peak_in == 0.0:
        return np.full(K, np.sqrt(P_r / K), dtype=complex)
    a = a / peak_in  # avoids underflow in the norm for tiny inputs
    norm = np.linalg.norm(a)
    z = a * (np.sqrt(P_r) / norm)
    mag = np.abs(z)
    phase = np.exp(1j * np.angle(z))
    order = np.argsort(-mag, kind="stable")
    out_mag = mag.copy()
    for clipped in range(K + 1):
        big = order[:clipped]
        small = order[clipped:]
        energy = P_r - clipped * sigma ** 2
        if small.size == 0:
            out_mag[big] = sigma
            break
        lead = mag[small[0]]
        if lead == 0.0:
            out_mag[big] = sigma
            out_mag[small] = np.sqrt(max(energy, 0.0) / small.size)
            break
        unit = mag[small] / lead  # ratios keep tiny entries out of subnormal range
        scaled = np.sqrt(max(energy, 0.0)) * unit / np.linalg.norm(unit)
        if scaled[0] <= sigma * (1.0 + 1e-12):
            out_mag[big] = sigma
            out_mag[small] = scaled
            break
    return out_mag * phase


def project_code_matrix(A_prime: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Column-wise projection of a K x M_r code matrix."""
    A_prime = np.asarray(A_prime)
    if A_prime.shape != (cfg.K, cfg.M_r):
        raise ValueError(f"code matrix must be {(cfg.K, cfg.M_r)}")
    cols = [par_project(A_prime[:, m], ParFeasibleSet(cfg.P_r[m], cfg.gamma[m], cfg.K)) for m in range(cfg.M_r)]
    return np.stack(cols, axis=1)


def code_feasible(A: np.ndarray, cfg: SystemConfig, rtol: float = 1e-9) -> bool:
    return all(ParFeasibleSet(cfg.P_r[m], cfg.gamma[m], cfg.K).contains(A[:, m], rtol) for m in range(cfg.M_r))
