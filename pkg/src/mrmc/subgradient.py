"""Projected-subgradient dual loops for the precoder blocks and the radar-code block solve."""

from __future__ import annotations

import dataclasses

import numpy as np

from .gradients import SylvesterSystem
from .sylvester import ShiftedSolver

DUAL_CAP = 1e6
FEAS_RTOL = 1e-9


def polyak_step(t: int, xi_t: float, xi_min: float, slack: float) -> float:
    """``(Xi_t - Xi_min + 0.1^t) / |slack|^2``; zero when the slack is exactly zero."""
    if slack == 0.0:
        return 0.0
    return (xi_t - xi_min + 0.1 ** t) / (slack * slack)


def project_dual(value: float) -> float:
    """``[x]^+`` with the numerical cap used to flag infeasible QoS targets."""
    return float(min(max(value, 0.0), DUAL_CAP))


@dataclasses.dataclass
class SubgradientResult:
    P: np.ndarray
    lam: float
    mu: float
    xi_best: float          # block quadratic at the returned point
    xi_start: float         # block quadratic at the incoming point
    iterations: int
    power_feasible: bool
    rate: float
    qos_capped: bool
    trace: list[float]      # block quadratic of every dual iterate


def own_rate(M_own: np.ndarray, P: np.ndarray) -> float:
    """``log2 |I + P^H M P|`` where ``M = H^H R_in^{-1} H`` excludes the block itself."""
    X = np.eye(P.shape[1]) + P.conj().T @ M_own @ P
    sign, ld = np.linalg.slogdet(X)
    return float(ld / np.log(2.0))


def subgradient_block(system: SylvesterSystem, P_in: np.ndarray, M_own: np.ndarray, power_other: float,
                      P_max: float, R_min: float, t_max: int, lam0: float = 1.0, mu0: float = 1.0
                      ) -> SubgradientResult:
    """Dual loop for one precoder block.

    Each iteration solves the block's Sylvester equation at the current
    ``(lambda, mu)``, evaluates the weighted-sum MSE, and takes projected
    Polyak steps on the power slack ``power - P_max`` and the QoS slack
    ``R_min - R``. The returned precoder is the best iterate by objective
    among power-feasible candidates (the incoming point included); when no
    candidate is feasible, the one with the smallest violation wins.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    solver = ShiftedSolver(system)
    tol = FEAS_RTOL * P_max

    def power_of(P):
        return power_other + float(np.sum(np.abs(P) ** 2))

    xi_start = system.quadratic(P_in)
    xi_min = xi_start
    p_in = power_of(P_in)
    best_key = (p_in > P_max + tol, xi_start if p_in <= P_max + tol else p_in)
    best = (P_in, lam0, mu0, xi_start)
    lam, mu = float(lam0), float(mu0)
    trace = []
    for t in range(1, t_max + 1):
        P = solver.solve(lam, mu)
        xi_t = system.quadratic(P)
        trace.append(xi_t)
        power = power_of(P)
        feasible = power <= P_max + tol
        key = (not feasible, xi_t if feasible else power)
        if key < best_key:
            best_key = key
            best = (P, lam, mu, xi_t)
        xi_min = min(xi_min, xi_t)
        s_pow = power - P_max
        s_rate = R_min - own_rate(M_own, P)
        lam = project_dual(lam + polyak_step(t, xi_t, xi_min, s_pow) * s_pow)
        mu = project_dual(mu + polyak_step(t, xi_t, xi_min, s_rate) * s_rate)
    P, lam_b, mu_b, xi_b = best
    rate = own_rate(M_own, P)
    return SubgradientResult(
        P=P, lam=lam_b, mu=mu_b, xi_best=xi_b, xi_start=xi_start, iterations=t_max,
        power_feasible=not best_key[0], rate=rate,
        qos_capped=(mu >= DUAL_CAP or mu_b >= DUAL_CAP), trace=trace,
    )


@dataclasses.dataclass
class RadarSolveResult:
    a: np.ndarray
    xi_new: float
    xi_old: float
    fallback: bool


def solve_radar_code(system: SylvesterSystem, a_old: np.ndarray) -> RadarSolveResult:
    """``a[k] = (A_r + F_r)^{-1} c_r``.

    ``c_r`` includes the linearized rate terms weighted by the tracked duals.
    When that point raises the weighted-sum MSE above its incoming value the
    exact block minimizer without rate terms is returned instead, which keeps
    the inner objective monotone.
    """
    mat = system.A0 + sum(F * B[0, 0] for F, B in zip(system.F, system.B))
    c = (system.C0 + system.rate_fixed)[:, 0]
    a_new = np.linalg.solve(mat, c)
    xi_old = system.quadratic(a_old[:, None])
    xi_new = system.quadratic(a_new[:, None])
    scale = 1e-10 * max(1.0, abs(xi_old))
    if xi_new <= xi_old + scale:
        return RadarSolveResult(a_new, xi_new, xi_old, False)
    a_plain = np.linalg.solve(mat, system.C0[:, 0])
    return RadarSolveResult(a_plain, system.quadratic(a_plain[:, None]), xi_old, True)
