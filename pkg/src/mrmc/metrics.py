"""Mutual information, rates, MSE matrices, MMSE filters and the WMMSE objective.

All information quantities are in bits (log base 2).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .channels import ChannelSet, SymbolSet
from .config import SystemConfig
from .covariance import (
    CovarianceBundle,
    RadarStats,
    dl_direct_symbols,
    dl_target_symbols,
    quad_blocks,
    ul_direct_symbols,
)
from .linalg import herm, hermitize, inv_herm, logdet_herm, range_basis
from .state import DesignState


class NumericalConsistencyError(RuntimeError):
    """Raised when an objective that must be nonnegative comes out negative."""


# --- mutual information ---------------------------------------------------------------

def filtered_mi(U: np.ndarray, R_sig: np.ndarray, R_in: np.ndarray) -> float:
    """``log2 |I + U R_sig U^H (U R_in U^H)^{-1}|`` restricted to the range of ``U``.

    When ``U`` has more rows than its rank (the radar filter is KM x K) the
    determinant ratio is taken on the column space of ``U``, where the
    filtered interference covariance is invertible.
    """
    U = np.atleast_2d(U)
    Q = range_basis(U)
    if Q.shape[1] == 0:
        return 0.0
    Y = herm(Q) @ U
    value = logdet_herm(Y @ (R_sig + R_in) @ herm(Y)) - logdet_herm(Y @ R_in @ herm(Y))
    return max(value, 0.0)


def mi_radar(U_r: np.ndarray, R_t: np.ndarray, R_in_r: np.ndarray) -> float:
    return filtered_mi(U_r, R_t, R_in_r)


def mi_ul(U_u: np.ndarray, R_sig: np.ndarray, R_in: np.ndarray) -> float:
    return filtered_mi(U_u, R_sig, R_in)


mi_dl = mi_ul


def cwsm(cfg: SystemConfig, I_r, I_u, I_d) -> float:
    """``sum_n alpha_r I_r[n] + sum_k (sum_i alpha_u I_u[i][k] + sum_j alpha_d I_d[j][k])``."""
    total = float(np.dot(cfg.alpha_r, np.asarray(I_r, dtype=float)))
    return total + fd_sum(cfg, I_u, I_d)


def fd_sum(cfg: SystemConfig, I_u, I_d) -> float:
    """Weighted communications MI summed over frames."""
    total = 0.0
    for i in range(cfg.I):
        total += cfg.alpha_u[i] * float(np.sum(I_u[i]))
    for j in range(cfg.J):
        total += cfg.alpha_d[j] * float(np.sum(I_d[j]))
    return total


# --- filters, MSE and weights ----------------------------------------------------------

@dataclasses.dataclass
class Filters:
    U_r: list[np.ndarray]
    U_u: list[np.ndarray]
    U_d: list[np.ndarray]


def mmse_filters(cfg: SystemConfig, ch: ChannelSet, state: DesignState, bundle: CovarianceBundle) -> Filters:
    """``U_r = Sigma_t S_t^H R_r^{-1}``, ``U_u = P_u^H H_iB^H R_u^{-1}``, ``U_d = P_d^H H_Bj^H R_d^{-1}``."""
    S = bundle.S_t
    U_r = [Sig @ herm(S) @ inv_herm(R, "radar covariance") for Sig, R in zip(bundle.Sigma_t, bundle.R_r)]
    R_u, R_d = bundle.R_u, bundle.R_d
    U_u = [np.stack([herm(ch.H_iB[i] @ state.P_u[i][k]) @ inv_herm(R_u[i][k], "UL covariance")
                     for k in range(cfg.K)]) for i in range(cfg.I)]
    U_d = [np.stack([herm(ch.H_Bj[j] @ state.P_d[j][k]) @ inv_herm(R_d[j][k], "DL covariance")
                     for k in range(cfg.K)]) for j in range(cfg.J)]
    return Filters(U_r, U_u, U_d)


@dataclasses.dataclass
class MSEMatrices:
    E_r: list[np.ndarray]
    E_u: list[np.ndarray]   # [i] (K, D, D)
    E_d: list[np.ndarray]


def mse_matrices(cfg: SystemConfig, ch: ChannelSet, state: DesignState, bundle: CovarianceBundle,
                 filters: Filters | None = None) -> MSEMatrices:
    """MSE of each linear estimator for the filters in ``filters`` (default: those in ``state``)."""
    if filters is None:
        filters = Filters(state.U_r, state.U_u, state.U_d)
    S = bundle.S_t
    E_r = []
    for n in range(cfg.N_r):
        U, Sig = filters.U_r[n], bundle.Sigma_t[n]
        cross = U @ S @ Sig
        E_r.append(hermitize(U @ bundle.R_r[n] @ herm(U) - cross - herm(cross) + Sig))
    R_u, R_d = bundle.R_u, bundle.R_d

    def link(U, H, P, R):
        G = U @ H @ P
        return hermitize(np.eye(P.shape[1]) - G - herm(G) + U @ R @ herm(U))

    E_u = [np.stack([link(filters.U_u[i][k], ch.H_iB[i], state.P_u[i][k], R_u[i][k]) for k in range(cfg.K)])
           for i in range(cfg.I)]
    E_d = [np.stack([link(filters.U_d[j][k], ch.H_Bj[j], state.P_d[j][k], R_d[j][k]) for k in range(cfg.K)])
           for j in range(cfg.J)]
    return MSEMatrices(E_r, E_u, E_d)


def mmse_matrices(cfg: SystemConfig, ch: ChannelSet, state: DesignState, bundle: CovarianceBundle) -> MSEMatrices:
    """Closed-form MSE at the MMSE filters."""
    S = bundle.S_t
    E_r = []
    for Sig, R in zip(bundle.Sigma_t, bundle.R_r):
        T = Sig @ herm(S)
        E_r.append(hermitize(Sig - T @ inv_herm(R) @ herm(T)))
    R_u, R_d = bundle.R_u, bundle.R_d

    def link(H, P, R):
        T = herm(H @ P)
        return hermitize(np.eye(P.shape[1]) - T @ inv_herm(R) @ herm(T))

    E_u = [np.stack([link(ch.H_iB[i], state.P_u[i][k], R_u[i][k]) for k in range(cfg.K)]) for i in range(cfg.I)]
    E_d = [np.stack([link(ch.H_Bj[j], state.P_d[j][k], R_d[j][k]) for k in range(cfg.K)]) for j in range(cfg.J)]
    return MSEMatrices(E_r, E_u, E_d)


def optimal_weights(E: np.ndarray) -> np.ndarray:
    """``W = E^{-1}`` for a Hermitian positive-definite MSE matrix (batched over leading axes)."""
    E = np.asarray(E)
    if E.ndim == 2:
        return hermitize(inv_herm(E, "MMSE matrix"))
    return np.stack([optimal_weights(e) for e in E])


def refresh_filters(cfg: SystemConfig, ch: ChannelSet, state: DesignState, bundle: CovarianceBundle) -> None:
    """Set ``U`` to the MMSE filters and ``W`` to the inverse MMSE matrices, in place."""
    f = mmse_filters(cfg, ch, state, bundle)
    E = mmse_matrices(cfg, ch, state, bundle)
    state.U_r, state.U_u, state.U_d = f.U_r, f.U_u, f.U_d
    state.W_r = [optimal_weights(e) for e in E.E_r]
    state.W_u = [optimal_weights(e) for e in E.E_u]
    state.W_d = [optimal_weights(e) for e in E.E_d]


# --- rates ---------------------------------------------------------------------------------

@dataclasses.dataclass
class Rates:
    R_r: np.ndarray          # (N_r,)
    R_u: np.ndarray          # (I, K)
    R_d: np.ndarray          # (J, K)


def rates(cfg: SystemConfig, bundle: CovarianceBundle) -> Rates:
    """Achievable rates ``log2|R| - log2|R_in|`` of the MMSE receivers."""
    R_r = np.array([logdet_herm(R) - logdet_herm(Rin) for R, Rin in zip(bundle.R_r, bundle.R_in_r)])
    R_u = np.array([[logdet_herm(bundle.R_sig_u[i][k] + bundle.R_in_u[i][k]) - logdet_herm(bundle.R_in_u[i][k])
                     for k in range(cfg.K)] for i in range(cfg.I)]).reshape(cfg.I, cfg.K)
    R_d = np.array([[logdet_herm(bundle.R_sig_d[j][k] + bundle.R_in_d[j][k]) - logdet_herm(bundle.R_in_d[j][k])
                     for k in range(cfg.K)] for j in range(cfg.J)]).reshape(cfg.J, cfg.K)
    return Rates(R_r, R_u, R_d)


def rates_from_mmse(cfg: SystemConfig, bundle: CovarianceBundle, E: MSEMatrices) -> Rates:
    """Same rates through ``log2|E*^{-1}|`` and, for the radar, ``log2|Sigma_t E*^{-1}|``."""
    R_r = np.array([logdet_herm(Sig) - logdet_herm(e) for Sig, e in zip(bundle.Sigma_t, E.E_r)])
    R_u = np.array([[-logdet_herm(E.E_u[i][k]) for k in range(cfg.K)] for i in range(cfg.I)]).reshape(cfg.I, cfg.K)
    R_d = np.array([[-logdet_herm(E.E_d[j][k]) for k in range(cfg.K)] for j in range(cfg.J)]).reshape(cfg.J, cfg.K)
    return Rates(R_r, R_u, R_d)


# --- weighted-sum MSE ----------------------------------------------------------------------

@dataclasses.dataclass
class WeightedMSE:
    Xi_UL: float
    Xi_DL: float
    Xi_r: float

    @property
    def total(self) -> float:
        return self.Xi_UL + self.Xi_DL + self.Xi_r


def weighted_sum_mse_direct(cfg: SystemConfig, E: MSEMatrices, state: DesignState) -> WeightedMSE:
    """``sum alpha tr(W E)`` from explicit MSE matrices."""
    xi_r = sum(a * np.trace(W @ e).real for a, W, e in zip(cfg.alpha_r, state.W_r, E.E_r))
    xi_u = sum(cfg.alpha_u[i] * np.einsum("kab,kba->", state.W_u[i], E.E_u[i]).real for i in range(cfg.I))
    xi_d = sum(cfg.alpha_d[j] * np.einsum("kab,kba->", state.W_d[j], E.E_d[j]).real for j in range(cfg.J))
    return WeightedMSE(float(xi_u), float(xi_d), float(xi_r))


def weighted_sum_mse(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState,
                     symbols: SymbolSet, check: bool = True) -> WeightedMSE:
    """Weighted-sum MSE through the expanded per-term forms.

    The radar part is ``alpha [tr(W Sigma_t) - 2 Re tr(S_t G) + sum_{l,m} Xi(l,m) R_r(m,l)]``
    with ``G = Sigma_t W U`` and ``Xi = alpha U^H W U``; every covariance term is
    assembled block-wise from the transmitted vectors.
    """
    K = cfg.K
    M = cfg.M
    s_bt = dl_target_symbols(state, symbols)
    x_bm = dl_direct_symbols(cfg, state, symbols)
    x_u = ul_direct_symbols(cfg, state, symbols)
    X = np.concatenate([state.A, s_bt], axis=1)
    xi_r = 0.0
    for n in range(cfg.N_r):
        U, W, Sig = state.U_r[n], state.W_r[n], stats.Sigma_t[n]
        alpha = cfg.alpha_r[n]
        G = Sig @ W @ U
        lin = sum(X[k] @ G[k * M:(k + 1) * M, k] for k in range(K))
        Xi = herm(U) @ W @ U
        R = (quad_blocks(state.A, stats.Sigma_rt[n]) + quad_blocks(s_bt, stats.Sigma_Bt[n])
             + state.A @ stats.Sigma_c[n] @ herm(state.A) + x_bm @ stats.Sigma_Bm[n] @ herm(x_bm)
             + sum(x @ stats.Sigma_iU[i][n] @ herm(x) for i, x in enumerate(x_u))
             + cfg.sigma2_r * np.eye(K))
        quad = np.sum(Xi * R.T)
        xi_r += alpha * (np.trace(W @ Sig).real - 2.0 * lin.real + quad.real)
    xi_u = 0.0
    xi_d = 0.0
    for k in range(K):
        T_u = [P[k] @ herm(P[k]) for P in state.P_u]
        T_d = sum(P[k] @ herm(P[k]) for P in state.P_d)
        a = state.A[k]
        R_common = ch.H_BB @ T_d @ herm(ch.H_BB) + np.outer(ch.H_rB @ a, np.conj(ch.H_rB @ a)) \
            + cfg.sigma2_B * np.eye(cfg.N_c) + sum(H @ T @ herm(H) for H, T in zip(ch.H_iB, T_u))
        for i in range(cfg.I):
            U, W = state.U_u[i][k], state.W_u[i][k]
            own = np.trace(W @ U @ ch.H_iB[i] @ state.P_u[i][k])
            xi_u += cfg.alpha_u[i] * (np.trace(W).real - 2 * own.real + np.trace(herm(U) @ W @ U @ R_common).real)
        for j in range(cfg.J):
            U, W, H = state.U_d[j][k], state.W_d[j][k], ch.H_Bj[j]
            R = H @ T_d @ herm(H) + sum(ch.H_ij[i][j] @ T_u[i] @ herm(ch.H_ij[i][j]) for i in range(cfg.I)) \
                + np.outer(ch.H_rj[j] @ a, np.conj(ch.H_rj[j] @ a)) + cfg.sigma2_d * np.eye(cfg.N_d[j])
            own = np.trace(W @ U @ H @ state.P_d[j][k])
            xi_d += cfg.alpha_d[j] * (np.trace(W).real - 2 * own.real + np.trace(herm(U) @ W @ U @ R).real)
    out = WeightedMSE(float(xi_u), float(xi_d), float(xi_r))
    if check:
        scale = 1e-10 * (1.0 + abs(out.total))
        if out.Xi_UL < -scale or out.Xi_DL < -scale or out.Xi_r < -scale:
            raise NumericalConsistencyError(f"negative weighted MSE {out}")
    return out


# --- objective snapshots and the WMMSE identity ------------------------------------------

@dataclasses.dataclass
class ObjectiveSnapshot:
    I_r: np.ndarray
    I_u: np.ndarray
    I_d: np.ndarray
    I_CWSM: float
    I_FD: float
    rates: Rates


def snapshot(cfg: SystemConfig, ch: ChannelSet, state: DesignState, bundle: CovarianceBundle,
             filters: Filters | None = None) -> ObjectiveSnapshot:
    """MI of every link for the given filters (default: the state's, else MMSE)."""
    if filters is None:
        filters = (Filters(state.U_r, state.U_u, state.U_d) if state.U_r is not None
                   else mmse_filters(cfg, ch, state, bundle))
    I_r = np.array([mi_radar(filters.U_r[n], bundle.R_t[n], bundle.R_in_r[n]) for n in range(cfg.N_r)])
    I_u = np.array([[mi_ul(filters.U_u[i][k], bundle.R_sig_u[i][k], bundle.R_in_u[i][k]) for k in range(cfg.K)]
                    for i in range(cfg.I)]).reshape(cfg.I, cfg.K)
    I_d = np.array([[mi_dl(filters.U_d[j][k], bundle.R_sig_d[j][k], bundle.R_in_d[j][k]) for k in range(cfg.K)]
                    for j in range(cfg.J)]).reshape(cfg.J, cfg.K)
    return ObjectiveSnapshot(I_r, I_u, I_d, cwsm(cfg, I_r, I_u, I_d), fd_sum(cfg, I_u, I_d), rates(cfg, bundle))


def wmse_offset(cfg: SystemConfig, state: DesignState, bundle: CovarianceBundle) -> float:
    """Log-det and dimension offsets turning the weighted MSE into ``-I_CWSM`` at the optimum.

    Radar terms use ``log2|Sigma_t W_r| + KM``; comms terms ``log2|W| + D``.
    """
    total = 0.0
    for n in range(cfg.N_r):
        total += cfg.alpha_r[n] * (logdet_herm(bundle.Sigma_t[n]) + logdet_herm(state.W_r[n]) + cfg.KM)
    for i in range(cfg.I):
        for k in range(cfg.K):
            total += cfg.alpha_u[i] * (logdet_herm(state.W_u[i][k]) + cfg.D_u[i])
    for j in range(cfg.J):
        for k in range(cfg.K):
            total += cfg.alpha_d[j] * (logdet_herm(state.W_d[j][k]) + cfg.D_d[j])
    return total


def duality_residual(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState,
                      symbols: SymbolSet, bundle: CovarianceBundle) -> float:
    """``|Xi'_wmse + I_CWSM|`` for a state whose filters and weights are the MMSE ones."""
    xi = weighted_sum_mse(cfg, ch, stats, state, symbols).total
    xi_prime = xi - wmse_offset(cfg, state, bundle)
    return abs(xi_prime + snapshot(cfg, ch, state, bundle).I_CWSM)
