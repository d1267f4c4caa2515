"""Stacked radar target model and receiver covariance matrices.

Radar receive model at Rx ``n`` and PRI ``k`` (CUT level)::

    y[k] = a[k]^T h_rt[k] + s_Bt[k]^T h_Bt[k]              target
         + a[k]^T h_c + x_Bm[k]^T alpha_Bm                  clutter, BS direct path
         + sum_i x_u[i][k]^T alpha_iU + noise               UL direct paths

with ``x[k] = [a[k]; s_Bt[k]]`` stacked into the K x KM matrix ``S_t``.
Target gains follow a Doppler-rotated AR(1) law across PRIs so the
cross-PRI blocks are ``sigma2 * rho^|m-k| * exp(j 2 pi f (m-k))``; clutter
and direct paths are constant over the CPI.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .channels import ChannelSet, SymbolSet
from .config import SystemConfig
from .linalg import herm
from .state import DesignState


class ModelError(ValueError):
    """Raised when design variables do not match the configured dimensions."""


@dataclasses.dataclass
class RadarStats:
    """Second-order radar statistics for every radar Rx.

    ``Sigma_rt[n]``: (K, K, M_r, M_r) with ``[m, k]`` the block ``E[h_rt[m] h_rt[k]^H]``;
    ``Sigma_Bt[n]``: (K, K, M_c, M_c); ``Sigma_c[n]``: (M_r, M_r); ``Sigma_Bm[n]``: (M_c, M_c);
    ``Sigma_iU[i][n]``: (N_u[i], N_u[i]). The last three are constant over the CPI.
    """

    Sigma_rt: list[np.ndarray]
    Sigma_Bt: list[np.ndarray]
    Sigma_c: list[np.ndarray]
    Sigma_Bm: list[np.ndarray]
    Sigma_iU: list[list[np.ndarray]]
    Sigma_t: list[np.ndarray]       # (KM, KM) assembled


def _cross_pri(K: int, var: np.ndarray, f: np.ndarray, rho: float) -> np.ndarray:
    """Diagonal entries of the (m, k) blocks: shape (K, K, len(var))."""
    lag = np.arange(K)[:, None] - np.arange(K)[None, :]
    decay = rho ** np.abs(lag) if rho < 1.0 else np.ones_like(lag, dtype=float)
    phase = np.exp(2j * np.pi * lag[:, :, None] * f[None, None, :])
    return var[None, None, :] * decay[:, :, None] * phase


def radar_stats(cfg: SystemConfig, ch: ChannelSet) -> RadarStats:
    K, Mr, Mc, M = cfg.K, cfg.M_r, cfg.M_c, cfg.M
    rho = ch.target_corr
    Sigma_rt, Sigma_Bt, Sigma_t = [], [], []
    for n in range(cfg.N_r):
        drt = _cross_pri(K, ch.sigma2_rt[:, n], ch.f_rt[:, n], rho)
        dbt = _cross_pri(K, np.full(Mc, ch.sigma2_Bt[n]), np.full(Mc, ch.f_Bt[n]), rho)
        srt = np.zeros((K, K, Mr, Mr), complex)
        sbt = np.zeros((K, K, Mc, Mc), complex)
        srt[:, :, np.arange(Mr), np.arange(Mr)] = drt
        sbt[:, :, np.arange(Mc), np.arange(Mc)] = dbt
        full = np.zeros((K, M, K, M), complex)
        full[:, :Mr, :, :Mr] = srt.transpose(0, 2, 1, 3)
        full[:, Mr:, :, Mr:] = sbt.transpose(0, 2, 1, 3)
        Sigma_rt.append(srt)
        Sigma_Bt.append(sbt)
        Sigma_t.append(full.reshape(K * M, K * M))
    Sigma_c = [ch.sigma2_c * np.eye(Mr, dtype=complex) for _ in range(cfg.N_r)]
    Sigma_Bm = [ch.sigma2_Bm * np.eye(Mc, dtype=complex) for _ in range(cfg.N_r)]
    Sigma_iU = [[ch.sigma2_iU * np.eye(n, dtype=complex) for _ in range(cfg.N_r)] for n in cfg.N_u]
    return RadarStats(Sigma_rt, Sigma_Bt, Sigma_c, Sigma_Bm, Sigma_iU, Sigma_t)


def selection_matrices(cfg: SystemConfig) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """``J_h[m]`` (KM x M) picks PRI block m; ``J_r`` (M x M_r) and ``J_B`` (M x M_c) split it."""
    K, M, Mr, Mc = cfg.K, cfg.M, cfg.M_r, cfg.M_c
    J_h = []
    for m in range(K):
        J = np.zeros((K * M, M))
        J[m * M:(m + 1) * M, :] = np.eye(M)
        J_h.append(J)
    J_r = np.vstack([np.eye(Mr), np.zeros((Mc, Mr))])
    J_B = np.vstack([np.zeros((Mr, Mc)), np.eye(Mc)])
    return J_h, J_r, J_B


# --- transmitted radar-side vectors -------------------------------------------------

def dl_target_symbols(state: DesignState, symbols: SymbolSet) -> np.ndarray:
    """``s_Bt[k] = sum_j P_d[j][k] d_d[j][k, 0]``, shape (K, M_c)."""
    return sum(np.einsum("kmd,kd->km", P, d[:, 0, :]) for P, d in zip(state.P_d, symbols.d_d))


def dl_direct_symbols(cfg: SystemConfig, state: DesignState, symbols: SymbolSet) -> np.ndarray:
    """``x_Bm[k] = sum_j P_d[j][k] d_d[j][k, n_t - n_Bm]``, shape (K, M_c)."""
    s = cfg.offset_Bm
    return sum(np.einsum("kmd,kd->km", P, d[:, s, :]) for P, d in zip(state.P_d, symbols.d_d))


def ul_direct_symbols(cfg: SystemConfig, state: DesignState, symbols: SymbolSet) -> list[np.ndarray]:
    """``x_u[i][k] = P_u[i][k] d_u[i][k, n_t - n_u]``, each (K, N_u[i])."""
    s = cfg.offset_u
    return [np.einsum("kmd,kd->km", P, d[:, s, :]) for P, d in zip(state.P_u, symbols.d_u)]


def stacked_code(state: DesignState, symbols: SymbolSet) -> np.ndarray:
    """Rows ``x[k] = [a[k]; s_Bt[k]]``, shape (K, M)."""
    return np.concatenate([state.A, dl_target_symbols(state, symbols)], axis=1)


def build_S_t(X: np.ndarray) -> np.ndarray:
    """Block matrix (K x KM) with ``x[k]^T`` in row k, columns ``kM:(k+1)M``."""
    K, M = X.shape
    S = np.zeros((K, K * M), complex)
    for k in range(K):
        S[k, k * M:(k + 1) * M] = X[k]
    return S


def quad_blocks(V: np.ndarray, Gamma: np.ndarray) -> np.ndarray:
    """``R[m, l] = v[m]^T Gamma[m, l] v[l]^*`` for per-lag blocks ``Gamma`` (K, K, d, d)."""
    return np.einsum("md,mlde,le->ml", V, Gamma, np.conj(V))


def _check_state(cfg: SystemConfig, state: DesignState) -> None:
    if state.A.shape != (cfg.K, cfg.M_r):
        raise ModelError(f"A must be {(cfg.K, cfg.M_r)}, got {state.A.shape}")
    for i, P in enumerate(state.P_u):
        if P.shape != (cfg.K, cfg.N_u[i], cfg.D_u[i]):
            raise ModelError(f"P_u[{i}] has shape {P.shape}")
    for j, P in enumerate(state.P_d):
        if P.shape != (cfg.K, cfg.M_c, cfg.D_d[j]):
            raise ModelError(f"P_d[{j}] has shape {P.shape}")
    if len(state.P_u) != cfg.I or len(state.P_d) != cfg.J:
        raise ModelError("precoder count does not match I, J")


def build_target_model(cfg: SystemConfig, stats: RadarStats, state: DesignState, symbols: SymbolSet):
    """Return ``(S_t, R_t)`` where ``R_t[n] = S_t Sigma_t[n] S_t^H``; ``S_t`` is shared by all Rxs."""
    _check_state(cfg, state)
    S = build_S_t(stacked_code(state, symbols))
    R_t = [S @ Sig @ herm(S) for Sig in stats.Sigma_t]
    return S, R_t


def target_covariance_direct(cfg: SystemConfig, stats: RadarStats, state: DesignState,
                             symbols: SymbolSet) -> list[np.ndarray]:
    """``R_t`` assembled block-wise from the radar and BS target paths (no ``S_t``)."""
    s = dl_target_symbols(state, symbols)
    return [quad_blocks(state.A, stats.Sigma_rt[n]) + quad_blocks(s, stats.Sigma_Bt[n])
            for n in range(cfg.N_r)]


@dataclasses.dataclass
class RadarInterference:
    R_c: list[np.ndarray]
    R_Bm: list[np.ndarray]
    R_Ur: list[np.ndarray]
    R_in: list[np.ndarray]


def build_radar_interference(cfg: SystemConfig, stats: RadarStats, state: DesignState,
                             symbols: SymbolSet) -> RadarInterference:
    """Clutter, BS direct-path and UL direct-path covariances plus noise at each radar Rx."""
    _check_state(cfg, state)
    A = state.A
    xBm = dl_direct_symbols(cfg, state, symbols)
    xu = ul_direct_symbols(cfg, state, symbols)
    noise = cfg.sigma2_r * np.eye(cfg.K)
    R_c, R_Bm, R_Ur, R_in = [], [], [], []
    for n in range(cfg.N_r):
        rc = A @ stats.Sigma_c[n] @ herm(A)
        rbm = xBm @ stats.Sigma_Bm[n] @ herm(xBm)
        rur = sum(x @ stats.Sigma_iU[i][n] @ herm(x) for i, x in enumerate(xu))
        R_c.append(rc)
        R_Bm.append(rbm)
        R_Ur.append(rur)
        R_in.append(rc + rbm + rur + noise)
    return RadarInterference(R_c, R_Bm, R_Ur, R_in)


def build_ul_covariance(cfg: SystemConfig, ch: ChannelSet, state: DesignState, k: int):
    """``(R_sig[i], R_in[i])`` at BS for every UL user in frame ``k``; ``R_u = R_sig + R_in``."""
    T_d = sum(P[k] @ herm(P[k]) for P in state.P_d)
    a = state.A[k]
    common = ch.H_BB @ T_d @ herm(ch.H_BB) + np.outer(ch.H_rB @ a, np.conj(ch.H_rB @ a))
    common = common + cfg.sigma2_B * np.eye(cfg.N_c)
    signal = [ch.H_iB[i] @ state.P_u[i][k] @ herm(state.P_u[i][k]) @ herm(ch.H_iB[i]) for i in range(cfg.I)]
    total = sum(signal)
    R_in = [common + total - signal[i] for i in range(cfg.I)]
    return signal, R_in


def build_dl_covariance(cfg: SystemConfig, ch: ChannelSet, state: DesignState, k: int):
    """``(R_sig[j], R_in[j])`` at each DL user in frame ``k``."""
    a = state.A[k]
    signal, R_in = [], []
    for j in range(cfg.J):
        H = ch.H_Bj[j]
        per = [H @ P[k] @ herm(P[k]) @ herm(H) for P in state.P_d]
        ul = sum(ch.H_ij[i][j] @ state.P_u[i][k] @ herm(state.P_u[i][k]) @ herm(ch.H_ij[i][j])
                 for i in range(cfg.I))
        r = ch.H_rj[j] @ a
        rin = sum(per) - per[j] + ul + np.outer(r, np.conj(r)) + cfg.sigma2_d * np.eye(cfg.N_d[j])
        signal.append(per[j])
        R_in.append(rin)
    return signal, R_in


@dataclasses.dataclass
class CovarianceBundle:
    """All covariances for one design state. Comms entries are indexed ``[user][k]``."""

    S_t: np.ndarray
    Sigma_t: list[np.ndarray]
    R_t: list[np.ndarray]
    radar_in: RadarInterference
    R_sig_u: list[list[np.ndarray]]
    R_in_u: list[list[np.ndarray]]
    R_sig_d: list[list[np.ndarray]]
    R_in_d: list[list[np.ndarray]]

    @property
    def R_in_r(self) -> list[np.ndarray]:
        return self.radar_in.R_in

    @property
    def R_r(self) -> list[np.ndarray]:
        return [t + r for t, r in zip(self.R_t, self.radar_in.R_in)]

    @property
    def R_u(self) -> list[list[np.ndarray]]:
        return [[s + r for s, r in zip(S, R)] for S, R in zip(self.R_sig_u, self.R_in_u)]

    @property
    def R_d(self) -> list[list[np.ndarray]]:
        return [[s + r for s, r in zip(S, R)] for S, R in zip(self.R_sig_d, self.R_in_d)]


def build_bundle(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState,
                 symbols: SymbolSet) -> CovarianceBundle:
    S, R_t = build_target_model(cfg, stats, state, symbols)
    rin = build_radar_interference(cfg, stats, state, symbols)
    sig_u = [[None] * cfg.K for _ in range(cfg.I)]
    in_u = [[None] * cfg.K for _ in range(cfg.I)]
    sig_d = [[None] * cfg.K for _ in range(cfg.J)]
    in_d = [[None] * cfg.K for _ in range(cfg.J)]
    for k in range(cfg.K):
        s, r = build_ul_covariance(cfg, ch, state, k)
        for i in range(cfg.I):
            sig_u[i][k], in_u[i][k] = s[i], r[i]
        s, r = build_dl_covariance(cfg, ch, state, k)
        for j in range(cfg.J):
            sig_d[j][k], in_d[j][k] = s[j], r[j]
    return CovarianceBundle(S, stats.Sigma_t, R_t, rin, sig_u, in_u, sig_d, in_d)
