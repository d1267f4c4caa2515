"""Conjugate-coordinate gradients of the weighted-sum MSE and of the link rates.

Convention: for a real function ``f`` of a complex matrix ``X`` the gradient is
``df/dX^*``, so ``df = 2 Re tr(grad^H dX)``. Rates are in bits, hence the
``1/ln 2`` factors.

With filters and weights held fixed, the weighted-sum MSE is quadratic in
every precoder block. The cached quantities are

* ``Phi_UL[k] = sum_q alpha_q U_q^H W_q U_q`` at the BS,
* ``Phi_d[g][k] = alpha_g U_g^H W_g U_g`` at DL user ``g``,
* ``Xi[n] = alpha_n U_r^H W_r U_r`` (K x K) and ``G[n] = alpha_n Sigma_t W_r U_r`` (KM x K)
  at radar Rx ``n``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .channels import ChannelSet, SymbolSet
from .config import SystemConfig
from .covariance import (
    RadarStats,
    build_dl_covariance,
    build_ul_covariance,
    dl_direct_symbols,
    dl_target_symbols,
    ul_direct_symbols,
)
from .linalg import herm, inv_herm
from .state import DesignState

LN2 = math.log(2.0)


class StaleCacheError(RuntimeError):
    """Raised when a cache is used with filters other than the ones it was built from."""


@dataclasses.dataclass
class GradientCache:
    Phi_UL: np.ndarray              # (K, N_c, N_c)
    Phi_d: list[np.ndarray]         # [g] (K, N_d, N_d)
    Xi: np.ndarray                  # (N_r, K, K)
    g_r: np.ndarray                 # (N_r, K, M_r)  conj-free linear coefficients, radar slot
    g_B: np.ndarray                 # (N_r, K, M_c)  BS slot
    UW_u: list[np.ndarray]          # [i] (K, D_u, N_c): alpha_i W U  (row form of the own-signal term)
    UW_d: list[np.ndarray]          # [j] (K, D_d, N_d)
    token: int

    def check(self, state: DesignState) -> None:
        if self.token != _filter_token(state):
            raise StaleCacheError("gradient cache does not match the current filters")


def _filter_token(state: DesignState) -> int:
    return hash(tuple(id(x) for x in (state.U_r, state.U_u, state.U_d, state.W_r, state.W_u, state.W_d)))


def build_cache(cfg: SystemConfig, stats: RadarStats, state: DesignState) -> GradientCache:
    K, M, Mr = cfg.K, cfg.M, cfg.M_r
    Phi_UL = np.zeros((K, cfg.N_c, cfg.N_c), complex)
    UW_u = []
    for i in range(cfg.I):
        U, W = state.U_u[i], state.W_u[i]
        Phi_UL += cfg.alpha_u[i] * herm(U) @ W @ U
        UW_u.append(cfg.alpha_u[i] * W @ U)
    Phi_d, UW_d = [], []
    for j in range(cfg.J):
        U, W = state.U_d[j], state.W_d[j]
        Phi_d.append(cfg.alpha_d[j] * herm(U) @ W @ U)
        UW_d.append(cfg.alpha_d[j] * W @ U)
    Xi = np.zeros((cfg.N_r, K, K), complex)
    g_r = np.zeros((cfg.N_r, K, Mr), complex)
    g_B = np.zeros((cfg.N_r, K, cfg.M_c), complex)
    for n in range(cfg.N_r):
        U, W = state.U_r[n], state.W_r[n]
        a = cfg.alpha_r[n]
        Xi[n] = a * herm(U) @ W @ U
        G = a * stats.Sigma_t[n] @ W @ U
        blocks = G.reshape(K, M, K)
        diag = blocks[np.arange(K), :, np.arange(K)]      # (K, M): G[kM:(k+1)M, k]
        g_r[n] = diag[:, :Mr]
        g_B[n] = diag[:, Mr:]
    return GradientCache(Phi_UL, Phi_d, Xi, g_r, g_B, UW_u, UW_d, _filter_token(state))


# --- radar cross-PRI helpers ---------------------------------------------------------------

def _radar_quad_grad(Xi: np.ndarray, Gamma: np.ndarray, V: np.ndarray, k: int, skip_self: bool = False) -> np.ndarray:
    """``sum_m Xi[k, m] Gamma[m, k]^T v[m]`` for per-lag blocks ``Gamma`` (K, K, d, d)."""
    out = np.einsum("m,med,me->d", Xi[k], Gamma[:, k], V)
    if skip_self:
        out = out - Xi[k, k] * (Gamma[k, k].T @ V[k])
    return out


def _radar_quad_grad_const(Xi: np.ndarray, Gamma: np.ndarray, V: np.ndarray, k: int,
                           skip_self: bool = False) -> np.ndarray:
    """Same as :func:`_radar_quad_grad` for a block constant over PRIs."""
    w = Xi[k].copy()
    if skip_self:
        w[k] = 0.0
    return Gamma.T @ (w @ V)


# --- gradients of the weighted-sum MSE -------------------------------------------------------

def grad_xi_pu(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState, symbols: SymbolSet,
               cache: GradientCache, i: int, k: int) -> np.ndarray:
    """d Xi / d P_u[i][k]^*: UL, DL and radar contributions."""
    cache.check(state)
    P = state.P_u[i][k]
    H = ch.H_iB[i]
    g = herm(H) @ cache.Phi_UL[k] @ H @ P - herm(H) @ herm(cache.UW_u[i][k])
    for j in range(cfg.J):
        Hij = ch.H_ij[i][j]
        g = g + herm(Hij) @ cache.Phi_d[j][k] @ Hij @ P
    x_u = ul_direct_symbols(cfg, state, symbols)[i]
    d = symbols.d_u[i][k, cfg.offset_u]
    v = sum(_radar_quad_grad_const(cache.Xi[n], stats.Sigma_iU[i][n], x_u, k) for n in range(cfg.N_r))
    return g + np.outer(v, np.conj(d))


def grad_xi_pd(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState, symbols: SymbolSet,
               cache: GradientCache, j: int, k: int) -> np.ndarray:
    """d Xi / d P_d[j][k]^*."""
    cache.check(state)
    P = state.P_d[j][k]
    g = herm(ch.H_BB) @ cache.Phi_UL[k] @ ch.H_BB @ P - herm(ch.H_Bj[j]) @ herm(cache.UW_d[j][k])
    for q in range(cfg.J):
        H = ch.H_Bj[q]
        g = g + herm(H) @ cache.Phi_d[q][k] @ H @ P
    s_bt = dl_target_symbols(state, symbols)
    x_bm = dl_direct_symbols(cfg, state, symbols)
    v_t = np.zeros(cfg.M_c, complex)
    v_m = np.zeros(cfg.M_c, complex)
    for n in range(cfg.N_r):
        v_t += -np.conj(cache.g_B[n, k]) + _radar_quad_grad(cache.Xi[n], stats.Sigma_Bt[n], s_bt, k)
        v_m += _radar_quad_grad_const(cache.Xi[n], stats.Sigma_Bm[n], x_bm, k)
    d0 = symbols.d_d[j][k, 0]
    dm = symbols.d_d[j][k, cfg.offset_Bm]
    return g + np.outer(v_t, np.conj(d0)) + np.outer(v_m, np.conj(dm))


def grad_xi_a(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState, symbols: SymbolSet,
              cache: GradientCache, k: int) -> np.ndarray:
    """d Xi / d a[k]^*."""
    cache.check(state)
    a = state.A[k]
    g = herm(ch.H_rB) @ cache.Phi_UL[k] @ ch.H_rB @ a
    for j in range(cfg.J):
        g = g + herm(ch.H_rj[j]) @ cache.Phi_d[j][k] @ ch.H_rj[j] @ a
    for n in range(cfg.N_r):
        g = g - np.conj(cache.g_r[n, k]) + _radar_quad_grad(cache.Xi[n], stats.Sigma_rt[n], state.A, k) \
            + _radar_quad_grad_const(cache.Xi[n], stats.Sigma_c[n], state.A, k)
    return g


# --- rate gradients ----------------------------------------------------------------------------

@dataclasses.dataclass
class RateGradients:
    """Gradients of every UL and DL rate of one frame w.r.t. one block."""

    ul: list[np.ndarray]   # [q] d R_u[q][k] / d X^*
    dl: list[np.ndarray]   # [g] d R_d[g][k] / d X^*


def _interferer_term(G: np.ndarray, R: np.ndarray, R_in: np.ndarray, X: np.ndarray) -> np.ndarray:
    return herm(G) @ (inv_herm(R) - inv_herm(R_in)) @ G @ X / LN2


def _own_term(G: np.ndarray, R: np.ndarray, X: np.ndarray) -> np.ndarray:
    return herm(G) @ inv_herm(R) @ G @ X / LN2


def rate_gradients_pu(cfg: SystemConfig, ch: ChannelSet, state: DesignState, i: int, k: int,
                      covs=None) -> RateGradients:
    """Gradients of ``R_u[q][k]`` and ``R_d[g][k]`` w.r.t. ``P_u[i][k]`` at the current state."""
    ul_sig, ul_in = covs[0] if covs else build_ul_covariance(cfg, ch, state, k)
    dl_sig, dl_in = covs[1] if covs else build_dl_covariance(cfg, ch, state, k)
    P = state.P_u[i][k]
    H = ch.H_iB[i]
    ul = [_own_term(H, ul_sig[q] + ul_in[q], P) if q == i else _interferer_term(H, ul_sig[q] + ul_in[q], ul_in[q], P)
          for q in range(cfg.I)]
    dl = [_interferer_term(ch.H_ij[i][g], dl_sig[g] + dl_in[g], dl_in[g], P) for g in range(cfg.J)]
    return RateGradients(ul, dl)


def rate_gradients_pd(cfg: SystemConfig, ch: ChannelSet, state: DesignState, j: int, k: int,
                      covs=None) -> RateGradients:
    """Gradients of ``R_u[q][k]`` and ``R_d[g][k]`` w.r.t. ``P_d[j][k]``."""
    ul_sig, ul_in = covs[0] if covs else build_ul_covariance(cfg, ch, state, k)
    dl_sig, dl_in = covs[1] if covs else build_dl_covariance(cfg, ch, state, k)
    P = state.P_d[j][k]
    ul = [_interferer_term(ch.H_BB, ul_sig[q] + ul_in[q], ul_in[q], P) for q in range(cfg.I)]
    dl = [_own_term(ch.H_Bj[g], dl_sig[g] + dl_in[g], P) if g == j
          else _interferer_term(ch.H_Bj[g], dl_sig[g] + dl_in[g], dl_in[g], P) for g in range(cfg.J)]
    return RateGradients(ul, dl)


def rate_gradients_a(cfg: SystemConfig, ch: ChannelSet, state: DesignState, k: int, covs=None) -> RateGradients:
    """Gradients of ``R_u[q][k]`` and ``R_d[g][k]`` w.r.t. ``a[k]`` (radar is interference everywhere)."""
    ul_sig, ul_in = covs[0] if covs else build_ul_covariance(cfg, ch, state, k)
    dl_sig, dl_in = covs[1] if covs else build_dl_covariance(cfg, ch, state, k)
    a = state.A[k][:, None]
    ul = [_interferer_term(ch.H_rB, ul_sig[q] + ul_in[q], ul_in[q], a)[:, 0] for q in range(cfg.I)]
    dl = [_interferer_term(ch.H_rj[g], dl_sig[g] + dl_in[g], dl_in[g], a)[:, 0] for g in range(cfg.J)]
    return RateGradients(ul, dl)


def weighted_rate_gradient(rg: RateGradients, mu_u: np.ndarray, mu_d: np.ndarray) -> np.ndarray:
    """``sum_q mu_u[q] grad R_u[q] + sum_g mu_d[g] grad R_d[g]``."""
    return sum(m * g for m, g in zip(mu_u, rg.ul)) + sum(m * g for m, g in zip(mu_d, rg.dl))


# --- Sylvester coefficients ----------------------------------------------------------------

@dataclasses.dataclass
class SylvesterSystem:
    """``A X + sum_t F_t X B_t = C`` where ``C = C0 + rate_term``.

    ``A0`` excludes the power dual; the solver adds ``lambda I``. ``rate_own`` is
    the gradient of the block's own constrained rate, scaled by the dual being
    iterated; ``rate_fixed`` collects the rate terms with frozen duals.
    """

    A0: np.ndarray
    F: list[np.ndarray]
    B: list[np.ndarray]
    C0: np.ndarray
    rate_fixed: np.ndarray
    rate_own: np.ndarray

    def rhs(self, mu_own: float) -> np.ndarray:
        return self.C0 + self.rate_fixed + mu_own * self.rate_own

    def residual(self, X: np.ndarray, lam: float, mu_own: float) -> float:
        """Relative residual of the Sylvester equation at ``X``."""
        lhs = (self.A0 + lam * np.eye(self.A0.shape[0])) @ X + sum(F @ X @ B for F, B in zip(self.F, self.B))
        C = self.rhs(mu_own)
        return float(np.linalg.norm(lhs - C) / max(np.linalg.norm(C), 1e-300))

    def quadratic(self, X: np.ndarray) -> float:
        """Weighted-sum MSE of the block up to a constant: ``Re tr(X^H(A0 X + sum F X B)) - 2 Re tr(C0^H X)``."""
        Y = self.A0 @ X + sum(F @ X @ B for F, B in zip(self.F, self.B))
        return float(np.real(np.vdot(X, Y)) - 2.0 * np.real(np.vdot(self.C0, X)))


def ul_system(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState, symbols: SymbolSet,
              cache: GradientCache, i: int, k: int, mu_u: np.ndarray, mu_d: np.ndarray,
              covs=None) -> SylvesterSystem:
    """Coefficients of the P_u[i][k] equation; ``mu_u[i]`` is treated as the iterated dual."""
    H = ch.H_iB[i]
    A0 = herm(H) @ cache.Phi_UL[k] @ H
    for g in range(cfg.J):
        A0 = A0 + herm(ch.H_ij[i][g]) @ cache.Phi_d[g][k] @ ch.H_ij[i][g]
    d = symbols.d_u[i][k, cfg.offset_u]
    x_u = ul_direct_symbols(cfg, state, symbols)[i]
    F = sum(cache.Xi[n, k, k] * stats.Sigma_iU[i][n].T for n in range(cfg.N_r))
    cross = sum(_radar_quad_grad_const(cache.Xi[n], stats.Sigma_iU[i][n], x_u, k, skip_self=True)
                for n in range(cfg.N_r))
    C0 = herm(H) @ herm(cache.UW_u[i][k]) - np.outer(cross, np.conj(d))
    rg = rate_gradients_pu(cfg, ch, state, i, k, covs)
    mu_fixed = np.array(mu_u, dtype=float).copy()
    mu_fixed[i] = 0.0
    return SylvesterSystem(hermitian(A0), [hermitian(F)], [np.outer(d, np.conj(d))], C0,
                           weighted_rate_gradient(rg, mu_fixed, mu_d), rg.ul[i])


def dl_system(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState, symbols: SymbolSet,
              cache: GradientCache, j: int, k: int, mu_u: np.ndarray, mu_d: np.ndarray,
              covs=None) -> SylvesterSystem:
    """Coefficients of the three-term P_d[j][k] equation; ``mu_d[j]`` is the iterated dual."""
    A0 = herm(ch.H_BB) @ cache.Phi_UL[k] @ ch.H_BB
    for g in range(cfg.J):
        A0 = A0 + herm(ch.H_Bj[g]) @ cache.Phi_d[g][k] @ ch.H_Bj[g]
    d0 = symbols.d_d[j][k, 0]
    dm = symbols.d_d[j][k, cfg.offset_Bm]
    s_bt = dl_target_symbols(state, symbols)
    x_bm = dl_direct_symbols(cfg, state, symbols)
    own_t = state.P_d[j][k] @ d0
    own_m = state.P_d[j][k] @ dm
    F_Bt = sum(cache.Xi[n, k, k] * stats.Sigma_Bt[n][k, k].T for n in range(cfg.N_r))
    F_Bm = sum(cache.Xi[n, k, k] * stats.Sigma_Bm[n].T for n in range(cfg.N_r))
    # the F X B terms reproduce the own contribution at PRI k; everything else moves to C
    v_t = np.zeros(cfg.M_c, complex)
    v_m = np.zeros(cfg.M_c, complex)
    for n in range(cfg.N_r):
        v_t += np.conj(cache.g_B[n, k]) - _radar_quad_grad(cache.Xi[n], stats.Sigma_Bt[n], s_bt, k)
        v_m -= _radar_quad_grad_const(cache.Xi[n], stats.Sigma_Bm[n], x_bm, k)
    v_t += F_Bt @ own_t
    v_m += F_Bm @ own_m
    C0 = herm(ch.H_Bj[j]) @ herm(cache.UW_d[j][k]) + np.outer(v_t, np.conj(d0)) + np.outer(v_m, np.conj(dm))
    rg = rate_gradients_pd(cfg, ch, state, j, k, covs)
    mu_fixed = np.array(mu_d, dtype=float).copy()
    mu_fixed[j] = 0.0
    return SylvesterSystem(hermitian(A0), [hermitian(F_Bt), hermitian(F_Bm)],
                           [np.outer(d0, np.conj(d0)), np.outer(dm, np.conj(dm))], C0,
                           weighted_rate_gradient(rg, mu_u, mu_fixed), rg.dl[j])


def radar_system(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, state: DesignState, symbols: SymbolSet,
                 cache: GradientCache, k: int, mu_u: np.ndarray, mu_d: np.ndarray, covs=None) -> SylvesterSystem:
    """Coefficients of ``(A_r + F_r) a[k] = c_r``; all rate duals are frozen here."""
    A0 = herm(ch.H_rB) @ cache.Phi_UL[k] @ ch.H_rB
    for g in range(cfg.J):
        A0 = A0 + herm(ch.H_rj[g]) @ cache.Phi_d[g][k] @ ch.H_rj[g]
    F = sum(cache.Xi[n, k, k] * (stats.Sigma_rt[n][k, k] + stats.Sigma_c[n]).T for n in range(cfg.N_r))
    c0 = np.zeros(cfg.M_r, complex)
    for n in range(cfg.N_r):
        c0 += np.conj(cache.g_r[n, k]) \
            - _radar_quad_grad(cache.Xi[n], stats.Sigma_rt[n], state.A, k, skip_self=True) \
            - _radar_quad_grad_const(cache.Xi[n], stats.Sigma_c[n], state.A, k, skip_self=True)
    rg = rate_gradients_a(cfg, ch, state, k, covs)
    return SylvesterSystem(hermitian(A0), [hermitian(F)], [np.eye(1)], c0[:, None],
                           weighted_rate_gradient(rg, mu_u, mu_d)[:, None], np.zeros((cfg.M_r, 1), complex))


def hermitian(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + herm(X))
