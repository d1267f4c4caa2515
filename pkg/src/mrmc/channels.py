"""Random channel, symbol and CSI-error generation."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .config import SystemConfig
from .linalg import crandn


@dataclasses.dataclass
class ChannelSet:
    """Propagation channels plus the radar-side second-order statistics.

    Communications matrices are realizations. Radar paths carry both a
    realization (used for Monte Carlo checks) and the variances / Dopplers
    that the optimizer actually consumes.
    """

    H_iB: list[np.ndarray]            # [i] (N_c, N_u[i])
    H_Bj: list[np.ndarray]            # [j] (N_d[j], M_c)
    H_ij: list[list[np.ndarray]]      # [i][j] (N_d[j], N_u[i])
    H_BB: np.ndarray                  # (N_c, M_c)
    H_rB: np.ndarray                  # (N_c, M_r)
    H_rj: list[np.ndarray]            # [j] (N_d[j], M_r)
    alpha_rt: np.ndarray              # (M_r, N_r) target gains
    f_rt: np.ndarray                  # (M_r, N_r) normalized Dopplers
    alpha_Bt: np.ndarray              # (N_r, M_c)
    f_Bt: np.ndarray                  # (N_r,)
    h_c: np.ndarray                   # (N_r, M_r) clutter gains
    alpha_Bm: np.ndarray              # (N_r, M_c) BS -> radar Rx direct path
    alpha_iU: list[np.ndarray]        # [i] (N_r, N_u[i]) UL UE -> radar Rx direct path
    sigma2_rt: np.ndarray             # (M_r, N_r)
    sigma2_Bt: np.ndarray             # (N_r,)
    sigma2_c: float
    sigma2_Bm: float
    sigma2_iU: float
    target_corr: float

    def comms_fields(self) -> tuple[str, ...]:
        return ("H_iB", "H_Bj", "H_ij", "H_BB", "H_rB", "H_rj")

    def copy(self) -> "ChannelSet":
        return dataclasses.replace(self, **{f.name: _deepcopy(getattr(self, f.name))
                                            for f in dataclasses.fields(self)})


def _deepcopy(value):
    if isinstance(value, np.ndarray):
        return value.copy()
    if isinstance(value, list):
        return [_deepcopy(v) for v in value]
    return value


def _rician(rng: np.random.Generator, mean: float, var: float, shape: tuple[int, ...]) -> np.ndarray:
    return mean * np.ones(shape, dtype=complex) + math.sqrt(var) * crandn(rng, *shape)


def generate_channels(cfg: SystemConfig, seed: int) -> ChannelSet:
    """Draw every channel of the scenario; a pure function of ``(cfg, seed)``."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    H_iB = [crandn(rng, cfg.N_c, n) for n in cfg.N_u]
    H_Bj = [crandn(rng, n, cfg.M_c) for n in cfg.N_d]
    H_ij = [[crandn(rng, nd, nu) for nd in cfg.N_d] for nu in cfg.N_u]
    kb = cfg.K_B
    H_BB = _rician(rng, math.sqrt(cfg.sigma2_SI * kb / (1 + kb)), cfg.sigma2_SI / (1 + kb), (cfg.N_c, cfg.M_c))
    los = math.sqrt(1.0 / (cfg.kappa + 1.0))
    H_rB = _rician(rng, los * cfg.mu_rB, cfg.eta2_rB / (cfg.kappa + 1), (cfg.N_c, cfg.M_r))
    H_rj = [_rician(rng, los * cfg.mu_rj, cfg.eta2_rj / (cfg.kappa + 1), (n, cfg.M_r)) for n in cfg.N_d]

    sigma2_rt = np.full((cfg.M_r, cfg.N_r), cfg.sigma2_rt)
    sigma2_Bt = np.full(cfg.N_r, cfg.sigma2_Bt)
    alpha_rt = np.sqrt(sigma2_rt) * crandn(rng, cfg.M_r, cfg.N_r)
    alpha_Bt = np.sqrt(sigma2_Bt)[:, None] * crandn(rng, cfg.N_r, cfg.M_c)
    f_rt = rng.uniform(cfg.doppler_low, cfg.doppler_high, size=(cfg.M_r, cfg.N_r))
    f_Bt = rng.uniform(cfg.doppler_low, cfg.doppler_high, size=cfg.N_r)
    h_c = math.sqrt(cfg.sigma2_c) * crandn(rng, cfg.N_r, cfg.M_r)
    alpha_Bm = math.sqrt(cfg.sigma2_Bm) * crandn(rng, cfg.N_r, cfg.M_c)
    alpha_iU = [math.sqrt(cfg.sigma2_iU) * crandn(rng, cfg.N_r, n) for n in cfg.N_u]
    return ChannelSet(
        H_iB=H_iB, H_Bj=H_Bj, H_ij=H_ij, H_BB=H_BB, H_rB=H_rB, H_rj=H_rj,
        alpha_rt=alpha_rt, f_rt=f_rt, alpha_Bt=alpha_Bt, f_Bt=f_Bt, h_c=h_c,
        alpha_Bm=alpha_Bm, alpha_iU=alpha_iU,
        sigma2_rt=sigma2_rt, sigma2_Bt=sigma2_Bt, sigma2_c=cfg.sigma2_c,
        sigma2_Bm=cfg.sigma2_Bm, sigma2_iU=cfg.sigma2_iU, target_corr=cfg.target_corr,
    )


def perturb_csi(ch: ChannelSet, eta2: float, seed: int) -> ChannelSet:
    """Channel estimate ``H + Delta`` with ``Delta ~ CN(0, eta2 I)`` on every comms matrix.

    Radar statistics (variances, Dopplers) are treated as known priors and copied.
    """
    if eta2 < 0:
        raise ValueError("eta2 must be nonnegative")
    out = ch.copy()
    if eta2 == 0:
        return out
    rng = np.random.default_rng(seed)
    s = math.sqrt(eta2)

    def noisy(H: np.ndarray) -> np.ndarray:
        return H + s * crandn(rng, *H.shape)

    out.H_iB = [noisy(H) for H in ch.H_iB]
    out.H_Bj = [noisy(H) for H in ch.H_Bj]
    out.H_ij = [[noisy(H) for H in row] for row in ch.H_ij]
    out.H_BB = noisy(ch.H_BB)
    out.H_rB = noisy(ch.H_rB)
    out.H_rj = [noisy(H) for H in ch.H_rj]
    return out


@dataclasses.dataclass
class SymbolSet:
    """Unit-energy QPSK symbols, ``d_u[i]`` of shape (K, N, D_u[i]) and ``d_d[j]`` of (K, N, D_d[j])."""

    d_u: list[np.ndarray]
    d_d: list[np.ndarray]


_QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2.0)


def qpsk(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return _QPSK[rng.integers(0, 4, size=shape)]


def generate_symbols(cfg: SystemConfig, seed: int) -> SymbolSet:
    """Draw QPSK symbols for every frame and slot; a pure function of ``(cfg, seed)``."""
    rng = np.random.default_rng(seed)
    d_u = [qpsk(rng, (cfg.K, cfg.N, d)) for d in cfg.D_u]
    d_d = [qpsk(rng, (cfg.K, cfg.N, d)) for d in cfg.D_d]
    return SymbolSet(d_u=d_u, d_d=d_d)
