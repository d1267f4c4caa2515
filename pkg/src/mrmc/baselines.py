"""Reference designs. Each fixes one side of the system; the other side is optimized."""

from __future__ import annotations

import math

import numpy as np

from .channels import ChannelSet, SymbolSet
from .config import SystemConfig
from .covariance import RadarStats, build_bundle
from .linalg import crandn, orthonormal_columns
from .metrics import refresh_filters
from .par import project_code_matrix
from .state import DesignState

BASELINES = ("uniform-precoding", "random-precoding", "random-radar-code", "uncoded-radar")

# blocks kept fixed by each baseline during optimization
FROZEN = {
    "uniform-precoding": ("ul",),
    "random-precoding": ("ul", "dl"),
    "random-radar-code": ("radar",),
    "uncoded-radar": ("radar",),
}


def uniform_precoders(cfg: SystemConfig) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Scaled identity blocks; DL users occupy consecutive BS antenna groups (wrapping)."""
    P_u = [np.repeat((np.eye(n, d) * math.sqrt(cfg.P_U / d))[None], cfg.K, axis=0)
           for n, d in zip(cfg.N_u, cfg.D_u)]
    P_d = []
    offset = 0
    for d in cfg.D_d:
        cols = [(offset + c) % cfg.M_c for c in range(d)]
        block = np.eye(cfg.M_c)[:, cols] * math.sqrt(cfg.P_B / (cfg.J * d))
        P_d.append(np.repeat(block[None], cfg.K, axis=0).astype(complex))
        offset += d
    return [p.astype(complex) for p in P_u], P_d


def random_precoders(cfg: SystemConfig, rng: np.random.Generator) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Random orthonormal columns at full power, drawn independently per frame."""
    P_u = [np.stack([orthonormal_columns(crandn(rng, n, d), d) * math.sqrt(cfg.P_U / d) for _ in range(cfg.K)])
           for n, d in zip(cfg.N_u, cfg.D_u)]
    P_d = [np.stack([orthonormal_columns(crandn(rng, cfg.M_c, d), d) * math.sqrt(cfg.P_B / (cfg.J * d))
                     for _ in range(cfg.K)]) for d in cfg.D_d]
    return P_u, P_d


def uncoded_code(cfg: SystemConfig) -> np.ndarray:
    """All-ones columns scaled to the per-Tx radar power."""
    return np.ones((cfg.K, cfg.M_r), complex) * np.sqrt(np.asarray(cfg.P_r) / cfg.K)[None, :]


def random_code(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Gaussian code, scaled per column and projected onto the PAR set."""
    return project_code_matrix(crandn(rng, cfg.K, cfg.M_r), cfg)


def constant_modulus_code(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.K, cfg.M_r))
    return np.sqrt(np.asarray(cfg.P_r) / cfg.K)[None, :] * np.exp(1j * phases)


def baseline_design(kind: str, cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, symbols: SymbolSet,
                    seed: int = 0, init: DesignState | None = None) -> tuple[DesignState, tuple[str, ...]]:
    """Starting state of a baseline and the blocks it keeps fixed.

    Free blocks start from ``init`` when given (normally the co-design's
    initialization), otherwise from a constant-modulus code / uniform precoders.
    """
    if kind not in FROZEN:
        raise ValueError(f"unknown baseline {kind!r}; choose from {BASELINES}")
    rng = np.random.default_rng(seed)
    if init is not None:
        P_u = [p.copy() for p in init.P_u]
        P_d = [p.copy() for p in init.P_d]
        A = init.A.copy()
    else:
        P_u, P_d = uniform_precoders(cfg)
        A = constant_modulus_code(cfg, rng)
    if kind == "uniform-precoding":
        P_u = uniform_precoders(cfg)[0]
    elif kind == "random-precoding":
        P_u, P_d = random_precoders(cfg, rng)
    elif kind == "random-radar-code":
        A = random_code(cfg, rng)
    elif kind == "uncoded-radar":
        A = uncoded_code(cfg)
    state = DesignState(P_u=P_u, P_d=P_d, A=A)
    state.ensure_duals(cfg)
    refresh_filters(cfg, ch, state, build_bundle(cfg, ch, stats, state, symbols))
    return state, FROZEN[kind]
