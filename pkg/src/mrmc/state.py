"""The optimization state: precoders, radar code, receive filters, weights, duals."""

from __future__ import annotations

import dataclasses

import numpy as np

from .config import SystemConfig


@dataclasses.dataclass
class DesignState:
    """Design variables. Frame index ``k`` is always the leading array axis.

    ``P_u[i]``: (K, N_u[i], D_u[i]); ``P_d[j]``: (K, M_c, D_d[j]); ``A``: (K, M_r)
    with row ``k`` equal to ``a[k]``. Filters: ``U_u[i]`` (K, D_u[i], N_c),
    ``U_d[j]`` (K, D_d[j], N_d[j]), ``U_r[n]`` (K*M, K). Weights ``W_*`` share the
    filter layout. Duals: ``lambda_u``/``mu_u`` (I, K), ``lambda_d`` (K,), ``mu_d`` (J, K).
    """

    P_u: list[np.ndarray]
    P_d: list[np.ndarray]
    A: np.ndarray
    U_u: list[np.ndarray] | None = None
    U_d: list[np.ndarray] | None = None
    U_r: list[np.ndarray] | None = None
    W_u: list[np.ndarray] | None = None
    W_d: list[np.ndarray] | None = None
    W_r: list[np.ndarray] | None = None
    lambda_u: np.ndarray | None = None
    lambda_d: np.ndarray | None = None
    mu_u: np.ndarray | None = None
    mu_d: np.ndarray | None = None

    def copy(self) -> "DesignState":
        def cp(v):
            if v is None:
                return None
            if isinstance(v, list):
                return [x.copy() for x in v]
            return v.copy()

        return DesignState(**{f.name: cp(getattr(self, f.name)) for f in dataclasses.fields(self)})

    def ensure_duals(self, cfg: SystemConfig, value: float = 1.0) -> None:
        if self.lambda_u is None:
            self.lambda_u = np.full((cfg.I, cfg.K), value)
        if self.lambda_d is None:
            self.lambda_d = np.full(cfg.K, value)
        if self.mu_u is None:
            self.mu_u = np.full((cfg.I, cfg.K), value)
        if self.mu_d is None:
            self.mu_d = np.full((cfg.J, cfg.K), value)

    def has_filters(self) -> bool:
        return self.U_u is not None and self.W_u is not None


def zero_state(cfg: SystemConfig) -> DesignState:
    return DesignState(
        P_u=[np.zeros((cfg.K, n, d), complex) for n, d in zip(cfg.N_u, cfg.D_u)],
        P_d=[np.zeros((cfg.K, cfg.M_c, d), complex) for d in cfg.D_d],
        A=np.zeros((cfg.K, cfg.M_r), complex),
    )


def ul_power(state: DesignState, i: int) -> np.ndarray:
    """Transmit power of UL user ``i`` per frame, shape (K,)."""
    return np.sum(np.abs(state.P_u[i]) ** 2, axis=(1, 2))


def dl_power(state: DesignState) -> np.ndarray:
    """Total BS transmit power per frame, shape (K,)."""
    return sum(np.sum(np.abs(P) ** 2, axis=(1, 2)) for P in state.P_d)


def radar_power(state: DesignState) -> np.ndarray:
    """Energy of each radar code column, shape (M_r,)."""
    return np.sum(np.abs(state.A) ** 2, axis=0)


def radar_par(state: DesignState) -> np.ndarray:
    """PAR of each radar code column, shape (M_r,)."""
    power = radar_power(state)
    K = state.A.shape[0]
    peak = np.max(np.abs(state.A) ** 2, axis=0)
    return np.where(power > 0, K * peak / np.where(power > 0, power, 1.0), 0.0)
