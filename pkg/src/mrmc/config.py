"""Scenario configuration for the radar / full-duplex MU-MIMO co-design.

All powers and variances are stored as linear quantities. Use
:func:`db_to_linear` (or the ``"<x>dB"`` string form accepted by
:func:`load_config`) to enter decibel values.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml


class ConfigError(ValueError):
    """Raised for an invalid combination of scenario parameters."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def parse_quantity(value: Any) -> Any:
    """Convert ``"10dB"``-style strings to linear floats; pass others through."""
    if isinstance(value, str):
        text = value.strip()
        if text.lower().endswith("db"):
            return db_to_linear(float(text[:-2]))
        return float(text)
    if isinstance(value, (list, tuple)):
        return [parse_quantity(v) for v in value]
    return value


def qos_from_snr(snr_ul: float, snr_dl: float, snr_r: float, M_r: int, I: int, J: int) -> tuple[float, float]:
    """Minimum UL/DL rates (bits/s/Hz) from the linear SNRs of the scenario."""
    r_ul = math.log2(1.0 + snr_ul / (M_r * snr_r + snr_dl + (I - 1) * snr_ul))
    r_dl = math.log2(1.0 + (snr_dl / J) / (M_r * snr_r + snr_dl * (J - 1) / J + I * snr_ul))
    return r_ul, r_dl


@dataclasses.dataclass
class SystemConfig:
    """Dimensions, powers, noise levels, weights and iteration caps."""

    # radar
    M_r: int = 4
    N_r: int = 4
    # base station
    M_c: int = 4
    N_c: int = 4
    # users
    I: int = 2
    J: int = 2
    N_u: tuple[int, ...] = (2, 2)
    D_u: tuple[int, ...] = (2, 2)
    N_d: tuple[int, ...] = (2, 2)
    D_d: tuple[int, ...] = (2, 2)
    # timing
    K: int = 8
    N: int = 32
    n_t: int = 4
    n_rB: int = 2
    n_rd: int = 3
    n_u: int | None = None     # defaults to n_rB
    n_Bm: int | None = None    # defaults to n_rd
    # powers (linear)
    P_B: float = 0.01
    P_U: float = 0.01
    P_r: tuple[float, ...] = (0.01, 0.01, 0.01, 0.01)
    gamma: tuple[float, ...] = (db_to_linear(3.0),) * 4
    # noise / interference levels
    sigma2_r: float = 1e-3
    sigma2_B: float = 1e-3
    sigma2_d: float = 1e-3
    cnr: float = 100.0
    sigma2_0: float | None = None   # clutter reference level; defaults to sigma2_r
    sigma2_SI: float = 1.0
    K_B: float = 1.0
    kappa: float = 1.0
    mu_rB: float = 0.1
    mu_rj: float = 0.05
    eta2_rB: float = 0.3
    eta2_rj: float = 0.5
    eta2_CSI: float = 0.0
    # radar second-order statistics
    sigma2_rt: float = 1.0
    sigma2_Bt: float = 1.0
    sigma2_Bm: float = 1.0
    sigma2_iU: float = 1.0
    target_corr: float = 0.9
    doppler_low: float = 0.05
    doppler_high: float = 0.325
    # objective weights; None -> uniform 1/(I+J+N_r)
    alpha_r: tuple[float, ...] | None = None
    alpha_u: tuple[float, ...] | None = None
    alpha_d: tuple[float, ...] | None = None
    # QoS thresholds (bits/s/Hz); None -> derived from the SNRs
    R_UL: float | None = None
    R_DL: float | None = None
    # iteration caps
    ell_max: int = 2000
    iota_max: int = 1
    t_u_max: int = 200
    t_d_max: int = 200
    rel_tol: float = 1e-6
    patience: int = 10
    fixed_budget: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("N_u", "D_u", "N_d", "D_d", "P_r", "gamma"):
            value = getattr(self, name)
            if np.isscalar(value):
                count = {"N_u": self.I, "D_u": self.I, "N_d": self.J, "D_d": self.J}.get(name, self.M_r)
                value = (value,) * count
            setattr(self, name, tuple(value))
        if self.n_u is None:
            self.n_u = self.n_rB
        if self.n_Bm is None:
            self.n_Bm = self.n_rd
        if self.sigma2_0 is None:
            self.sigma2_0 = self.sigma2_r
        uniform = 1.0 / (self.I + self.J + self.N_r)
        if self.alpha_r is None:
            self.alpha_r = (uniform,) * self.N_r
        if self.alpha_u is None:
            self.alpha_u = (uniform,) * self.I
        if self.alpha_d is None:
            self.alpha_d = (uniform,) * self.J
        self.alpha_r = tuple(float(a) for a in self.alpha_r)
        self.alpha_u = tuple(float(a) for a in self.alpha_u)
        self.alpha_d = tuple(float(a) for a in self.alpha_d)
        if self.R_UL is None or self.R_DL is None:
            r_ul, r_dl = qos_from_snr(self.snr_ul, self.snr_dl, self.snr_r, self.M_r, self.I, self.J)
            if self.R_UL is None:
                self.R_UL = r_ul
            if self.R_DL is None:
                self.R_DL = r_dl
        self.validate()

    # derived quantities
    @property
    def M(self) -> int:
        return self.M_r + self.M_c

    @property
    def KM(self) -> int:
        return self.K * self.M

    @property
    def sigma2_c(self) -> float:
        return self.cnr * self.sigma2_0

    @property
    def snr_r(self) -> float:
        return float(np.mean(self.P_r)) / self.sigma2_r

    @property
    def snr_ul(self) -> float:
        return self.P_U / self.sigma2_B

    @property
    def snr_dl(self) -> float:
        return self.P_B / self.sigma2_d

    @property
    def offset_u(self) -> int:
        """Symbol slot of the UL interference hitting the radar CUT."""
        return self.n_t - self.n_u

    @property
    def offset_Bm(self) -> int:
        """Symbol slot of the direct-path DL interference hitting the radar CUT."""
        return self.n_t - self.n_Bm

    def validate(self) -> None:
        dims = dict(M_r=self.M_r, N_r=self.N_r, M_c=self.M_c, N_c=self.N_c, I=self.I, J=self.J, K=self.K, N=self.N)
        for name, value in dims.items():
            if int(value) < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if len(self.N_u) != self.I or len(self.D_u) != self.I:
            raise ConfigError("N_u and D_u need one entry per UL user")
        if len(self.N_d) != self.J or len(self.D_d) != self.J:
            raise ConfigError("N_d and D_d need one entry per DL user")
        if len(self.P_r) != self.M_r or len(self.gamma) != self.M_r:
            raise ConfigError("P_r and gamma need one entry per radar Tx")
        if len(self.alpha_r) != self.N_r or len(self.alpha_u) != self.I or len(self.alpha_d) != self.J:
            raise ConfigError("weight vectors do not match N_r, I, J")
        if any(d < 1 or d > n for d, n in zip(self.D_u, self.N_u)):
            raise ConfigError("need 1 <= D_u[i] <= N_u[i]")
        if any(d < 1 or d > n for d, n in zip(self.D_d, self.N_d)):
            raise ConfigError("need 1 <= D_d[j] <= N_d[j]")
        if self.M_c < sum(self.D_d):
            raise ConfigError("M_c must be at least the total number of DL streams")
        if self.N_c < sum(self.N_u):
            raise ConfigError("N_c must be at least the total number of UL antennas")
        if any(g < 1.0 or g > self.K for g in self.gamma):
            raise ConfigError("PAR bounds must lie in [1, K]")
        for name in ("n_t", "n_rB", "n_rd"):
            if not 0 <= getattr(self, name) < self.N:
                raise ConfigError(f"{name} must lie in [0, N)")
        for name in ("offset_u", "offset_Bm"):
            if not 0 <= getattr(self, name) < self.N:
                raise ConfigError(f"symbol offset {name} must lie in [0, N)")
        positive = dict(P_B=self.P_B, P_U=self.P_U, sigma2_r=self.sigma2_r, sigma2_B=self.sigma2_B,
                        sigma2_d=self.sigma2_d)
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be > 0")
        if any(p <= 0 for p in self.P_r):
            raise ConfigError("radar powers must be > 0")
        if self.sigma2_SI < 0 or self.cnr < 0 or self.eta2_CSI < 0:
            raise ConfigError("variances must be nonnegative")
        if not 0.0 <= self.target_corr <= 1.0:
            raise ConfigError("target_corr must lie in [0, 1]")
        if min(self.alpha_r + self.alpha_u + self.alpha_d) < 0:
            raise ConfigError("weights must be nonnegative")

    def replace(self, **changes: Any) -> "SystemConfig":
        """Copy with changes; derived defaults (QoS, weights) are recomputed unless given."""
        data = self.to_dict()
        data.update(changes)
        for key in ("R_UL", "R_DL", "alpha_r", "alpha_u", "alpha_d"):
            if key not in changes and self._derived.get(key, False):
                data[key] = None
        dims_changed = any(k in changes for k in ("I", "J", "M_r", "N_r"))
        if dims_changed:
            data.update({k: v for k, v in _per_entity_defaults(data).items() if k not in changes})
        return SystemConfig(**data)

    @property
    def _derived(self) -> dict[str, bool]:
        uniform = 1.0 / (self.I + self.J + self.N_r)
        r_ul, r_dl = qos_from_snr(self.snr_ul, self.snr_dl, self.snr_r, self.M_r, self.I, self.J)
        return {
            "R_UL": math.isclose(self.R_UL, r_ul),
            "R_DL": math.isclose(self.R_DL, r_dl),
            "alpha_r": all(math.isclose(a, uniform) for a in self.alpha_r),
            "alpha_u": all(math.isclose(a, uniform) for a in self.alpha_u),
            "alpha_d": all(math.isclose(a, uniform) for a in self.alpha_d),
        }

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


def _per_entity_defaults(data: dict[str, Any]) -> dict[str, Any]:
    """Resize per-user / per-Tx vectors after a dimension change (keeps first entry)."""
    out = {}
    sizes = {"N_u": data["I"], "D_u": data["I"], "N_d": data["J"], "D_d": data["J"],
             "P_r": data["M_r"], "gamma": data["M_r"]}
    for key, n in sizes.items():
        value = data[key]
        first = value[0] if isinstance(value, (list, tuple)) else value
        out[key] = [first] * n
    return out


def scenario_defaults(
    snr_r_db: float = 10.0,
    snr_ul_db: float = 10.0,
    snr_dl_db: float = 10.0,
    cnr_db: float = 20.0,
    si_db: float = 0.0,
    gamma_db: float = 3.0,
    **overrides: Any,
) -> SystemConfig:
    """Scenario of the numerical study, parameterized by SNRs in dB."""
    noise = overrides.pop("sigma2", 1e-3)
    M_r = overrides.get("M_r", 4)
    base = dict(
        sigma2_r=noise, sigma2_B=noise, sigma2_d=noise,
        P_B=db_to_linear(snr_dl_db) * noise,
        P_U=db_to_linear(snr_ul_db) * noise,
        P_r=(db_to_linear(snr_r_db) * noise,) * M_r,
        gamma=(db_to_linear(gamma_db),) * M_r,
        cnr=db_to_linear(cnr_db),
        sigma2_SI=db_to_linear(si_db),
    )
    base.update(overrides)
    return SystemConfig(**base)


def reduced_config(**overrides: Any) -> SystemConfig:
    """Small scenario (2x2 radar, 2x2 BS, one UL and one DL user, K=4) for tests."""
    base = dict(M_r=2, N_r=2, M_c=2, N_c=2, I=1, J=1, N_u=(2,), D_u=(2,), N_d=(2,), D_d=(2,), K=4, N=8,
                n_t=4, n_rB=2, n_rd=3)
    base.update(overrides)
    snr = {k: base.pop(k) for k in ("snr_r_db", "snr_ul_db", "snr_dl_db", "cnr_db", "si_db", "gamma_db")
           if k in base}
    return scenario_defaults(**snr, **base)


def load_config(path: str | Path, **overrides: Any) -> SystemConfig:
    """Read a flat YAML mapping; values may be numbers, lists, or ``"<x>dB"`` strings.

    Besides every :class:`SystemConfig` field, the keys ``snr_r``, ``snr_ul``,
    ``snr_dl`` (set the corresponding powers from the noise levels) and
    ``gamma_db`` are accepted.
    """
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a flat key/value mapping")
    raw.update(overrides)
    return config_from_mapping(raw)


def config_from_mapping(raw: dict[str, Any]) -> SystemConfig:
    data = {k: parse_quantity(v) for k, v in raw.items()}
    snrs = {k: data.pop(k) for k in ("snr_r", "snr_ul", "snr_dl") if k in data}
    fields = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if any(k in data for k in ("I", "J", "M_r")):
        defaults = SystemConfig().to_dict()
        merged = {**defaults, **data}
        data.update({k: v for k, v in _per_entity_defaults(merged).items() if k not in data})
    cfg = SystemConfig(**data)
    if snrs:
        changes: dict[str, Any] = {}
        if "snr_r" in snrs:
            changes["P_r"] = [snrs["snr_r"] * cfg.sigma2_r] * cfg.M_r
        if "snr_ul" in snrs:
            changes["P_U"] = snrs["snr_ul"] * cfg.sigma2_B
        if "snr_dl" in snrs:
            changes["P_B"] = snrs["snr_dl"] * cfg.sigma2_d
        cfg = cfg.replace(**changes)
    return cfg


def dump_config(cfg: SystemConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def config_schema() -> str:
    """Human-readable list of config keys with their defaults."""
    cfg = SystemConfig()
    lines = []
    for f in dataclasses.fields(SystemConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = list(value)
        lines.append(f"{f.name}: {value}")
    return "\n".join(lines)


def uniform_tuple(value: float, n: int) -> Sequence[float]:
    return (float(value),) * n
