"""Block coordinate descent with alternating PAR projection (outer loop) and the
weighted-MMSE inner sweep over precoders and radar code."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from typing import Iterable

import numpy as np

from .channels import ChannelSet, SymbolSet
from .config import SystemConfig
from .covariance import RadarStats, build_bundle, build_dl_covariance, build_ul_covariance, radar_stats
from .gradients import build_cache, dl_system, radar_system, ul_system
from .linalg import crandn, herm, inv_herm, orthonormal_columns
from .metrics import cwsm, rates, refresh_filters, snapshot, weighted_sum_mse
from .par import code_feasible, project_code_matrix
from .state import DesignState, dl_power, radar_par, radar_power, ul_power
from .subgradient import solve_radar_code, subgradient_block

log = logging.getLogger(__name__)

BLOCKS = ("ul", "dl", "radar")
CODE_HALVINGS = 4
POWER_RTOL = 1e-12  # roundoff allowance before a frame counts as over budget


class OptimizerError(RuntimeError):
    """Raised when an inner solve fails; carries the last good state."""

    def __init__(self, message: str, state: DesignState | None = None):
        super().__init__(message)
        self.state = state


# --- initialization --------------------------------------------------------------------------

def _constant_modulus_code(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.K, cfg.M_r))
    amp = np.sqrt(np.asarray(cfg.P_r) / cfg.K)
    return amp[None, :] * np.exp(1j * phases)


def _svd_directions(H: np.ndarray, d: int) -> np.ndarray:
    _, _, Vh = np.linalg.svd(H)
    return herm(Vh)[:, :d]


def init_deterministic(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, symbols: SymbolSet,
                       seed: int = 0) -> DesignState:
    """Precoders along the dominant right singular vectors, equal power per stream.

    DL streams get ``P_B / (J D_d[j])`` each and UL streams ``P_U / D_u[i]``, the
    same for every frame. The radar code is constant-modulus with random
    phases drawn from ``seed`` at full power.
    """
    P_d = [np.repeat((_svd_directions(H, d) * math.sqrt(cfg.P_B / (cfg.J * d)))[None], cfg.K, axis=0)
           for H, d in zip(ch.H_Bj, cfg.D_d)]
    P_u = [np.repeat((_svd_directions(H, d) * math.sqrt(cfg.P_U / d))[None], cfg.K, axis=0)
           for H, d in zip(ch.H_iB, cfg.D_u)]
    A = _constant_modulus_code(cfg, np.random.default_rng(seed))
    return _finish_init(cfg, ch, stats, symbols, DesignState(P_u=P_u, P_d=P_d, A=A))


def init_random(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, symbols: SymbolSet,
                seed: int = 0) -> DesignState:
    """Orthonormalized complex Gaussian precoder directions with the deterministic power split."""
    rng = np.random.default_rng(seed)
    P_d = [np.stack([orthonormal_columns(crandn(rng, cfg.M_c, d), d) * math.sqrt(cfg.P_B / (cfg.J * d))
                     for _ in range(cfg.K)]) for d in cfg.D_d]
    P_u = [np.stack([orthonormal_columns(crandn(rng, n, d), d) * math.sqrt(cfg.P_U / d)
                     for _ in range(cfg.K)]) for n, d in zip(cfg.N_u, cfg.D_u)]
    A = _constant_modulus_code(cfg, rng)
    return _finish_init(cfg, ch, stats, symbols, DesignState(P_u=P_u, P_d=P_d, A=A))


def _finish_init(cfg, ch, stats, symbols, state: DesignState) -> DesignState:
    state.ensure_duals(cfg)
    refresh_filters(cfg, ch, state, build_bundle(cfg, ch, stats, state, symbols))
    return state


def initialize(kind: str, cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, symbols: SymbolSet,
               seed: int = 0) -> DesignState:
    if kind == "deterministic":
        return init_deterministic(cfg, ch, stats, symbols, seed)
    if kind == "random":
        return init_random(cfg, ch, stats, symbols, seed)
    raise ValueError(f"unknown initialization {kind!r}")


# --- inner WMMSE sweep ------------------------------------------------------------------------

@dataclasses.dataclass
class InnerReport:
    xi_trace: list[float]          # weighted-sum MSE after each block update (first entry: start)
    radar_fallbacks: int
    qos_capped: int
    infeasible_blocks: int


def _frame_covs(cfg, ch, state, k):
    return build_ul_covariance(cfg, ch, state, k), build_dl_covariance(cfg, ch, state, k)


def wmmse_mrmc(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, symbols: SymbolSet, state: DesignState,
               iota_max: int | None = None, freeze: Iterable[str] = (), exact_trace: bool = False) -> InnerReport:
    """One call of the inner algorithm with filters and weights fixed (updates ``state`` in place).

    For each frame the UL precoders (ascending ``i``), the DL precoders
    (ascending ``j``) and then ``a[k]`` are updated. ``state.A`` holds the
    unprojected code on return. ``exact_trace`` re-evaluates the full
    objective after every block instead of accumulating block differences.
    """
    freeze = set(freeze)
    if freeze - set(BLOCKS):
        raise ValueError(f"unknown blocks to freeze: {sorted(freeze - set(BLOCKS))}")
    iota_max = cfg.iota_max if iota_max is None else iota_max
    state.ensure_duals(cfg)
    cache = build_cache(cfg, stats, state)
    xi = weighted_sum_mse(cfg, ch, stats, state, symbols).total
    trace = [xi]
    fallbacks = capped = infeasible = 0

    def record(delta: float) -> None:
        nonlocal xi
        xi = weighted_sum_mse(cfg, ch, stats, state, symbols).total if exact_trace else xi + delta
        trace.append(xi)

    for _ in range(iota_max):
        for k in range(cfg.K):
            if "ul" not in freeze:
                for i in range(cfg.I):
                    covs = _frame_covs(cfg, ch, state, k)
                    system = ul_system(cfg, ch, stats, state, symbols, cache, i, k,
                                       state.mu_u[:, k], state.mu_d[:, k], covs)
                    H = ch.H_iB[i]
                    M_own = herm(H) @ inv_herm(covs[0][1][i]) @ H
                    res = subgradient_block(system, state.P_u[i][k], M_own, 0.0, cfg.P_U, cfg.R_UL, cfg.t_u_max)
                    state.P_u[i][k] = res.P
                    state.lambda_u[i, k], state.mu_u[i, k] = res.lam, res.mu
                    capped += res.qos_capped
                    infeasible += not res.power_feasible
                    record(res.xi_best - res.xi_start)
            if "dl" not in freeze:
                for j in range(cfg.J):
                    covs = _frame_covs(cfg, ch, state, k)
                    system = dl_system(cfg, ch, stats, state, symbols, cache, j, k,
                                       state.mu_u[:, k], state.mu_d[:, k], covs)
                    H = ch.H_Bj[j]
                    M_own = herm(H) @ inv_herm(covs[1][1][j]) @ H
                    other = sum(float(np.sum(np.abs(state.P_d[g][k]) ** 2)) for g in range(cfg.J) if g != j)
                    res = subgradient_block(system, state.P_d[j][k], M_own, other, cfg.P_B, cfg.R_DL, cfg.t_d_max)
                    state.P_d[j][k] = res.P
                    state.lambda_d[k], state.mu_d[j, k] = res.lam, res.mu
                    capped += res.qos_capped
                    infeasible += not res.power_feasible
                    record(res.xi_best - res.xi_start)
            if "radar" not in freeze:
                covs = _frame_covs(cfg, ch, state, k)
                system = radar_system(cfg, ch, stats, state, symbols, cache, k,
                                      state.mu_u[:, k], state.mu_d[:, k], covs)
                res = solve_radar_code(system, state.A[k])
                state.A[k] = res.a
                fallbacks += res.fallback
                record(res.xi_new - res.xi_old)
    return InnerReport(trace, fallbacks, capped, infeasible)


# --- feasibility repair ----------------------------------------------------------------------

def enforce_power(cfg: SystemConfig, state: DesignState) -> int:
    """Scale precoders down to their power budgets; returns how many frames were rescaled."""
    events = 0
    for i in range(cfg.I):
        power = ul_power(state, i)
        for k in np.nonzero(power > cfg.P_U * (1 + POWER_RTOL))[0]:
            state.P_u[i][k] *= math.sqrt(cfg.P_U / power[k])
            events += 1
    power = dl_power(state)
    for k in np.nonzero(power > cfg.P_B * (1 + POWER_RTOL))[0]:
        scale = math.sqrt(cfg.P_B / power[k])
        for P in state.P_d:
            P[k] *= scale
        events += 1
    if events:
        log.info("rescaled %d precoder frames to meet the power budgets", events)
    return events


def _cwsm_at_mmse(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, symbols: SymbolSet,
                  state: DesignState) -> float:
    r = rates(cfg, build_bundle(cfg, ch, stats, state, symbols))
    return float(cwsm(cfg, r.R_r, r.R_u, r.R_d))


def _accept_code(cfg: SystemConfig, ch: ChannelSet, stats: RadarStats, symbols: SymbolSet,
                 state: DesignState, A_prev: np.ndarray, reference: float, halvings: int = CODE_HALVINGS) -> int:
    """Project the inner code update, backtracking towards ``A_prev`` if the objective drops.

    Candidates are ``proj(A_prev + s (A' - A_prev))`` for ``s = 1, 1/2, ...``;
    the first one not below ``reference`` (or below the objective with the
    previous code, whichever is smaller) is kept, otherwise ``A_prev``.
    Returns the number of halvings taken.
    """
    A_raw = state.A
    state.A = A_prev
    floor = min(reference, _cwsm_at_mmse(cfg, ch, stats, symbols, state))
    tol = 1e-12 * max(1.0, abs(floor))
    step = 1.0
    for n in range(halvings + 1):
        state.A = project_code_matrix(A_prev + step * (A_raw - A_prev), cfg)
        if _cwsm_at_mmse(cfg, ch, stats, symbols, state) >= floor - tol:
            return n
        step *= 0.5
    state.A = A_prev
    return halvings + 1


# --- outer loop ---------------------------------------------------------------------------------

@dataclasses.dataclass
class RunReport:
    cwsm: list[float] = dataclasses.field(default_factory=list)
    fd: list[float] = dataclasses.field(default_factory=list)
    xi_wmmse: list[float] = dataclasses.field(default_factory=list)
    inner_traces: list[list[float]] = dataclasses.field(default_factory=list)
    max_power_slack: list[float] = dataclasses.field(default_factory=list)
    min_rate_slack: list[float] = dataclasses.field(default_factory=list)
    max_par_slack: list[float] = dataclasses.field(default_factory=list)
    seconds: list[float] = dataclasses.field(default_factory=list)
    rescale_events: int = 0
    code_backtracks: int = 0
    radar_fallbacks: int = 0
    qos_capped: int = 0
    termination: str = ""
    iterations: int = 0

    @property
    def qos_infeasible(self) -> bool:
        return bool(self.min_rate_slack) and self.min_rate_slack[-1] < 0


def constraint_slacks(cfg: SystemConfig, state: DesignState, rates) -> tuple[float, float, float]:
    """(max power slack, min QoS slack, max PAR slack); power/PAR slacks <= 0 when feasible."""
    power = [float(np.max(ul_power(state, i)) - cfg.P_U) for i in range(cfg.I)]
    power.append(float(np.max(dl_power(state)) - cfg.P_B))
    power.extend((radar_power(state) - np.asarray(cfg.P_r)).tolist())
    rate = min(float(np.min(rates.R_u)) - cfg.R_UL, float(np.min(rates.R_d)) - cfg.R_DL)
    par = float(np.max(radar_par(state) - np.asarray(cfg.gamma)))
    return max(power), rate, par


@dataclasses.dataclass
class RunResult:
    state: DesignState
    report: RunReport


def bcd_ap_mrmc(cfg: SystemConfig, ch: ChannelSet, symbols: SymbolSet, state: DesignState | None = None,
                ell_max: int | None = None, init: str = "deterministic", init_seed: int = 0,
                freeze: Iterable[str] = (), fixed_budget: bool | None = None,
                stats: RadarStats | None = None, exact_trace: bool = False) -> RunResult:
    """Outer loop: inner sweep, PAR projection, power repair, filter/weight refresh.

    ``ell_max = 0`` returns the initialization after one filter refresh.
    Unless ``fixed_budget`` is set, the loop stops once the relative change of
    the objective stays below ``cfg.rel_tol`` for ``cfg.patience`` iterations.
    """
    ell_max = cfg.ell_max if ell_max is None else ell_max
    fixed_budget = cfg.fixed_budget if fixed_budget is None else fixed_budget
    freeze = tuple(freeze)
    stats = radar_stats(cfg, ch) if stats is None else stats
    if state is None:
        state = initialize(init, cfg, ch, stats, symbols, init_seed)
    else:
        state = state.copy()
        state.ensure_duals(cfg)
    report = RunReport()
    start = time.perf_counter()

    def record(bundle) -> None:
        snap = snapshot(cfg, ch, state, bundle)
        p, r, q = constraint_slacks(cfg, state, snap.rates)
        report.cwsm.append(snap.I_CWSM)
        report.fd.append(snap.I_FD)
        report.max_power_slack.append(p)
        report.min_rate_slack.append(r)
        report.max_par_slack.append(q)
        report.seconds.append(time.perf_counter() - start)

    bundle = build_bundle(cfg, ch, stats, state, symbols)
    refresh_filters(cfg, ch, state, bundle)
    record(bundle)
    report.termination = "max_iterations"
    quiet = 0
    for ell in range(ell_max):
        good = state.copy()
        try:
            inner = wmmse_mrmc(cfg, ch, stats, symbols, state, freeze=freeze, exact_trace=exact_trace)
            report.rescale_events += enforce_power(cfg, state)
            if "radar" not in freeze:
                report.code_backtracks += _accept_code(cfg, ch, stats, symbols, state, good.A, report.cwsm[-1])
            bundle = build_bundle(cfg, ch, stats, state, symbols)
            refresh_filters(cfg, ch, state, bundle)
            record(bundle)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            log.error("outer iteration %d failed: %s", ell, exc)
            state = good
            report.termination = f"solver_failure: {exc}"
            break
        if not np.isfinite(report.cwsm[-1]) or not np.all(np.isfinite(inner.xi_trace)):
            for seq in (report.cwsm, report.fd, report.max_power_slack, report.min_rate_slack,
                        report.max_par_slack, report.seconds):
                seq.pop()
            state = good
            report.termination = "non_finite"
            break
        report.inner_traces.append(inner.xi_trace)
        report.xi_wmmse.append(inner.xi_trace[-1])
        report.radar_fallbacks += inner.radar_fallbacks
        report.qos_capped += inner.qos_capped
        report.iterations = ell + 1
        prev, cur = report.cwsm[-2], report.cwsm[-1]
        change = abs(cur - prev) / max(abs(cur), 1e-12)
        quiet = quiet + 1 if change < cfg.rel_tol else 0
        if not fixed_budget and quiet >= cfg.patience:
            report.termination = "converged"
            break
    return RunResult(state, report)


def feasible(cfg: SystemConfig, state: DesignState, rtol: float = 1e-9) -> bool:
    """Power budgets and radar code energy / PAR constraints."""
    ok = all(np.all(ul_power(state, i) <= cfg.P_U * (1 + rtol)) for i in range(cfg.I))
    ok = ok and bool(np.all(dl_power(state) <= cfg.P_B * (1 + rtol)))
    return ok and code_feasible(state.A, cfg, rtol=max(rtol, 1e-9))
