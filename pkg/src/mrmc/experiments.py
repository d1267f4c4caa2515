"""Monte Carlo sweeps over one scenario parameter, with baselines, CSV rows and JSON metadata."""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import math
import time
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .baselines import BASELINES, baseline_design
from .channels import ChannelSet, generate_channels, generate_symbols, perturb_csi
from .config import SystemConfig, db_to_linear, qos_from_snr
from .covariance import build_bundle, radar_stats
from .metrics import mmse_filters, snapshot
from .optimizer import OptimizerError, bcd_ap_mrmc, constraint_slacks, feasible, initialize

log = logging.getLogger(__name__)

SWEEP_VARS = ("snr_r", "cnr", "sigma2_si", "eta2_csi", "none")
CO_DESIGN = "co-design"
COLUMNS = ("sweep_var", "value", "design", "trial", "I_CWSM", "I_FD", "min_rate_slack", "iterations", "seconds")


def qos_thresholds(cfg: SystemConfig) -> tuple[float, float]:
    """``(R_UL, R_DL)`` implied by the scenario SNRs."""
    return qos_from_snr(cfg.snr_ul, cfg.snr_dl, cfg.snr_r, cfg.M_r, cfg.I, cfg.J)


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: grid values are in dB for ``snr_r``, ``cnr`` and ``sigma2_si``, linear for ``eta2_csi``."""

    sweep: str = "none"
    grid: tuple[float, ...] = (0.0,)
    trials: int = 1
    baselines: tuple[str, ...] = ()
    out: str | None = None
    overrides: dict[str, Any] = dataclasses.field(default_factory=dict)
    seed: int = 0
    init: str = "deterministic"
    ell_max: int | None = None
    include_co_design: bool = True
    timing: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "baselines", tuple(self.baselines))
        if self.sweep not in SWEEP_VARS:
            raise ValueError(f"sweep must be one of {SWEEP_VARS}, got {self.sweep!r}")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        unknown = set(self.baselines) - set(BASELINES)
        if unknown:
            raise ValueError(f"unknown baselines {sorted(unknown)}; choose from {BASELINES}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def designs(self) -> tuple[str, ...]:
        return ((CO_DESIGN,) if self.include_co_design else ()) + self.baselines


def point_config(base: SystemConfig, sweep: str, value: float) -> SystemConfig:
    """Scenario at one grid point; QoS thresholds follow the SNRs unless fixed in ``base``."""
    if sweep == "snr_r":
        return base.replace(P_r=[db_to_linear(value) * base.sigma2_r] * base.M_r)
    if sweep == "cnr":
        return base.replace(cnr=db_to_linear(value))
    if sweep == "sigma2_si":
        return base.replace(sigma2_SI=db_to_linear(value))
    if sweep == "eta2_csi":
        return base.replace(eta2_CSI=float(value))
    return base


def trial_seeds(master: int, trial: int) -> dict[str, int]:
    """Seeds of one trial; they depend only on ``(master, trial)``, so every grid point sees the same draws."""
    words = np.random.SeedSequence([int(master), int(trial)]).generate_state(4, dtype=np.uint32)
    return dict(zip(("channel", "symbols", "csi", "baseline"), (int(w) for w in words)))


@dataclasses.dataclass
class Row:
    sweep_var: str
    value: float
    design: str
    trial: int
    I_CWSM: float
    I_FD: float
    min_rate_slack: float
    iterations: int
    seconds: float
    failed: bool = False
    error: str = ""

    @property
    def key(self) -> tuple:
        return (self.value, self.trial, self.design)

    def csv_fields(self) -> list[str]:
        return [self.sweep_var, repr(float(self.value)), self.design, str(self.trial), _fmt(self.I_CWSM),
                _fmt(self.I_FD), _fmt(self.min_rate_slack), str(self.iterations), _fmt(self.seconds)]


def _fmt(x: float) -> str:
    return "nan" if not math.isfinite(x) else repr(float(x))


def _evaluate(cfg: SystemConfig, ch_true: ChannelSet, stats, symbols, state) -> tuple[float, float, float]:
    """Objective and QoS slack of a design on the true channels with MMSE receivers."""
    bundle = build_bundle(cfg, ch_true, stats, state, symbols)
    snap = snapshot(cfg, ch_true, state, bundle, filters=mmse_filters(cfg, ch_true, state, bundle))
    _, rate_slack, _ = constraint_slacks(cfg, state, snap.rates)
    return snap.I_CWSM, snap.I_FD, rate_slack


def run_trial(spec: ExperimentSpec, base: SystemConfig, value: float, trial: int) -> list[Row]:
    """All designs of one (grid point, trial); failures become rows flagged ``failed``."""
    cfg = point_config(base, spec.sweep, value)
    seeds = trial_seeds(spec.seed, trial)
    ch_true = generate_channels(cfg, seeds["channel"])
    ch_design = perturb_csi(ch_true, cfg.eta2_CSI, seeds["csi"]) if cfg.eta2_CSI > 0 else ch_true
    symbols = generate_symbols(cfg, seeds["symbols"])
    stats_design = radar_stats(cfg, ch_design)
    stats_true = radar_stats(cfg, ch_true) if ch_design is not ch_true else stats_design
    init_state = initialize(spec.init, cfg, ch_design, stats_design, symbols, seeds["baseline"])
    rows = []
    for design in spec.designs:
        start = time.perf_counter()
        try:
            if design == CO_DESIGN:
                state, frozen = init_state, ()
            else:
                state, frozen = baseline_design(design, cfg, ch_design, stats_design, symbols,
                                                seed=seeds["baseline"], init=init_state)
            result = bcd_ap_mrmc(cfg, ch_design, symbols, state=state, ell_max=spec.ell_max,
                                 freeze=frozen, stats=stats_design)
            if not feasible(cfg, result.state):
                raise OptimizerError("design violates its power or PAR constraints")
            I_cwsm, I_fd, slack = _evaluate(cfg, ch_true, stats_true, symbols, result.state)
            if not all(map(math.isfinite, (I_cwsm, I_fd, slack))):
                raise OptimizerError("non-finite objective")
            seconds = time.perf_counter() - start if spec.timing else math.nan
            rows.append(Row(spec.sweep, value, design, trial, I_cwsm, I_fd, slack,
                            result.report.iterations, seconds))
        except (OptimizerError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            log.warning("trial %d at %s=%g (%s) failed: %s", trial, spec.sweep, value, design, exc)
            rows.append(Row(spec.sweep, value, design, trial, math.nan, math.nan, math.nan, 0, math.nan,
                            failed=True, error=str(exc)))
    return rows


def _run_trial_args(args) -> list[Row]:
    return run_trial(*args)


@dataclasses.dataclass
class SweepResult:
    spec: ExperimentSpec
    config: SystemConfig
    rows: list[Row]
    started: str
    finished: str

    def values(self, design: str, value: float | None = None, column: str = "I_CWSM") -> np.ndarray:
        """Column values of the non-failed rows of one design (optionally one grid point)."""
        return np.array([getattr(r, column) for r in self.rows
                         if r.design == design and not r.failed and (value is None or r.value == value)])

    def summary(self, column: str = "I_CWSM") -> list[dict[str, Any]]:
        """Mean and standard error per (grid point, design)."""
        out = []
        for value in self.spec.grid:
            for design in self.spec.designs:
                x = self.values(design, value, column)
                se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
                out.append(dict(value=value, design=design, n=int(x.size),
                                mean=float(np.mean(x)) if x.size else math.nan, se=se,
                                failed=sum(1 for r in self.rows if r.design == design and r.value == value
                                           and r.failed)))
        return out

    def mean(self, design: str, value: float | None = None, column: str = "I_CWSM") -> float:
        x = self.values(design, value, column)
        return float(np.mean(x)) if x.size else math.nan

    def csv_text(self) -> str:
        lines = [",".join(COLUMNS)]
        lines.extend(",".join(r.csv_fields()) for r in self.rows)
        return "\n".join(lines) + "\n"

    def metadata(self) -> dict[str, Any]:
        spec = dataclasses.asdict(self.spec)
        spec["grid"] = list(self.spec.grid)
        spec["baselines"] = list(self.spec.baselines)
        return dict(
            config=self.config.to_dict(),
            spec=spec,
            input_hash=content_hash(self.config, self.spec),
            started=self.started,
            finished=self.finished,
            summary=self.summary(),
            failures=[dict(value=r.value, trial=r.trial, design=r.design, error=r.error)
                      for r in self.rows if r.failed],
        )

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write the CSV and the adjacent ``.json`` metadata file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.csv_text(), encoding="utf-8")
        meta = path.with_suffix(".json")
        meta.write_text(json.dumps(self.metadata(), indent=2, default=_json_default) + "\n", encoding="utf-8")
        return path, meta


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def content_hash(cfg: SystemConfig, spec: ExperimentSpec) -> str:
    """Git-style blob SHA-1 of the canonical JSON of the inputs."""
    payload = dict(config=cfg.to_dict(), sweep=spec.sweep, grid=list(spec.grid), trials=spec.trials,
                   designs=list(spec.designs), seed=spec.seed, init=spec.init, ell_max=spec.ell_max)
    body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_sweep(spec: ExperimentSpec, base: SystemConfig | None = None) -> SweepResult:
    """Run every (grid point, trial) and write the outputs when ``spec.out`` is set."""
    base = SystemConfig() if base is None else base
    if spec.overrides:
        base = base.replace(**spec.overrides)
    started = _now()
    jobs = [(spec, base, value, trial) for value in spec.grid for trial in range(spec.trials)]
    if spec.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=spec.workers) as pool:
            batches = list(pool.map(_run_trial_args, jobs))
    else:
        batches = [_run_trial_args(job) for job in jobs]
    order = {d: n for n, d in enumerate(spec.designs)}
    rows = sorted((r for batch in batches for r in batch),
                  key=lambda r: (spec.grid.index(r.value), r.trial, order[r.design]))
    result = SweepResult(spec, base, rows, started, _now())
    if spec.out:
        result.write(spec.out)
    return result


def parse_grid(text: str | Iterable[float]) -> tuple[float, ...]:
    """``"-5,0,5"`` or ``"-5 0 5"`` (an optional ``dB`` suffix per entry is ignored)."""
    if not isinstance(text, str):
        return tuple(float(v) for v in text)
    parts = [p.strip() for p in text.replace(",", " ").split()]
    out = []
    for p in parts:
        if p.lower().endswith("db"):
            p = p[:-2]
        out.append(float(p))
    return tuple(out)


def parse_names(text: str | Sequence[str]) -> tuple[str, ...]:
    if not isinstance(text, str):
        return tuple(text)
    return tuple(p.strip() for p in text.split(",") if p.strip())
