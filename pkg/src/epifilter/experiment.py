"""Full filter runs: initialization, free run, daily assimilation cycle, sweeps."""

from __future__ import annotations

import datetime as dt
import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .assimilation import (
    ErrorModel,
    Summary,
    effective_particles,
    resample,
    should_resample,
    update_weights,
    weighted_summary,
)
from .distributions import RngStream
from .epimodel import Ensemble, FixedParams, check_invariants, compute_rt, step_ensemble
from .observations import DEFAULT_SIM_START, ObservationSeries

log = logging.getLogger(__name__)

QUANTITIES = ("rt", "r", "h", "r_cum", "d_cum", "asym", "p_hd", "mean_t_h")
SWEEP_AXES = ("k", "p_as", "n_particles", "master_seed")


class Purpose(enum.IntEnum):
    INIT = 1
    STEP = 2
    RESAMPLE = 3
    TRUTH = 4


class ConfigError(ValueError):
    pass


class AlignmentError(ValueError):
    """Observation series does not line up with the simulation calendar."""


class SweepError(RuntimeError):
    def __init__(self, axis: str, value, cause: BaseException):
        self.axis, self.value = axis, value
        super().__init__(f"sweep {axis}={value}: {cause}")


@dataclass(frozen=True)
class ExperimentConfig:
    n_particles: int = 100_000
    master_seed: int = 0
    free_run_days: int = 49
    resample_fraction: float = 0.1
    forced_resample_days: int = 15
    fixed: FixedParams = field(default_factory=FixedParams)
    error: ErrorModel = field(default_factory=ErrorModel)
    init_infected_range: tuple[int, int] = (3, 7)
    init_r_range: tuple[float, float] = (0.0, 1.0)
    init_mean_t_h: float = 15.0
    init_p_hd_range: tuple[float, float] = (0.0, 0.05)
    ci_levels: tuple[float, ...] = (0.68, 0.90)
    sim_start_date: dt.date = DEFAULT_SIM_START
    check_invariants: bool = True

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigError("n_particles must be at least 1")
        if not 0 < self.resample_fraction < 1:
            raise ConfigError("resample_fraction must lie in (0, 1)")
        if self.free_run_days < 0 or self.forced_resample_days < 1:
            raise ConfigError("free_run_days must be >= 0 and forced_resample_days >= 1")
        lo, hi = self.init_infected_range
        if not 0 <= lo <= hi:
            raise ConfigError("init_infected_range must be an ordered nonnegative interval")
        walk = self.fixed.walk
        for name, (lo, hi), (blo, bhi) in (
            ("init_r_range", self.init_r_range, walk.r_bounds),
            ("init_p_hd_range", self.init_p_hd_range, walk.p_hd_bounds),
            ("init_mean_t_h", (self.init_mean_t_h, self.init_mean_t_h), walk.t_h_bounds),
        ):
            if not blo <= lo <= hi <= bhi:
                raise ConfigError(f"{name} must be ordered and inside [{blo}, {bhi}]")
        if self.fixed.k * walk.r_bounds[1] > 1:
            raise ConfigError("k * max r_t must not exceed 1")
        if any(not 0 < c < 1 for c in self.ci_levels):
            raise ConfigError("ci_levels must lie in (0, 1)")


@dataclass(frozen=True)
class DailySummary:
    day_index: int
    phase: str  # "free", "forecast" or "analysis"
    quantities: dict[str, Summary]
    n_eff: float
    resampled: bool = False


def init_particles(config: ExperimentConfig) -> Ensemble:
    """Initial ensemble: a few infected agents in E, random r_0 and p_hd."""
    n = config.n_particles
    fixed = config.fixed
    gen = RngStream(config.master_seed).spawn(Purpose.INIT).generator
    lo, hi = config.init_infected_range
    ens = Ensemble.empty(n, fixed)
    seeds = gen.integers(lo, hi, size=n, endpoint=True)
    ens.e_queue[:, fixed.t_e - 1] = seeds
    ens.seeded[:] = seeds
    ens.r_t[:] = gen.uniform(*config.init_r_range, size=n)
    ens.mean_t_h[:] = config.init_mean_t_h
    ens.p_hd[:] = gen.uniform(*config.init_p_hd_range, size=n)
    return ens


def summarize(ens: Ensemble, w: np.ndarray, config: ExperimentConfig, day: int, phase: str,
              resampled: bool = False) -> DailySummary:
    values = {
        "rt": compute_rt(ens.r_t, config.fixed),
        "r": ens.r_t,
        "h": ens.h_stock,
        "r_cum": ens.r_cum,
        "d_cum": ens.d_cum,
        "asym": ens.asymptomatic,
        "p_hd": ens.p_hd,
        "mean_t_h": ens.mean_t_h,
    }
    quantities = {name: weighted_summary(values[name], w, config.ci_levels) for name in QUANTITIES}
    return DailySummary(day, phase, quantities, effective_particles(w), resampled)


def _check_alignment(config: ExperimentConfig, obs: ObservationSeries) -> None:
    if not obs.records:
        return
    if obs.first_day != config.free_run_days:
        raise AlignmentError(
            f"first observation is day {obs.first_day}, but free_run_days = {config.free_run_days}")
    if obs.start_date != config.sim_start_date:
        raise AlignmentError(
            f"observations are indexed from {obs.start_date}, simulation starts {config.sim_start_date}")
    days = np.array([rec.day_index for rec in obs.records])
    if np.any(np.diff(days) != 1):
        raise AlignmentError("observation days are not consecutive")


def run(config: ExperimentConfig, obs: ObservationSeries, threads: int = 1,
        on_day: Callable[[DailySummary], None] | None = None) -> list[DailySummary]:
    """Run one experiment and return the chronological daily summaries.

    Days before the first observation evolve freely (phase ``free``).  From
    the first observed day on, each day emits a ``forecast`` summary (new
    states, previous weights) and an ``analysis`` summary (updated weights),
    then resamples when N_eff drops below ``resample_fraction * N`` or the
    last resampling is ``forced_resample_days`` old.
    """
    _check_alignment(config, obs)
    fixed = config.fixed
    root = RngStream(config.master_seed)
    ens = init_particles(config)
    n = len(ens)
    w = np.full(n, 1.0 / n)
    out: list[DailySummary] = []

    def emit(s: DailySummary):
        out.append(s)
        if on_day is not None:
            on_day(s)

    def step(day: int):
        step_ensemble(root.spawn(Purpose.STEP, day), ens, day, fixed, threads=threads)
        if config.check_invariants:
            check_invariants(ens, fixed, day)

    for day in range(config.free_run_days):
        step(day)
        emit(summarize(ens, w, config, day, "free"))

    last_resample = obs.first_day
    prev_h = obs.records[0].h_stock if obs.records else 0
    for rec in obs.records:
        day = rec.day_index
        step(day)
        emit(summarize(ens, w, config, day, "forecast"))
        w = update_weights(w, ens, rec, prev_h, config.error)
        n_eff = effective_particles(w)
        do_resample = should_resample(n_eff, n, day - last_resample,
                                      config.resample_fraction, config.forced_resample_days)
        emit(summarize(ens, w, config, day, "analysis", resampled=do_resample))
        if do_resample:
            ens, w = resample(root.spawn(Purpose.RESAMPLE, day), ens, w)
            last_resample = day
            log.debug("day %d: resampled (n_eff %.1f)", day, n_eff)
        prev_h = rec.h_stock
    return out


def forecast_analysis_divergence(summaries: Iterable[DailySummary], quantity: str = "h") -> list[tuple[int, float]]:
    """Relative difference of forecast and analysis means, per assimilated day."""
    forecast: dict[int, float] = {}
    result = []
    for s in summaries:
        if s.phase == "forecast":
            forecast[s.day_index] = s.quantities[quantity].mean
        elif s.phase == "analysis" and s.day_index in forecast:
            a = s.quantities[quantity].mean
            if a != 0:
                result.append((s.day_index, (forecast[s.day_index] - a) / a))
    return result


def with_axis(base: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "k":
        return replace(base, fixed=replace(base.fixed, k=float(value)))
    if axis == "p_as":
        return replace(base, fixed=replace(base.fixed, p_as=float(value)))
    if axis == "n_particles":
        return replace(base, n_particles=int(value))
    if axis == "master_seed":
        return replace(base, master_seed=int(value))
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")


def run_sweep(base: ExperimentConfig, axis: str, values, obs: ObservationSeries,
              threads: int = 1) -> dict:
    """One independent run per value of ``axis``; all else held fixed.

    Every configuration is built before the first run starts, so a bad value
    fails fast.  Errors are re-raised as :class:`SweepError` naming the value.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    configs = {}
    for value in values:
        try:
            configs[value] = with_axis(base, axis, value)
        except ValueError as exc:
            raise SweepError(axis, value, exc if isinstance(exc, ConfigError) else ConfigError(str(exc))) from exc
    results = {}
    for value, cfg in configs.items():
        try:
            results[value] = run(cfg, obs, threads=threads)
        except Exception as exc:
            raise SweepError(axis, value, exc) from exc
    return results
