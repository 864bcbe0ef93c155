"""Flat ``key = value`` configuration files with dotted keys.

Example::

    # exp.cfg
    experiment.n_particles = 50000
    experiment.master_seed = 7
    model.k = 0.58
    model.t_as = 2:0.3, 3:0.6, 4:0.05, 5:0.05
    error.sigma_r = 2000

Blank lines and ``#`` comments are ignored.  Every key can be overridden
with ``--set key=value`` on the command line.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

from .assimilation import ErrorModel
from .distributions import DiscreteDistribution, DistributionError
from .epimodel import FixedParams, ModelError, ParamWalk
from .experiment import ConfigError, ExperimentConfig


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _dist(text: str) -> DiscreteDistribution:
    table = {}
    for item in text.split(","):
        if not item.strip():
            continue
        value, _, prob = item.partition(":")
        table[int(value)] = float(prob)
    return DiscreteDistribution.from_mapping(table)


def _fmt_dist(d: DiscreteDistribution) -> str:
    return ", ".join(f"{v}:{p:g}" for v, p in zip(d.values, d.probabilities))


def _fmt_floats(xs) -> str:
    return ", ".join(format(x, "g") for x in xs)


# key -> (parser, formatter)
KEYS = {
    "experiment.n_particles": (int, str),
    "experiment.master_seed": (int, str),
    "experiment.free_run_days": (int, str),
    "experiment.resample_fraction": (float, repr),
    "experiment.forced_resample_days": (int, str),
    "experiment.sim_start_date": (dt.date.fromisoformat, dt.date.isoformat),
    "experiment.ci_levels": (_floats, _fmt_floats),
    "experiment.check_invariants": (_bool, lambda b: "true" if b else "false"),
    "init.infected_min": (int, str),
    "init.infected_max": (int, str),
    "init.r_min": (float, repr),
    "init.r_max": (float, repr),
    "init.mean_t_h": (float, repr),
    "init.p_hd_min": (float, repr),
    "init.p_hd_max": (float, repr),
    "model.p_as": (float, repr),
    "model.p_sh": (float, repr),
    "model.k": (float, repr),
    "model.t_e": (int, str),
    "model.offspring": (_floats, _fmt_floats),
    "model.t_a_inf": (_dist, _fmt_dist),
    "model.t_as": (_dist, _fmt_dist),
    "model.t_sh": (_dist, _fmt_dist),
    "walk.r_sigma": (float, repr),
    "walk.r_min": (float, repr),
    "walk.r_max": (float, repr),
    "walk.p_hd_sigma": (float, repr),
    "walk.p_hd_min": (float, repr),
    "walk.p_hd_max": (float, repr),
    "walk.t_h_sigma": (float, repr),
    "walk.t_h_min": (float, repr),
    "walk.t_h_max": (float, repr),
    "error.sigma_r": (float, repr),
    "error.sigma_d": (float, repr),
    "error.sigma_h_rel": (float, repr),
    "error.sigma_h_diff": (float, repr),
    "error.sigma_h_floor": (float, repr),
}


def to_flat(cfg: ExperimentConfig) -> dict:
    f, w, e = cfg.fixed, cfg.fixed.walk, cfg.error
    return {
        "experiment.n_particles": cfg.n_particles,
        "experiment.master_seed": cfg.master_seed,
        "experiment.free_run_days": cfg.free_run_days,
        "experiment.resample_fraction": cfg.resample_fraction,
        "experiment.forced_resample_days": cfg.forced_resample_days,
        "experiment.sim_start_date": cfg.sim_start_date,
        "experiment.ci_levels": cfg.ci_levels,
        "experiment.check_invariants": cfg.check_invariants,
        "init.infected_min": cfg.init_infected_range[0],
        "init.infected_max": cfg.init_infected_range[1],
        "init.r_min": cfg.init_r_range[0],
        "init.r_max": cfg.init_r_range[1],
        "init.mean_t_h": cfg.init_mean_t_h,
        "init.p_hd_min": cfg.init_p_hd_range[0],
        "init.p_hd_max": cfg.init_p_hd_range[1],
        "model.p_as": f.p_as,
        "model.p_sh": f.p_sh,
        "model.k": f.k,
        "model.t_e": f.t_e,
        "model.offspring": f.offspring,
        "model.t_a_inf": f.dist_t_a_inf,
        "model.t_as": f.dist_t_as,
        "model.t_sh": f.dist_t_sh,
        "walk.r_sigma": w.r_sigma,
        "walk.r_min": w.r_bounds[0],
        "walk.r_max": w.r_bounds[1],
        "walk.p_hd_sigma": w.p_hd_sigma,
        "walk.p_hd_min": w.p_hd_bounds[0],
        "walk.p_hd_max": w.p_hd_bounds[1],
        "walk.t_h_sigma": w.t_h_sigma,
        "walk.t_h_min": w.t_h_bounds[0],
        "walk.t_h_max": w.t_h_bounds[1],
        "error.sigma_r": e.sigma_r,
        "error.sigma_d": e.sigma_d,
        "error.sigma_h_rel": e.sigma_h_rel,
        "error.sigma_h_diff": e.sigma_h_diff,
        "error.sigma_h_floor": e.sigma_h_floor,
    }


def format_flat(cfg: ExperimentConfig) -> dict[str, str]:
    return {k: KEYS[k][1](v) for k, v in to_flat(cfg).items()}


def from_flat(values: dict) -> ExperimentConfig:
    v = to_flat(ExperimentConfig())
    v.update(values)
    try:
        walk = ParamWalk(
            r_sigma=v["walk.r_sigma"], r_bounds=(v["walk.r_min"], v["walk.r_max"]),
            p_hd_sigma=v["walk.p_hd_sigma"], p_hd_bounds=(v["walk.p_hd_min"], v["walk.p_hd_max"]),
            t_h_sigma=v["walk.t_h_sigma"], t_h_bounds=(v["walk.t_h_min"], v["walk.t_h_max"]),
        )
        fixed = FixedParams(
            p_as=v["model.p_as"], p_sh=v["model.p_sh"], k=v["model.k"], t_e=v["model.t_e"],
            dist_t_a_inf=v["model.t_a_inf"], dist_t_as=v["model.t_as"], dist_t_sh=v["model.t_sh"],
            offspring=v["model.offspring"], walk=walk,
        )
        error = ErrorModel(v["error.sigma_r"], v["error.sigma_d"], v["error.sigma_h_rel"],
                           v["error.sigma_h_diff"], v["error.sigma_h_floor"])
        return ExperimentConfig(
            n_particles=v["experiment.n_particles"],
            master_seed=v["experiment.master_seed"],
            free_run_days=v["experiment.free_run_days"],
            resample_fraction=v["experiment.resample_fraction"],
            forced_resample_days=v["experiment.forced_resample_days"],
            fixed=fixed,
            error=error,
            init_infected_range=(v["init.infected_min"], v["init.infected_max"]),
            init_r_range=(v["init.r_min"], v["init.r_max"]),
            init_mean_t_h=v["init.mean_t_h"],
            init_p_hd_range=(v["init.p_hd_min"], v["init.p_hd_max"]),
            ci_levels=tuple(v["experiment.ci_levels"]),
            sim_start_date=v["experiment.sim_start_date"],
            check_invariants=v["experiment.check_invariants"],
        )
    except (ModelError, DistributionError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return KEYS[key][0](text.strip())
    except (ValueError, DistributionError) as exc:
        raise ConfigError(f"{key}: cannot parse {text.strip()!r} ({exc})") from None


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key = key.strip()
        try:
            values[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def parse_override(item: str) -> tuple[str, object]:
    key, sep, value = item.partition("=")
    if not sep:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    return key.strip(), parse_value(key.strip(), value)


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_text(text, str(path)))
    values.update(overrides or {})
    return from_flat(values)

