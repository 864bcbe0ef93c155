"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 data validation error,
3 filter divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .assimilation import FilterDivergenceError
from .config import format_flat, load_config, parse_override, parse_value
from .epimodel import BLOCK_SIZE, ModelError
from .experiment import (
    SWEEP_AXES,
    AlignmentError,
    ConfigError,
    ExperimentConfig,
    SweepError,
    forecast_analysis_divergence,
    run,
    with_axis,
)
from .observations import ObservationError, ObservationSeries, load_observations, write_observations
from .reporting import divergence_csv, meta_text, summaries_csv, write_text

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE = 0, 1, 2, 3

log = logging.getLogger("epifilter")

AXIS_KEYS = {"k": "model.k", "p_as": "model.p_as", "n_particles": "experiment.n_particles",
             "master_seed": "experiment.master_seed"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epifilter", description="Agent-based SEIR model with a particle filter.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, obs_required=True):
        sp.add_argument("--config", type=Path, help="flat key = value configuration file")
        sp.add_argument("--obs", type=Path, required=obs_required, help="observation CSV")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
        sp.add_argument("--seed", type=int, help="shorthand for experiment.master_seed")
        sp.add_argument("--particles", type=int, help="shorthand for experiment.n_particles")
        sp.add_argument("--lax-columns", action="store_true", help="ignore extra CSV columns")

    sp = sub.add_parser("run", help="run one experiment")
    common(sp)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("sweep", help="one run per value of a parameter")
    common(sp)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sp.add_argument("--values", required=True, help="comma separated values")

    sp = sub.add_parser("validate", help="check an observation file")
    common(sp)

    sp = sub.add_parser("simulate", help="write synthetic observations from one model run")
    sp.add_argument("--config", type=Path)
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--out", type=Path, required=True, help="observation CSV to write")
    sp.add_argument("--r-path", required=True,
                    help="piecewise constant r_t as day:value pairs, e.g. 0:0.6,100:0.25")
    sp.add_argument("--days", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--seed-agents", type=int, default=5)
    sp.add_argument("--p-hd", type=float, default=0.02)
    sp.add_argument("--mean-t-h", type=float, default=12.0)

    sp = sub.add_parser("serve", help="start the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    return p


def _config(args) -> ExperimentConfig:
    overrides = dict(parse_override(item) for item in args.set)
    if getattr(args, "seed", None) is not None:
        overrides["experiment.master_seed"] = args.seed
    if getattr(args, "particles", None) is not None:
        overrides["experiment.n_particles"] = args.particles
    return load_config(args.config, overrides)


def _observations(args, cfg: ExperimentConfig) -> ObservationSeries:
    try:
        return load_observations(args.obs, cfg.sim_start_date, cfg.free_run_days, args.lax_columns)
    except OSError as exc:
        raise ObservationError(f"cannot read {args.obs}: {exc.strerror}") from None


def _write_run(out: Path, cfg: ExperimentConfig, obs: ObservationSeries, summaries) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "summaries.csv", summaries_csv(summaries, cfg.sim_start_date, cfg.ci_levels))
    write_text(out / "forecast_divergence.csv",
               divergence_csv(forecast_analysis_divergence(summaries), cfg.sim_start_date))
    analysis = [s for s in summaries if s.phase == "analysis"]
    meta = {
        "version": __version__,
        "block_size": BLOCK_SIZE,
        "observation_days": len(obs),
        "first_observation_day": obs.first_day if obs.records else "",
        "simulated_days": (summaries[-1].day_index + 1) if summaries else 0,
        "resamplings": sum(s.resampled for s in analysis),
    }
    meta.update(format_flat(cfg))
    write_text(out / "run_meta.txt", meta_text(meta))


def cmd_run(args) -> int:
    cfg = _config(args)
    obs = _observations(args, cfg)
    summaries = run(cfg, obs, threads=args.threads)
    _write_run(args.out, cfg, obs, summaries)
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    obs = _observations(args, cfg)
    key = AXIS_KEYS[args.axis]
    values = [parse_value(key, v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    configs = {}
    for value in values:
        try:
            configs[value] = with_axis(cfg, args.axis, value)
        except ValueError as exc:
            raise SweepError(args.axis, value, ConfigError(str(exc))) from ConfigError(str(exc))
    for value, sub_cfg in configs.items():
        try:
            summaries = run(sub_cfg, obs, threads=args.threads)
        except Exception as exc:
            raise SweepError(args.axis, value, exc) from exc
        _write_run(args.out / f"{args.axis}={value}", sub_cfg, obs, summaries)
        log.info("wrote %s", args.out / f"{args.axis}={value}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _config(args) if (args.config or args.set) else ExperimentConfig(n_particles=1)
    try:
        obs = load_observations(args.obs, cfg.sim_start_date, None, args.lax_columns)
    except OSError as exc:
        raise ObservationError(f"cannot read {args.obs}: {exc.strerror}") from None
    if obs.records and obs.first_day != cfg.free_run_days:
        log.warning("first observation is day %d; runs expect day %d", obs.first_day, cfg.free_run_days)
    first = obs.date_of(obs.first_day).isoformat() if obs.records else "-"
    print(f"{args.obs}: {len(obs)} daily records from {first} (day {obs.first_day})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .synthetic import piecewise_constant, simulate_truth

    cfg = _config(args)
    breaks = {}
    try:
        for item in args.r_path.split(","):
            day, sep, value = item.partition(":")
            if not sep:
                raise ConfigError(f"--r-path item {item!r} is not day:value")
            breaks[int(day)] = float(value)
        path = piecewise_constant(breaks, args.days)
        obs, _ = simulate_truth(path, args.seed, cfg.fixed, args.seed_agents, args.p_hd, args.mean_t_h,
                                cfg.free_run_days, cfg.sim_start_date)
    except (ValueError, ModelError) as exc:
        raise ConfigError(str(exc)) from None
    write_observations(obs, args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("epifilter.api.app:app", host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate,
            "simulate": cmd_simulate, "serve": cmd_serve}


def _exit_code(exc: BaseException) -> int | None:
    if isinstance(exc, SweepError) and exc.__cause__ is not None:
        return _exit_code(exc.__cause__)
    if isinstance(exc, FilterDivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, (ObservationError, AlignmentError)):
        return EXIT_DATA
    if isinstance(exc, (ConfigError, ModelError)):
        return EXIT_CONFIG
    return None


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
