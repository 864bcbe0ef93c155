"""Synthetic observations from a single model run with a prescribed r_t path."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .assimilation import Observation
from .distributions import RngStream
from .epimodel import Ensemble, FixedParams, check_invariants, step_ensemble
from .experiment import Purpose
from .observations import DEFAULT_SIM_START, ObservationSeries


@dataclass(frozen=True)
class Truth:
    """Latent trajectory behind a synthetic series, one entry per day."""

    r_t: np.ndarray
    h_stock: np.ndarray
    r_cum: np.ndarray
    d_cum: np.ndarray
    asymptomatic: np.ndarray
    infected_cum: np.ndarray
    active: np.ndarray


def piecewise_constant(breaks: dict[int, float], n_days: int) -> np.ndarray:
    """Daily values from ``{first_day: value}``; each value holds until the next break."""
    if 0 not in breaks:
        raise ValueError("piecewise path needs a value for day 0")
    out = np.empty(n_days)
    starts = sorted(breaks)
    for i, s in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else n_days
        out[s:end] = breaks[s]
    return out


def simulate_truth(r_path, seed: int, fixed: FixedParams = FixedParams(), seed_agents: int = 5,
                   p_hd=0.02, mean_t_h=12.0, first_obs_day: int = 49,
                   sim_start_date: dt.date = DEFAULT_SIM_START) -> tuple[ObservationSeries, Truth]:
    """Run the model once with r_t (and optionally p_hd, mean_t_h) imposed per day.

    Returns the observations from ``first_obs_day`` to the end of ``r_path``
    together with the full latent trajectory.
    """
    r_path = np.asarray(r_path, dtype=float)
    n_days = len(r_path)
    p_hd = np.broadcast_to(np.asarray(p_hd, dtype=float), (n_days,))
    mean_t_h = np.broadcast_to(np.asarray(mean_t_h, dtype=float), (n_days,))
    ens = Ensemble.empty(1, fixed)
    ens.e_queue[0, fixed.t_e - 1] = seed_agents
    ens.seeded[0] = seed_agents
    root = RngStream(seed).spawn(Purpose.TRUTH)
    cols = {name: np.zeros(n_days, dtype=np.int64) for name in ("h", "r", "d", "a", "i", "n")}
    for day in range(n_days):
        ens.r_t[0], ens.p_hd[0], ens.mean_t_h[0] = r_path[day], p_hd[day], mean_t_h[day]
        step_ensemble(root.spawn(day), ens, day, fixed, evolve=False)
        check_invariants(ens, fixed, day)
        cols["h"][day] = ens.h_stock[0]
        cols["r"][day] = ens.r_cum[0]
        cols["d"][day] = ens.d_cum[0]
        cols["a"][day] = ens.asymptomatic[0]
        cols["i"][day] = ens.infected_cum[0]
        cols["n"][day] = ens.active[0]
    records = tuple(
        Observation(day, int(cols["h"][day]), int(cols["r"][day]), int(cols["d"][day]))
        for day in range(first_obs_day, n_days)
    )
    truth = Truth(r_path.copy(), cols["h"], cols["r"], cols["d"], cols["a"], cols["i"], cols["n"])
    return ObservationSeries(sim_start_date, records), truth
