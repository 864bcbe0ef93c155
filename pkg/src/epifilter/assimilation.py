"""Particle-filter pieces: Gaussian likelihood weights, N_eff, resampling, summaries."""

from __future__ import annotations

from copy import deepcopy
from dataclasses import dataclass

import numpy as np

from .distributions import RngStream
from .epimodel import Ensemble, Particle


class FilterDivergenceError(RuntimeError):
    """No particle is compatible with the observation (all weights vanished)."""


@dataclass(frozen=True)
class Observation:
    day_index: int
    h_stock: int
    r_cum: int
    d_cum: int


@dataclass(frozen=True)
class ErrorModel:
    sigma_r: float = 2000.0
    sigma_d: float = 100.0
    sigma_h_rel: float = 0.3
    sigma_h_diff: float = 4.0
    sigma_h_floor: float = 400.0

    def __post_init__(self):
        for name in ("sigma_r", "sigma_d", "sigma_h_rel", "sigma_h_diff", "sigma_h_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def sigma_h(h_t: float, h_prev: float, err: ErrorModel = ErrorModel()) -> float:
    """Observation error of the hospitalized stock; widens with the daily change."""
    spread = err.sigma_h_rel * h_t + err.sigma_h_diff * abs(h_t - h_prev)
    return float(np.sqrt(spread * spread + err.sigma_h_floor))


def _observed_arrays(particles):
    if isinstance(particles, Ensemble):
        return particles.h_stock, particles.r_cum, particles.d_cum
    particles = list(particles)
    if not particles:
        raise ValueError("particle set is empty")
    h = np.array([p.state.h_stock for p in particles], dtype=float)
    r = np.array([p.state.r_cum for p in particles], dtype=float)
    d = np.array([p.state.d_cum for p in particles], dtype=float)
    return h, r, d


def log_likelihood(h, r, d, obs: Observation, obs_prev_h: float, err: ErrorModel = ErrorModel()) -> np.ndarray:
    s_h = sigma_h(obs.h_stock, obs_prev_h, err)
    h = np.asarray(h, dtype=float) - obs.h_stock
    r = np.asarray(r, dtype=float) - obs.r_cum
    d = np.asarray(d, dtype=float) - obs.d_cum
    with np.errstate(over="ignore"):  # -inf is the right answer for absurd misfits
        return -(h * h) / (2 * s_h**2) - (r * r) / (2 * err.sigma_r**2) - (d * d) / (2 * err.sigma_d**2)


def update_weights(prev, particles, obs: Observation, obs_prev_h: float,
                   err: ErrorModel = ErrorModel()) -> np.ndarray:
    """Multiply the previous weights by the Gaussian likelihood and renormalize.

    ``particles`` may be an :class:`Ensemble` or a sequence of
    :class:`Particle`.  The log weights are shifted by their maximum before
    exponentiation; the shift cancels in the normalization.
    """
    prev = np.asarray(prev, dtype=float)
    loglik = log_likelihood(*_observed_arrays(particles), obs, obs_prev_h, err)
    if prev.shape != loglik.shape:
        raise ValueError("weight vector and particle set differ in size")
    with np.errstate(divide="ignore"):
        logw = np.log(prev) + loglik
    top = logw.max()
    if not np.isfinite(top):
        raise FilterDivergenceError(f"all particle weights vanished on day {obs.day_index}")
    w = np.exp(logw - top)
    total = w.sum()
    if not total > 0:
        raise FilterDivergenceError(f"all particle weights vanished on day {obs.day_index}")
    return w / total


def effective_particles(w) -> float:
    w = np.asarray(w, dtype=float)
    return float(1.0 / np.dot(w, w))


def should_resample(n_eff: float, n: int, days_since_last: int,
                    fraction: float = 0.1, forced_days: int = 15) -> bool:
    return bool(n_eff < fraction * n or days_since_last >= forced_days)


def resample_indices(stream: RngStream, w) -> np.ndarray:
    """Slots to copy: one multinomial draw of ``N`` copies over the weights."""
    w = np.asarray(w, dtype=float)
    counts = stream.generator.multinomial(len(w), w / w.sum())
    return np.repeat(np.arange(len(w)), counts)


def resample(stream: RngStream, particles, w):
    """Multinomial resampling; returns the new particle set and uniform weights.

    Copies land in distinct slots, and the model's random streams are keyed by
    slot, so copies of the same parent evolve independently afterwards.
    """
    idx = resample_indices(stream, w)
    n = len(idx)
    weights = np.full(n, 1.0 / n)
    if isinstance(particles, Ensemble):
        return particles.take(idx), weights
    particles = list(particles)
    out = []
    for slot, i in enumerate(idx):
        p = particles[i]
        out.append(Particle(state=deepcopy(p.state), dyn=deepcopy(p.dyn), weight=1.0 / n, index=slot))
    return out, weights


@dataclass(frozen=True)
class Summary:
    mean: float
    intervals: dict[float, tuple[float, float]]


def weighted_quantile(values, w, q):
    """Weighted quantile(s) by linear interpolation over distinct values.

    Equal values are merged and zero weights dropped; each distinct value
    carries its probability mass centred on its position in the cumulative
    distribution, and quantiles are interpolated between those midpoints
    (clamped to the extreme values).
    """
    values = np.asarray(values, dtype=float)
    w = np.asarray(w, dtype=float)
    keep = w > 0
    values, w = values[keep], w[keep]
    if values.size == 0:
        raise ValueError("no positive weight")
    order = np.argsort(values, kind="stable")
    values, w = values[order], w[order]
    distinct, start = np.unique(values, return_index=True)
    mass = np.add.reduceat(w, start)
    mass = mass / mass.sum()
    mid = np.cumsum(mass) - 0.5 * mass
    return np.interp(q, mid, distinct)


def weighted_summary(values, w, levels=(0.68, 0.90)) -> Summary:
    values = np.asarray(values, dtype=float)
    w = np.asarray(w, dtype=float)
    if values.shape != w.shape:
        raise ValueError("values and weights differ in size")
    total = w.sum()
    mean = float(np.dot(values, w) / total)
    levels = [float(c) for c in levels]
    if any(not 0 < c < 1 for c in levels):
        raise ValueError("coverage levels must lie in (0, 1)")
    qs = [(1 - c) / 2 for c in levels] + [(1 + c) / 2 for c in levels]
    quant = weighted_quantile(values, w, qs)
    m = len(levels)
    return Summary(mean, {c: (float(quant[i]), float(quant[m + i])) for i, c in enumerate(levels)})
