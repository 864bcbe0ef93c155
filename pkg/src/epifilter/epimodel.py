"""Agent-based extended SEIR model with cohort queues.

Agents inside a compartment are exchangeable, so a compartment is stored as a
queue of head counts indexed by the number of days each cohort still has to
spend there (column ``j`` holds agents with ``j + 1`` days remaining).  All
branch choices and duration draws are exact binomial/multinomial splits of
those counts.

The ensemble is kept as a structure of arrays (one row per particle) so a
whole block of particles is advanced with a handful of vectorized draws.
:func:`step_particle` is the single-particle view of the same code path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .distributions import (
    DiscreteDistribution,
    DistributionError,
    RngStream,
    sample_truncated_normal,
)

BLOCK_SIZE = 4096
"""Particles per random-stream block; part of the reproducibility contract."""

MAX_ACTIVE_AGENTS = 2**52

T_A_INF = DiscreteDistribution.from_mapping({5: 0.05, 6: 0.2, 7: 0.5, 8: 0.2, 9: 0.05})
T_AS = DiscreteDistribution.from_mapping({2: 0.3, 3: 0.6, 4: 0.05, 5: 0.05})
T_SH = DiscreteDistribution.from_mapping({2: 0.1, 3: 0.2, 4: 0.5, 5: 0.15, 6: 0.05})
OFFSPRING = (0.5, 0.35, 0.12, 0.01, 0.01, 0.01)


class ModelError(ValueError):
    pass


class InvariantError(AssertionError):
    """Conservation or parameter-bound check failed."""


class EpidemicOverflowError(OverflowError):
    """A particle grew beyond what integer cohort counts can hold."""


@dataclass(frozen=True)
class ParamWalk:
    """Daily truncated-normal random walk of the three latent parameters."""

    r_sigma: float = 0.05
    r_bounds: tuple[float, float] = (0.0, 1.0)
    p_hd_sigma: float = 0.0025
    p_hd_bounds: tuple[float, float] = (0.0, 0.05)
    t_h_sigma: float = 0.75
    t_h_bounds: tuple[float, float] = (4.0, 19.0)

    def __post_init__(self):
        for name in ("r", "p_hd", "t_h"):
            lo, hi = getattr(self, f"{name}_bounds")
            if not getattr(self, f"{name}_sigma") > 0 or not lo < hi:
                raise ModelError(f"invalid random walk for {name}")
        if self.r_bounds[0] < 0 or self.r_bounds[1] > 1:
            raise ModelError("r_t bounds must lie in [0, 1]")
        if self.p_hd_bounds[0] < 0 or self.p_hd_bounds[1] > 1:
            raise ModelError("p_hd bounds must lie in [0, 1]")
        if self.t_h_bounds[0] < 1:
            raise ModelError("hospital stay must be at least one day")


@dataclass(frozen=True)
class FixedParams:
    p_as: float = 0.83
    p_sh: float = 0.78
    k: float = 0.58
    t_e: int = 3
    dist_t_a_inf: DiscreteDistribution = T_A_INF
    dist_t_as: DiscreteDistribution = T_AS
    dist_t_sh: DiscreteDistribution = T_SH
    offspring: tuple[float, ...] = OFFSPRING
    walk: ParamWalk = field(default_factory=ParamWalk)

    def __post_init__(self):
        object.__setattr__(self, "offspring", tuple(float(p) for p in self.offspring))
        for name in ("p_as", "p_sh", "k"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {v}")
        if int(self.t_e) != self.t_e or self.t_e < 1:
            raise ModelError("t_e must be a positive integer")
        if len(self.offspring) != 6:
            raise ModelError("offspring distribution needs six entries (0..5 secondary cases)")
        try:
            DiscreteDistribution(tuple(range(6)), self.offspring)
        except DistributionError as exc:
            raise ModelError(f"offspring: {exc}") from None
        for name in ("dist_t_a_inf", "dist_t_as", "dist_t_sh"):
            if min(getattr(self, name).support()[0]) < 1:
                raise ModelError(f"{name} must put mass on durations of at least one day only")

    @property
    def p_a_inf(self) -> float:
        return 1.0 - self.p_as

    @property
    def p_s_inf(self) -> float:
        return 1.0 - self.p_sh

    @property
    def e_sc(self) -> float:
        return math.fsum(j * p for j, p in enumerate(self.offspring))

    @property
    def h_width(self) -> int:
        return int(math.floor(self.walk.t_h_bounds[1])) + 1


@dataclass
class DynamicParams:
    r_t: float
    p_hd: float
    mean_t_h: float

    @property
    def p_hr(self) -> float:
        return 1.0 - self.p_hd


@dataclass
class CompartmentState:
    e_queue: np.ndarray
    ia_asym_queue: np.ndarray
    ia_sym_queue: np.ndarray
    is_queue: np.ndarray
    h_to_r_queue: np.ndarray
    h_to_d_queue: np.ndarray
    r_cum: int = 0
    d_cum: int = 0
    removed_asym_cum: int = 0
    removed_selfq_cum: int = 0
    infected_cum: int = 0
    seeded: int = 0

    @property
    def h_stock(self) -> int:
        return int(self.h_to_r_queue.sum() + self.h_to_d_queue.sum())


@dataclass
class Particle:
    state: CompartmentState
    dyn: DynamicParams
    weight: float = 1.0
    index: int = 0


QUEUES = ("e_queue", "ia_asym_queue", "ia_sym_queue", "is_queue", "h_to_r_queue", "h_to_d_queue")
COUNTERS = ("r_cum", "d_cum", "removed_asym_cum", "removed_selfq_cum", "infected_cum", "seeded")
PARAMS = ("r_t", "p_hd", "mean_t_h")


def queue_widths(fixed: FixedParams) -> dict[str, int]:
    return {
        "e_queue": int(fixed.t_e),
        "ia_asym_queue": fixed.dist_t_a_inf.max_value,
        "ia_sym_queue": fixed.dist_t_as.max_value,
        "is_queue": fixed.dist_t_sh.max_value,
        "h_to_r_queue": fixed.h_width,
        "h_to_d_queue": fixed.h_width,
    }


@dataclass
class Ensemble:
    """All particles as parallel arrays; row ``i`` is the particle in slot ``i``."""

    e_queue: np.ndarray
    ia_asym_queue: np.ndarray
    ia_sym_queue: np.ndarray
    is_queue: np.ndarray
    h_to_r_queue: np.ndarray
    h_to_d_queue: np.ndarray
    r_cum: np.ndarray
    d_cum: np.ndarray
    removed_asym_cum: np.ndarray
    removed_selfq_cum: np.ndarray
    infected_cum: np.ndarray
    seeded: np.ndarray
    r_t: np.ndarray
    p_hd: np.ndarray
    mean_t_h: np.ndarray

    @classmethod
    def empty(cls, n: int, fixed: FixedParams) -> "Ensemble":
        widths = queue_widths(fixed)
        arrays = {name: np.zeros((n, widths[name]), dtype=np.int64) for name in QUEUES}
        arrays.update({name: np.zeros(n, dtype=np.int64) for name in COUNTERS})
        arrays.update({name: np.zeros(n, dtype=float) for name in PARAMS})
        return cls(**arrays)

    @classmethod
    def from_particles(cls, particles, fixed: FixedParams) -> "Ensemble":
        particles = list(particles)
        ens = cls.empty(len(particles), fixed)
        for i, p in enumerate(particles):
            for name in QUEUES:
                q = np.asarray(getattr(p.state, name), dtype=np.int64)
                row = getattr(ens, name)[i]
                if q.size > row.size and q[row.size:].any():
                    raise ModelError(f"{name} longer than the configured durations allow")
                row[: min(q.size, row.size)] = q[: row.size]
            for name in COUNTERS:
                getattr(ens, name)[i] = getattr(p.state, name)
            for name in PARAMS:
                getattr(ens, name)[i] = getattr(p.dyn, name)
        return ens

    def __len__(self) -> int:
        return len(self.r_t)

    def particle(self, i: int, weight: float = 1.0) -> Particle:
        state = CompartmentState(
            **{name: getattr(self, name)[i].copy() for name in QUEUES},
            **{name: int(getattr(self, name)[i]) for name in COUNTERS},
        )
        dyn = DynamicParams(**{name: float(getattr(self, name)[i]) for name in PARAMS})
        return Particle(state=state, dyn=dyn, weight=weight, index=i)

    def view(self, sl: slice) -> "Ensemble":
        return Ensemble(**{f.name: getattr(self, f.name)[sl] for f in fields(self)})

    def take(self, indices: np.ndarray) -> "Ensemble":
        return Ensemble(**{f.name: getattr(self, f.name)[indices] for f in fields(self)})

    def copy(self) -> "Ensemble":
        return Ensemble(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    @property
    def h_stock(self) -> np.ndarray:
        return self.h_to_r_queue.sum(axis=1) + self.h_to_d_queue.sum(axis=1)

    @property
    def asymptomatic(self) -> np.ndarray:
        return self.ia_asym_queue.sum(axis=1)

    @property
    def active(self) -> np.ndarray:
        return sum(getattr(self, name).sum(axis=1) for name in QUEUES)


def evolve_params(stream: RngStream, dyn, walk: ParamWalk | None = None):
    """One day of the truncated-normal walk for ``r_t``, ``p_hd`` and ``mean_t_h``.

    Accepts a :class:`DynamicParams` or anything with array attributes of the
    same names (an :class:`Ensemble`); returns a new :class:`DynamicParams`
    in the first case and updates the arrays in place otherwise.
    """
    walk = walk or ParamWalk()
    r = sample_truncated_normal(stream, dyn.r_t, walk.r_sigma, *walk.r_bounds)
    p_hd = sample_truncated_normal(stream, dyn.p_hd, walk.p_hd_sigma, *walk.p_hd_bounds)
    t_h = sample_truncated_normal(stream, dyn.mean_t_h, walk.t_h_sigma, *walk.t_h_bounds)
    if isinstance(dyn, DynamicParams):
        return DynamicParams(float(r), float(p_hd), float(t_h))
    dyn.r_t[...] = r
    dyn.p_hd[...] = p_hd
    dyn.mean_t_h[...] = t_h
    return dyn


def spawn_infections(stream: RngStream, n_asym, n_sym, r_t, fixed: FixedParams):
    """Number of new infections produced in one day by the agents in I_a.

    Each asymptomatic agent draws its daily offspring from the offspring law
    with every nonzero outcome scaled by ``k * r_t`` (``r_t`` for symptomatic
    agents), the remaining mass going to zero.  This is sampled as a
    binomial thinning (how many agents produce at least one case) followed by
    a single multinomial over 1..5 for the producers, which has the same law
    as the two separate six-outcome multinomials.  Broadcasts over arrays.
    """
    r_t = getattr(r_t, "r_t", r_t)
    if np.any(np.asarray(fixed.k * r_t) > 1) or np.any(np.asarray(r_t) > 1):
        raise ModelError("k * r_t and r_t must not exceed 1")
    gen = stream.generator
    off = np.asarray(fixed.offspring)
    q = 1.0 - off[0]
    if q <= 0:
        return np.zeros(np.broadcast(n_asym, n_sym, r_t).shape, dtype=np.int64)[()]
    producers = gen.binomial(n_asym, np.asarray(fixed.k * r_t * q)) + gen.binomial(n_sym, np.asarray(r_t * q))
    counts = gen.multinomial(producers, off[1:] / q)
    total = counts @ np.arange(1, 6)
    return total if np.ndim(total) else int(total)


def _add_durations(gen, queue: np.ndarray, n: np.ndarray, dist: DiscreteDistribution) -> None:
    values, probs = dist.support()
    if len(values) == 1:
        queue[:, values[0] - 1] += n
        return
    queue[:, values - 1] += gen.multinomial(n, probs)


def _shift(queue: np.ndarray) -> np.ndarray:
    leaving = queue[:, 0].copy()
    queue[:, :-1] = queue[:, 1:]
    queue[:, -1] = 0
    return leaving


def _step_block(stream: RngStream, ens: Ensemble, day: int, fixed: FixedParams, evolve: bool) -> None:
    """Advance a block of particles by one day, in place.

    Order: parameter walk (skipped on day 0, whose parameters are the initial
    draw), infections from the current I_a occupancy into E at ``t_e`` days
    remaining, then every queue moves one day and the cohorts reaching zero
    are routed to their next compartment.  Arrivals are placed after the
    shift, so a cohort given ``T`` days leaves on the ``T``-th following step.
    """
    gen = stream.generator
    if evolve and day > 0:
        evolve_params(stream, ens, fixed.walk)

    new = spawn_infections(stream, ens.ia_asym_queue.sum(axis=1), ens.ia_sym_queue.sum(axis=1), ens.r_t, fixed)
    ens.e_queue[:, fixed.t_e - 1] += new
    ens.infected_cum += new

    leave_e = _shift(ens.e_queue)
    leave_asym = _shift(ens.ia_asym_queue)
    leave_sym = _shift(ens.ia_sym_queue)
    leave_is = _shift(ens.is_queue)
    recovered = _shift(ens.h_to_r_queue)
    died = _shift(ens.h_to_d_queue)

    ens.r_cum += recovered
    ens.d_cum += died
    ens.removed_asym_cum += leave_asym

    # I_s -> H: fate and stay length fixed by the parameters of the entry day
    to_death = gen.binomial(leave_is, ens.p_hd)
    lo = np.floor(ens.mean_t_h).astype(np.int64)
    frac = ens.mean_t_h - lo
    rows = np.arange(len(ens))
    for queue, n in ((ens.h_to_d_queue, to_death), (ens.h_to_r_queue, leave_is - to_death)):
        longer = gen.binomial(n, frac)
        queue[rows, lo - 1] += n - longer
        queue[rows, lo] += longer

    # I_a symptomatic -> I_s or self-quarantine
    to_is = gen.binomial(leave_sym, fixed.p_sh)
    ens.removed_selfq_cum += leave_sym - to_is
    _add_durations(gen, ens.is_queue, to_is, fixed.dist_t_sh)

    # E -> I_a, symptomatic or not decided on entry
    sym = gen.binomial(leave_e, fixed.p_as)
    _add_durations(gen, ens.ia_sym_queue, sym, fixed.dist_t_as)
    _add_durations(gen, ens.ia_asym_queue, leave_e - sym, fixed.dist_t_a_inf)

    if new.size and new.max() > MAX_ACTIVE_AGENTS:
        raise EpidemicOverflowError(f"particle with more than {MAX_ACTIVE_AGENTS} daily infections on day {day}")


def step_ensemble(stream: RngStream, ens: Ensemble, day: int, fixed: FixedParams,
                  threads: int = 1, evolve: bool = True) -> Ensemble:
    """Advance every particle by one day, in place.

    Slot ``i`` draws from the stream of block ``i // BLOCK_SIZE``, so the
    result does not depend on ``threads``.
    """
    n = len(ens)
    blocks = [(b, slice(b * BLOCK_SIZE, min(n, (b + 1) * BLOCK_SIZE))) for b in range(-(-n // BLOCK_SIZE))]

    def work(item):
        b, sl = item
        _step_block(stream.spawn(b), ens.view(sl), day, fixed, evolve)

    if threads <= 1 or len(blocks) <= 1:
        for item in blocks:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, blocks))
    return ens


def step_particle(stream: RngStream, particle: Particle, day: int, fixed: FixedParams,
                  evolve: bool = True) -> Particle:
    ens = Ensemble.from_particles([particle], fixed)
    _step_block(stream, ens, day, fixed, evolve)
    return replace(ens.particle(0, particle.weight), index=particle.index)


def compute_rt(dyn, fixed: FixedParams):
    """Effective reproduction number implied by the contact factor ``r_t``.

    Accepts a :class:`DynamicParams`, an :class:`Ensemble`, or a bare number
    or array of ``r_t`` values.
    """
    r = getattr(dyn, "r_t", dyn)
    per_case = fixed.k * fixed.p_a_inf * fixed.dist_t_a_inf.mean + fixed.p_as * fixed.dist_t_as.mean
    return per_case * fixed.e_sc * r


def check_invariants(ens: Ensemble, fixed: FixedParams, day: int | None = None) -> None:
    """Raise :class:`InvariantError` unless counts are conserved and parameters in bounds."""
    where = "" if day is None else f" on day {day}"
    for name in QUEUES + COUNTERS:
        if np.any(getattr(ens, name) < 0):
            raise InvariantError(f"negative count in {name}{where}")
    total_in = ens.infected_cum + ens.seeded
    total_out = ens.active + ens.r_cum + ens.d_cum + ens.removed_asym_cum + ens.removed_selfq_cum
    bad = np.flatnonzero(total_in != total_out)
    if bad.size:
        raise InvariantError(f"agent conservation violated for particle {bad[0]}{where}")
    w = fixed.walk
    for name, (lo, hi) in (("r_t", w.r_bounds), ("p_hd", w.p_hd_bounds), ("mean_t_h", w.t_h_bounds)):
        v = getattr(ens, name)
        if np.any((v < lo) | (v > hi)):
            raise InvariantError(f"{name} outside [{lo}, {hi}]{where}")
