"""Seedable sampling primitives shared by the model and the filter.

Every random draw in the package goes through an :class:`RngStream`.  A stream
is identified by a master seed plus a derivation path of small integers; the
pair is hashed into a Philox key, so two streams with the same identity
produce the same numbers on any platform and in any execution order.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import special

PROB_TOL = 1e-12
MULTINOMIAL_TOL = 1e-9


class DistributionError(ValueError):
    """Invalid arguments given to a sampler (a configuration problem)."""


def _derive_key(master_seed: int, path: tuple[int, ...]) -> np.ndarray:
    h = hashlib.blake2b(digest_size=16, person=b"epifilter-rng")
    h.update(struct.pack("<Q", master_seed & 0xFFFFFFFFFFFFFFFF))
    h.update(struct.pack("<I", len(path)))
    for tag in path:
        h.update(struct.pack("<q", tag))
    return np.frombuffer(h.digest(), dtype="<u8").astype(np.uint64)


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream named by ``(master_seed, path)``.

    ``spawn`` derives a child stream; children with different tags are
    independent.  The underlying generator is created lazily and is not
    thread-safe, so one stream should be used by one thread at a time.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def spawn(self, *tags: int) -> "RngStream":
        return RngStream(self.master_seed, self.path + tuple(int(t) for t in tags))

    @cached_property
    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=_derive_key(self.master_seed, self.path)))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution over integer values (days or counts)."""

    values: tuple[int, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probabilities", probs)
        if len(values) != len(probs) or not values:
            raise DistributionError("values and probabilities must be nonempty and of equal length")
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise DistributionError(f"negative or non-finite probability in {probs}")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise DistributionError(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def from_mapping(cls, table: dict[int, float]) -> "DiscreteDistribution":
        items = sorted(table.items())
        return cls(tuple(v for v, _ in items), tuple(p for _, p in items))

    @property
    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probabilities))

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum(p * (v - m) ** 2 for v, p in zip(self.values, self.probabilities))

    @property
    def max_value(self) -> int:
        return max(v for v, p in zip(self.values, self.probabilities) if p > 0)

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Values and probabilities restricted to the positive-mass entries."""
        pairs = [(v, p) for v, p in zip(self.values, self.probabilities) if p > 0]
        vals = np.array([v for v, _ in pairs], dtype=np.int64)
        probs = np.array([p for _, p in pairs], dtype=float)
        return vals, probs / probs.sum()


def sample_truncated_normal(stream: RngStream, mu, sigma, lo, hi, size=None):
    """Draw from the normal(mu, sigma**2) law restricted to ``[lo, hi]``.

    ``mu`` is the location of the parent normal, not the mean of the
    truncated law.  Sampling is by inverse CDF computed in log space, so the
    cost per draw is constant even when ``mu`` lies far outside the bounds.
    All arguments broadcast.
    """
    mu, sigma, lo, hi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (mu, sigma, lo, hi)))
    if np.any(~(sigma > 0)):
        raise DistributionError("truncated normal requires sigma > 0")
    if np.any(~(lo < hi)):
        raise DistributionError("truncated normal requires lo < hi")
    shape = mu.shape if size is None else size
    u = stream.generator.random(shape)
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    # Work in the lower tail where log_ndtr keeps full precision.
    flip = a > -b
    a_, b_ = np.where(flip, -b, a), np.where(flip, -a, b)
    log_fa = special.log_ndtr(a_)
    log_fb = special.log_ndtr(b_)
    with np.errstate(divide="ignore"):
        log_p = np.logaddexp(log_fb + np.log(u), log_fa + np.log1p(-u))
    z = special.ndtri_exp(np.minimum(log_p, 0.0))
    z = np.clip(z, a_, b_)
    x = mu + sigma * np.where(flip, -z, z)
    x = np.clip(x, lo, hi)
    return x[()] if size is None and x.ndim == 0 else x


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DistributionError("probabilities must be a nonempty 1-d sequence")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DistributionError(f"negative or non-finite probability in {p.tolist()}")
    total = p.sum()
    if abs(total - 1.0) > MULTINOMIAL_TOL:
        raise DistributionError(f"probabilities sum to {total!r}, not 1")
    return p / total


def sample_multinomial(stream: RngStream, n, probs: Sequence[float]) -> np.ndarray:
    """One multinomial realization per entry of ``n`` (scalar or array)."""
    p = _check_probs(probs)
    n_arr = np.asarray(n, dtype=np.int64)
    if np.any(n_arr < 0):
        raise DistributionError("multinomial trial count must be nonnegative")
    return stream.generator.multinomial(n_arr, p)


def sample_discrete(stream: RngStream, dist: DiscreteDistribution, size=None):
    vals, probs = dist.support()
    out = stream.generator.choice(vals, size=size, p=probs)
    return int(out) if size is None else out


def two_point_integer_distribution(mean: float) -> DiscreteDistribution:
    """Distribution on ``floor(mean)`` and ``ceil(mean)`` with expectation ``mean``."""
    if not mean >= 0 or not math.isfinite(mean):
        raise DistributionError(f"mean must be a finite nonnegative number, got {mean!r}")
    lo = math.floor(mean)
    frac = mean - lo
    if frac == 0.0:
        return DiscreteDistribution((lo,), (1.0,))
    return DiscreteDistribution((lo, lo + 1), (1.0 - frac, frac))
