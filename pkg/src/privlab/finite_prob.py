"""Exact finite probability.

Distributions over an indexed finite set are the unit of exactness for
every check in this package: mechanism rows, output laws, and source
distributions are all ``FiniteDistribution`` objects, compared with total
variation distance at a single global tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError

#: Global probability tolerance: equality of masses, normalization checks.
TOLERANCE = 1e-9

#: Entries more negative than this are rejected instead of clipped.
NEGATIVE_FLOOR = -1e-12


class FiniteDistribution:
    """Probability vector over ``{0, ..., support_size - 1}``.

    Entries are validated and normalized on construction; float dust in
    ``[NEGATIVE_FLOOR, 0)`` is clipped to zero. Instances are immutable
    and safe to share across threads.
    """

    __slots__ = ("_probs",)

    def __init__(self, probs: Sequence[float] | np.ndarray) -> None:
        arr = np.array(probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        lo = float(arr.min())
        if lo < NEGATIVE_FLOOR:
            raise ValueError(f"negative probability entry {lo}")
        np.clip(arr, 0.0, None, out=arr)
        total = float(arr.sum())
        if not math.isfinite(total) or total <= 0.0:
            raise ValueError("probabilities must sum to a positive finite value")
        arr /= total
        arr.setflags(write=False)
        self._probs = arr

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def support_size(self) -> int:
        return int(self._probs.size)

    def __len__(self) -> int:
        return int(self._probs.size)

    def __getitem__(self, index: int) -> float:
        return float(self._probs[index])

    def __repr__(self) -> str:
        return f"FiniteDistribution({self._probs.tolist()})"

    @classmethod
    def point_mass(cls, index: int, support_size: int) -> "FiniteDistribution":
        if not 0 <= index < support_size:
            raise ValueError(f"index {index} outside support of size {support_size}")
        vec = np.zeros(support_size)
        vec[index] = 1.0
        return cls(vec)

    @classmethod
    def uniform(cls, support_size: int) -> "FiniteDistribution":
        return cls(np.full(support_size, 1.0 / support_size))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw indices from this distribution with the supplied generator."""
        return rng.choice(self.support_size, size=size, p=self._probs)

    def to_json(self) -> dict:
        return {"probs": self._probs.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteDistribution":
        return cls(obj["probs"])


def tv_distance(p: FiniteDistribution, q: FiniteDistribution) -> float:
    """Total variation distance: half the L1 distance, in [0, 1]."""
    if p.support_size != q.support_size:
        raise DimensionError(
            f"support sizes differ: {p.support_size} vs {q.support_size}"
        )
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def tv_vector(p: np.ndarray, q: np.ndarray) -> float:
    """TV distance on raw probability vectors (no validation)."""
    return 0.5 * float(np.abs(p - q).sum())


def pairwise_tv(rows_a: np.ndarray, rows_b: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Matrix of TV distances between every row of ``rows_a`` and of ``rows_b``.

    Chunked over the first operand to bound peak memory.
    """
    out = np.empty((rows_a.shape[0], rows_b.shape[0]))
    for start in range(0, rows_a.shape[0], chunk):
        block = rows_a[start : start + chunk]
        out[start : start + chunk] = 0.5 * np.abs(
            block[:, None, :] - rows_b[None, :, :]
        ).sum(axis=2)
    return out


def learn_empirical(samples: Sequence[int], domain_size: int) -> FiniteDistribution:
    """Empirical frequency distribution of a sample over a finite domain."""
    arr = np.asarray(samples, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("cannot learn from an empty sample")
    if arr.min() < 0 or arr.max() >= domain_size:
        raise ValueError("sample indices outside the domain")
    counts = np.bincount(arr, minlength=domain_size).astype(np.float64)
    return FiniteDistribution(counts / arr.size)


def learning_sample_size(domain_size: int, accuracy: float, failure: float, c: float = 1.0) -> int:
    """Samples sufficient to learn a distribution to TV ``accuracy``
    with probability ``1 - failure``: c * (|X| + log(1/failure)) / accuracy^2."""
    if accuracy <= 0 or not 0 < failure < 1:
        raise ValueError("accuracy must be positive and failure in (0, 1)")
    return int(math.ceil(c * (domain_size + math.log(1.0 / failure)) / accuracy**2))


@dataclass(frozen=True)
class HypergeometricParams:
    """Draws without replacement: population N, successes K, draws n."""

    population: int
    successes: int
    draws: int

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ValueError("population must be positive")
        if not 0 <= self.successes <= self.population:
            raise ValueError("successes must lie in [0, population]")
        if not 0 <= self.draws <= self.population:
            raise ValueError("draws must lie in [0, population]")

    @property
    def mean(self) -> float:
        return self.draws * self.successes / self.population

    @property
    def variance(self) -> float:
        n, K, N = self.draws, self.successes, self.population
        if N == 1:
            return 0.0
        p = K / N
        return n * p * (1.0 - p) * (N - n) / (N - 1)


def _log_binom(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def hypergeom_pmf(params: HypergeometricParams, k: int) -> float:
    """P[k successes in the draw], computed with log-factorials."""
    N, K, n = params.population, params.successes, params.draws
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, draws={n}]")
    if k > K or n - k > N - K:
        return 0.0
    log_p = _log_binom(K, k) + _log_binom(N - K, n - k) - _log_binom(N, n)
    return math.exp(log_p)


def hypergeom_pmf_vector(params: HypergeometricParams) -> np.ndarray:
    """pmf over k = 0..draws as a vector."""
    return np.array([hypergeom_pmf(params, k) for k in range(params.draws + 1)])


def hypergeom_median(params: HypergeometricParams) -> int:
    """Least k with CDF >= 1/2."""
    cdf = 0.0
    for k in range(params.draws + 1):
        cdf += hypergeom_pmf(params, k)
        if cdf >= 0.5:
            return k
    return params.draws


def hypergeom_median_near_mean(params: HypergeometricParams) -> bool:
    """True iff the median is floor(mean) or ceil(mean)."""
    med = hypergeom_median(params)
    mu = params.mean
    return med in (math.floor(mu), math.ceil(mu))


def logconcave_mode_bound_holds(params: HypergeometricParams) -> bool:
    """True iff max_k pmf(k) <= 1/sqrt(1 + variance), with float slack."""
    if params.population < 2:
        raise ValueError("population must be at least 2")
    mode_mass = float(hypergeom_pmf_vector(params).max())
    return mode_mass <= 1.0 / math.sqrt(1.0 + params.variance) + 1e-12
