"""Total-variation stability, statistical tasks, and equivalence checks.

The stability of a mechanism under a source distribution is the expected
TV distance between its outputs on two i.i.d. samples. Desk-scale
certification of "stable for all distributions" is necessarily grid
based; reports carry the grid they were checked on and are labeled
grid-certified, never universally certified.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, InfeasibleError
from .finite_prob import (
    FiniteDistribution,
    learning_sample_size,
    pairwise_tv,
    tv_vector,
)
from .mechanisms import (
    Preprocessor,
    SampledMechanism,
    TabularMechanism,
    all_datasets,
    dataset_indices,
    preprocess,
    symmetrize,
)
from .seeding import derive_rng, derive_seed

#: Exact stability enumeration guardrail on (|X|^n)^2 pairs.
EXACT_PAIR_GUARDRAIL = 4_000_000

#: Monte Carlo defaults: pair samples and batch size for standard errors.
MC_PAIRS_DEFAULT = 10_000
MC_BATCH = 100


@dataclass(frozen=True)
class StatisticalTask:
    """A family of source distributions with a valid-output predicate."""

    name: str
    domain_size: int
    output_size: int
    family: tuple[FiniteDistribution, ...]
    valid: Callable[[FiniteDistribution, int], bool] = field(repr=False)

    def valid_mask(self, dist: FiniteDistribution) -> np.ndarray:
        return np.array([self.valid(dist, y) for y in range(self.output_size)],
                        dtype=bool)

    def contains(self, dist: FiniteDistribution) -> bool:
        return any(np.allclose(dist.probs, member.probs, atol=1e-12)
                   for member in self.family)

    @classmethod
    def from_valid_sets(cls, name: str, domain_size: int, output_size: int,
                        members: Sequence[tuple[FiniteDistribution, Sequence[int]]]
                        ) -> "StatisticalTask":
        table = {id(dist): frozenset(int(y) for y in valid_outputs)
                 for dist, valid_outputs in members}
        family = tuple(dist for dist, _ in members)

        def valid(dist: FiniteDistribution, y: int) -> bool:
            for member in family:
                if np.allclose(dist.probs, member.probs, atol=1e-12):
                    return y in table[id(member)]
            raise ValueError("distribution not in the task family")

        return cls(name, domain_size, output_size, family, valid)


@dataclass(frozen=True)
class StabilityReport:
    value: float
    mode: str  # "exact" | "monte_carlo"
    standard_error: Optional[float] = None

    def to_json(self) -> dict:
        return {"value": self.value, "mode": self.mode,
                "standard_error": self.standard_error}


def product_weights(dist: FiniteDistribution, sample_size: int) -> np.ndarray:
    """P[S] for every dataset in lexicographic order under D^n."""
    weights = dist.probs
    for _ in range(sample_size - 1):
        weights = (weights[:, None] * dist.probs[None, :]).ravel()
    return weights


def output_law(mechanism: TabularMechanism, dist: FiniteDistribution) -> FiniteDistribution:
    """Distribution of M(S) for S ~ D^n."""
    w = product_weights(dist, mechanism.sample_size)
    return FiniteDistribution(w @ mechanism.rows)


def stab_tv(mechanism: TabularMechanism, dist: FiniteDistribution,
            mode: str = "exact", pairs: int = MC_PAIRS_DEFAULT,
            seed: int = 0) -> StabilityReport:
    """E over S, S' ~ D^n of the TV distance between M(S) and M(S').

    Exact mode enumerates all dataset pairs weighted by the product law;
    Monte Carlo samples pairs and uses exact row distances.
    """
    if dist.support_size != mechanism.domain_size:
        raise DimensionError("distribution support must match the mechanism domain")
    if mode == "exact":
        n_rows = mechanism.num_rows
        if n_rows * n_rows > EXACT_PAIR_GUARDRAIL:
            raise InfeasibleError(
                f"{n_rows}^2 dataset pairs exceed the exact enumeration guardrail"
            )
        w = product_weights(dist, mechanism.sample_size)
        live = np.nonzero(w > 0.0)[0]
        tv = pairwise_tv(mechanism.rows[live], mechanism.rows[live])
        value = float(w[live] @ tv @ w[live])
        return StabilityReport(value, "exact", None)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    rng = derive_rng(seed, "stab-tv")
    batch_means = []
    remaining = pairs
    while remaining > 0:
        b = min(MC_BATCH, remaining)
        left = dataset_indices(
            rng.choice(mechanism.domain_size, size=(b, mechanism.sample_size),
                       p=dist.probs),
            mechanism.domain_size)
        right = dataset_indices(
            rng.choice(mechanism.domain_size, size=(b, mechanism.sample_size),
                       p=dist.probs),
            mechanism.domain_size)
        tvs = 0.5 * np.abs(mechanism.rows[left] - mechanism.rows[right]).sum(axis=1)
        batch_means.append(float(tvs.mean()))
        remaining -= b
    means = np.asarray(batch_means)
    se = float(means.std(ddof=1) / math.sqrt(means.size)) if means.size > 1 else None
    return StabilityReport(float(means.mean()), "monte_carlo", se)


@dataclass(frozen=True)
class GridStabilityReport:
    """Stability checked over an explicit grid of distributions;
    certification is for the grid only."""

    max_value: float
    per_distribution: tuple[float, ...]
    label: str = "grid-certified"

    def to_json(self) -> dict:
        return {"max_value": self.max_value,
                "per_distribution": list(self.per_distribution),
                "label": self.label}


def stab_tv_grid(mechanism: TabularMechanism,
                 grid: Sequence[FiniteDistribution]) -> GridStabilityReport:
    values = tuple(stab_tv(mechanism, d, "exact").value for d in grid)
    return GridStabilityReport(max(values), values)


def _set_rows(mechanism: TabularMechanism, subsets: Sequence[tuple[int, ...]]) -> np.ndarray:
    idx = dataset_indices(np.asarray(subsets), mechanism.domain_size)
    return mechanism.rows[idx]


def rho_disjoint(mechanism: TabularMechanism, m: int | None = None,
                 mc_pairs: int = MC_PAIRS_DEFAULT, seed: int = 0) -> float:
    """Expected TV distance between outputs on two uniform disjoint
    m-subsets of the domain. The mechanism must be order-invariant.

    Exact by enumeration when C(|X|, m)^2 is small, else Monte Carlo.
    """
    m = mechanism.sample_size if m is None else m
    size = mechanism.domain_size
    if size < 2 * m:
        raise ValueError(f"|X|={size} must be at least 2m={2 * m}")
    n_sets = math.comb(size, m)
    if n_sets * n_sets <= 10**6:
        subsets = list(itertools.combinations(range(size), m))
        rows = _set_rows(mechanism, subsets)
        masks = np.zeros((len(subsets), size), dtype=np.int64)
        for i, s in enumerate(subsets):
            masks[i, list(s)] = 1
        disjoint = (masks @ masks.T) == 0
        tv = pairwise_tv(rows, rows)
        count = int(disjoint.sum())
        if count == 0:
            raise ValueError("no disjoint pairs at this (|X|, m)")
        return float(tv[disjoint].sum() / count)
    rng = derive_rng(seed, "rho-disjoint")
    total = 0.0
    for _ in range(mc_pairs):
        both = rng.choice(size, size=2 * m, replace=False)
        row_a = mechanism.row(tuple(sorted(both[:m])))
        row_b = mechanism.row(tuple(sorted(both[m:])))
        total += tv_vector(row_a, row_b)
    return total / mc_pairs


def failure_probability(mechanism: TabularMechanism, task: StatisticalTask,
                        dist: FiniteDistribution) -> float:
    """P over S ~ D^n and the mechanism's randomness that the output is
    not a valid response for D."""
    if not task.contains(dist):
        raise ValueError("distribution is not in the task family")
    if mechanism.output_size != task.output_size:
        raise DimensionError("mechanism and task output sizes differ")
    invalid = ~task.valid_mask(dist)
    w = product_weights(dist, mechanism.sample_size)
    return float(w @ (mechanism.rows @ invalid.astype(np.float64)))


@dataclass(frozen=True)
class EquivalenceReport:
    beta: float
    entries: tuple[dict, ...]
    max_other_failure: float

    def to_json(self) -> dict:
        return {"beta": self.beta, "entries": list(self.entries),
                "max_other_failure": self.max_other_failure}


def equivalent_on(mechanism: TabularMechanism, other: TabularMechanism,
                  tasks: Sequence[StatisticalTask], beta: float) -> EquivalenceReport:
    """For every (task, distribution) the first mechanism solves at level
    beta, report the second mechanism's failure probability."""
    if mechanism.output_size != other.output_size:
        raise DimensionError("mechanisms must share an output space")
    if not tasks:
        raise ValueError("task family must be nonempty")
    entries = []
    worst = 0.0
    for task in tasks:
        for dist in task.family:
            base = failure_probability(mechanism, task, dist)
            if base > beta:
                continue
            transformed = failure_probability(other, task, dist)
            worst = max(worst, transformed)
            entries.append({"task": task.name,
                            "dist": dist.probs.tolist(),
                            "failure": base,
                            "other_failure": transformed})
    return EquivalenceReport(beta, tuple(entries), worst)


# ---------------------------------------------------------------------------
# Small-domain TV stabilizer

def stabilizer_sample_size(domain_size: int, sample_size: int, rho: float,
                           beta: float, c: float = 1.0) -> int:
    """Input size for the learn-then-resimulate stabilizer: enough samples
    to learn the source to TV tau/n with failure tau, tau = beta*rho/4."""
    tau = beta * rho / 4.0
    return learning_sample_size(domain_size, tau / sample_size, tau, c)


def stabilized_output_distribution(mechanism: TabularMechanism,
                                   histogram: np.ndarray) -> np.ndarray:
    """Exact output law of the stabilizer given the input's histogram:
    the empirical distribution's n-fold product mixed through the table."""
    counts = np.asarray(histogram, dtype=np.float64)
    sim = FiniteDistribution(counts / counts.sum())
    w = product_weights(sim, mechanism.sample_size)
    return w @ mechanism.rows


def make_tv_stable_small_domain(mechanism: TabularMechanism, rho: float,
                                beta: float, seed: int,
                                m: int | None = None) -> SampledMechanism:
    """Learn-then-resimulate stabilizer.

    The returned mechanism takes an m-sample, learns the empirical source
    estimate from it, draws a fresh n-dataset from that estimate, and runs
    the base mechanism on it. At the prescribed m it is rho-TV-stable and
    (beta, 2*beta)-equivalent to the base mechanism; both properties are
    checked statistically by the harness, not per call.
    """
    bound = stabilizer_sample_size(mechanism.domain_size,
                                   mechanism.sample_size, rho, beta)
    if m is None:
        m = bound
    elif m < bound:
        warnings.warn(
            f"stabilizer input size {m} is below the prescribed bound {bound}; "
            "the stability target is not guaranteed", stacklevel=2)

    domain = mechanism.domain_size
    n = mechanism.sample_size

    def sampler(entries: tuple[int, ...], seed_val: int) -> int:
        counts = np.bincount(np.asarray(entries), minlength=domain)
        sim = counts / counts.sum()
        rng = np.random.default_rng(seed_val)
        fresh = tuple(int(v) for v in rng.choice(domain, size=n, p=sim))
        return int(rng.choice(mechanism.output_size, p=mechanism.row(fresh)))

    return SampledMechanism(domain, m, mechanism.output_size, sampler)


def measure_stabilized_stab_tv(mechanism: TabularMechanism,
                               dist: FiniteDistribution, m: int,
                               pairs: int, seed: int) -> StabilityReport:
    """Monte Carlo stability of the stabilizer: histogram pairs are
    sampled, the inner TV is exact via the mixture law."""
    rng = derive_rng(seed, "stabilizer-stab")
    means = []
    done = 0
    while done < pairs:
        b = min(MC_BATCH, pairs - done)
        vals = []
        for _ in range(b):
            h1 = rng.multinomial(m, dist.probs)
            h2 = rng.multinomial(m, dist.probs)
            vals.append(tv_vector(stabilized_output_distribution(mechanism, h1),
                                  stabilized_output_distribution(mechanism, h2)))
        means.append(float(np.mean(vals)))
        done += b
    arr = np.asarray(means)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else None
    return StabilityReport(float(arr.mean()), "monte_carlo", se)


def measure_stabilized_failure(mechanism: TabularMechanism,
                               valid_mask: np.ndarray,
                               dist: FiniteDistribution, m: int,
                               draws: int, seed: int) -> float:
    """Monte Carlo failure probability of the stabilizer against a fixed
    valid-output set; the inner miss mass is exact via the mixture law."""
    rng = derive_rng(seed, "stabilizer-failure")
    invalid = (~np.asarray(valid_mask, dtype=bool)).astype(np.float64)
    total = 0.0
    for _ in range(draws):
        hist = rng.multinomial(m, dist.probs)
        total += float(stabilized_output_distribution(mechanism, hist) @ invalid)
    return total / draws


# ---------------------------------------------------------------------------
# Transferring stability from one distribution to the uniform one

@dataclass(frozen=True)
class TransferReport:
    lhs: float
    best_rhs: float
    mean_rhs: float
    sigma_star: tuple[int, ...]
    holds: bool
    standard_error: float

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "best_rhs": self.best_rhs,
                "mean_rhs": self.mean_rhs, "sigma_star": list(self.sigma_star),
                "holds": self.holds, "standard_error": self.standard_error}


def transfer_stability_gap(mechanism: TabularMechanism, dist: FiniteDistribution,
                           x_prime_size: int, num_sigmas: int,
                           seed: int = 0) -> TransferReport:
    """Search random domain maps for one transferring stability under
    ``dist`` to stability under the uniform distribution on a subdomain.

    Maps sigma get each image drawn i.i.d. from ``dist``; the claim
    checked is best_rhs >= lhs/2 - 3*SE, where lhs is the symmetrized
    mechanism's stability under ``dist`` and rhs is the stability of the
    remapped symmetrized mechanism under Unif(X').
    """
    if not 2 <= x_prime_size <= mechanism.domain_size:
        raise ValueError("x_prime_size must lie in [2, |X|]")
    sym = symmetrize(mechanism)
    lhs = stab_tv(sym, dist, "exact").value
    uniform_prime = FiniteDistribution(
        np.concatenate([np.full(x_prime_size, 1.0 / x_prime_size),
                        np.zeros(mechanism.domain_size - x_prime_size)]))
    rng = derive_rng(seed, "transfer-sigma")
    best = -1.0
    best_sigma: tuple[int, ...] = ()
    values = []
    for _ in range(num_sigmas):
        sigma = tuple(int(v) for v in dist.sample(rng, mechanism.domain_size))
        gamma = Preprocessor(sigma, tuple(range(mechanism.sample_size)))
        value = stab_tv(preprocess(sym, gamma), uniform_prime, "exact").value
        values.append(value)
        if value > best:
            best = value
            best_sigma = sigma
    arr = np.asarray(values)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return TransferReport(lhs, best, float(arr.mean()), best_sigma,
                          best >= lhs / 2.0 - 3.0 * se, se)
