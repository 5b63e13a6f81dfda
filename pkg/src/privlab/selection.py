"""Private selection and the replicability-to-DP reduction.

``pick_heavy`` releases the most frequent element of a multiset only when
a noisy max-frequency clears a 0.7 n threshold, returning a bottom
sentinel otherwise; its output law given the counts is closed form, which
the tabular instantiations below use for exact privacy audits.
``rep_to_dp`` turns a replicable algorithm into a private one by running
it on disjoint fresh samples grouped by shared randomness and selecting
among the per-group heavy hitters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import RegimeError
from .mechanisms import SampledMechanism, TabularMechanism, all_datasets
from .seeding import derive_rng, derive_seed


def laplace_noise(scale: float, rng: np.random.Generator | int) -> float:
    """One seeded draw from the zero-centered Laplace via the inverse CDF."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = derive_rng(rng, "laplace")
    p = min(max(float(rng.random()), 1e-300), 1.0 - 1e-16)
    if p < 0.5:
        return scale * math.log(2.0 * p)
    return -scale * math.log(2.0 * (1.0 - p))


def laplace_tail(threshold: float, scale: float) -> float:
    """P[Lap(scale) > threshold], exact."""
    if threshold >= 0:
        return 0.5 * math.exp(-threshold / scale)
    return 1.0 - 0.5 * math.exp(threshold / scale)


def _counts(values: Sequence[int], output_size: Optional[int]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("multiset must be nonempty")
    if arr.min() < 0:
        raise ValueError("output indices must be nonnegative")
    size = int(arr.max()) + 1 if output_size is None else output_size
    if arr.max() >= size:
        raise ValueError("output index outside the declared output space")
    return np.bincount(arr, minlength=size)


@dataclass(frozen=True)
class SelectionResult:
    value: int
    low_confidence: bool


def dp_select(values: Sequence[int], epsilon: float, delta: float,
              seed: int | np.random.Generator, output_size: int | None = None
              ) -> SelectionResult:
    """Stability-based selection: output the most frequent element, with a
    low-confidence flag when the noisy runner-up gap fails the threshold.

    Under the promise that the winner leads by at least 0.2 n with
    n >= C log(1/delta)/eps, the flag stays clear with probability at
    least 1 - delta. (A probability-1 variant exists in the literature;
    this implementation deliberately settles for 1 - delta.)
    """
    if epsilon <= 0 or not 0 < delta < 1:
        raise ValueError("need epsilon > 0 and delta in (0, 1)")
    counts = _counts(values, output_size)
    order = np.argsort(-counts, kind="stable")
    winner = int(order[0])
    gap = float(counts[order[0]] - (counts[order[1]] if counts.size > 1 else 0))
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "dp-select")
    noisy = gap + laplace_noise(2.0 / epsilon, rng)
    threshold = 2.0 * math.log(1.0 / delta) / epsilon + 2.0
    return SelectionResult(winner, noisy <= threshold)


def dp_select_regime_size(epsilon: float, delta: float, c: float = 1.0) -> int:
    """Multiset size for the gap promise: c * log(1/delta) / epsilon."""
    return int(math.ceil(c * math.log(1.0 / delta) / epsilon))


@dataclass(frozen=True)
class SelectionOutcome:
    """A selected output index, or the bottom sentinel (value None)."""

    value: Optional[int]
    low_confidence: bool = False

    @property
    def is_bot(self) -> bool:
        return self.value is None


def pick_heavy(values: Sequence[int], epsilon: float, delta: float,
               seed: int | np.random.Generator, output_size: int | None = None
               ) -> SelectionOutcome:
    """Release the most frequent element only if the Laplace-noised max
    frequency exceeds 0.7 n; otherwise return bottom.

    The pair (noisy frequency, selection) makes the whole procedure
    (2 eps, 2 delta)-DP. With n >= C (log(1/beta) + log(1/delta))/eps:
    a 0.6 n-heavy element is the only possible non-bottom output, a
    0.8 n-heavy element is returned with probability >= 1 - beta, and
    with no 0.6 n-heavy element bottom is returned with probability
    >= 1 - beta.
    """
    counts = _counts(values, output_size)
    n = int(counts.sum())
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "pick-heavy")
    noisy_max = float(counts.max()) + laplace_noise(1.0 / epsilon, rng)
    selected = dp_select(values, epsilon, delta, rng, output_size)
    if noisy_max > 0.7 * n:
        return SelectionOutcome(selected.value, selected.low_confidence)
    return SelectionOutcome(None, selected.low_confidence)


def pick_heavy_regime_size(epsilon: float, beta: float, delta: float,
                           c: float = 1.0) -> int:
    return int(math.ceil(c * (math.log(1.0 / beta) + math.log(1.0 / delta))
                         / epsilon))


def pick_heavy_row(counts: np.ndarray, epsilon: float) -> np.ndarray:
    """Exact output law of pick_heavy given the counts; the last index is
    the bottom sentinel."""
    counts = np.asarray(counts)
    n = int(counts.sum())
    winner = int(np.argmax(counts))
    pass_prob = laplace_tail(0.7 * n - float(counts.max()), 1.0 / epsilon)
    row = np.zeros(counts.size + 1)
    row[winner] = pass_prob
    row[-1] = 1.0 - pass_prob
    return row


def pick_heavy_tabular(alphabet_size: int, n: int, epsilon: float) -> TabularMechanism:
    """Tabular instantiation of pick_heavy on ordered n-tuples over the
    output alphabet, for exact neighbor scans. Output space is the
    alphabet plus a final bottom index."""
    datasets = all_datasets(alphabet_size, n)
    rows = np.empty((datasets.shape[0], alphabet_size + 1))
    for i in range(datasets.shape[0]):
        counts = np.bincount(datasets[i], minlength=alphabet_size)
        rows[i] = pick_heavy_row(counts, epsilon)
    return TabularMechanism(alphabet_size, n, alphabet_size + 1, rows)


# ---------------------------------------------------------------------------
# Renyi selection

def _exp_mech_probs(counts: np.ndarray, budget: float) -> np.ndarray:
    scores = budget * counts.astype(np.float64) / 2.0
    scores -= scores.max()
    weights = np.exp(scores)
    return weights / weights.sum()


def rdp_select_copies(beta: float, c: float = 3.0) -> int:
    """Number of parallel copies: smallest odd k >= c * ln(1/beta)."""
    k = max(1, math.ceil(c * math.log(1.0 / beta)))
    return k if k % 2 == 1 else k + 1


def rdp_select(values: Sequence[int], epsilon: float, beta: float,
               seed: int | np.random.Generator, output_size: int | None = None,
               k: int | None = None) -> int:
    """Majority vote over k exponential-mechanism selections, each at pure
    budget eps/k. Pure DP composition makes the k-tuple eps-DP, hence the
    voted output (2, eps)-Renyi-DP.

    With the winner leading by at least 0.2 n and n large enough for the
    per-copy budget, the true winner is returned with probability at
    least 1 - beta.
    """
    if epsilon <= 0 or not 0 < beta < 1:
        raise ValueError("need epsilon > 0 and beta in (0, 1)")
    counts = _counts(values, output_size)
    if k is None:
        k = rdp_select_copies(beta)
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "rdp-select")
    probs = _exp_mech_probs(counts, epsilon / k)
    draws = rng.choice(counts.size, size=k, p=probs)
    tallies = np.bincount(draws, minlength=counts.size)
    return int(np.argmax(tallies))


def rdp_select_regime_size(epsilon: float, beta: float, output_size: int,
                           c: float = 2.0) -> int:
    """Multiset size making each eps/k-budget copy reliable:
    c * k * (log|Y| + log(1/beta)) / (0.1 * eps)."""
    k = rdp_select_copies(beta)
    return int(math.ceil(c * k * (math.log(output_size) + math.log(1.0 / beta))
                         / (0.1 * epsilon)))


def rdp_select_row(counts: np.ndarray, epsilon: float, k: int) -> np.ndarray:
    """Exact output law of rdp_select given the counts."""
    counts = np.asarray(counts)
    probs = _exp_mech_probs(counts, epsilon / k)
    size = counts.size
    row = np.zeros(size)
    for profile in np.ndindex(*([size] * k)):
        weight = math.prod(probs[list(profile)])
        tallies = np.bincount(np.asarray(profile), minlength=size)
        row[int(np.argmax(tallies))] += weight
    return row


def rdp_select_tabular(alphabet_size: int, n: int, epsilon: float,
                       k: int) -> TabularMechanism:
    datasets = all_datasets(alphabet_size, n)
    rows = np.empty((datasets.shape[0], alphabet_size))
    for i in range(datasets.shape[0]):
        counts = np.bincount(datasets[i], minlength=alphabet_size)
        rows[i] = rdp_select_row(counts, epsilon, k)
    return TabularMechanism(alphabet_size, n, alphabet_size, rows)


# ---------------------------------------------------------------------------
# Replicability

@dataclass(frozen=True)
class ReplicabilityReport:
    rho: float
    tau: float
    fraction_good: float
    standard_error: float
    per_seed_top_frequency: tuple[float, ...]
    passed: bool

    def to_json(self) -> dict:
        return {"rho": self.rho, "tau": self.tau,
                "fraction_good": self.fraction_good,
                "standard_error": self.standard_error,
                "per_seed_top_frequency": list(self.per_seed_top_frequency),
                "passed": self.passed}


def check_replicability(mechanism: SampledMechanism, dist, rho: float,
                        tau: float, num_seeds: int = 50,
                        trials_per_seed: int = 200, seed: int = 0
                        ) -> ReplicabilityReport:
    """Estimate, for each shared random string, how concentrated the
    output is over fresh data; a string is tau-good when one canonical
    output appears with frequency >= 1 - tau. Passes when the good
    fraction covers 1 - rho up to three standard errors."""
    top_freqs = []
    good = 0
    for r in range(num_seeds):
        mech_seed = derive_seed(seed, "replicability-string", r)
        data_rng = derive_rng(seed, "replicability-data", r)
        outputs = np.empty(trials_per_seed, dtype=np.int64)
        for t in range(trials_per_seed):
            s = tuple(int(x) for x in dist.sample(data_rng, mechanism.sample_size))
            outputs[t] = mechanism.sample(s, mech_seed)
        top = float(np.bincount(outputs).max() / trials_per_seed)
        top_freqs.append(top)
        if top >= 1.0 - tau:
            good += 1
    fraction = good / num_seeds
    se = math.sqrt(max(fraction * (1.0 - fraction), 1e-12) / num_seeds)
    return ReplicabilityReport(rho, tau, fraction, se, tuple(top_freqs),
                               fraction >= 1.0 - rho - 3.0 * se)


# ---------------------------------------------------------------------------
# Replicability to DP

def rep_to_dp_group_sizes(epsilon: float, delta: float, beta: float,
                          k_mult: float = 3.0, l_mult: float = 3.0
                          ) -> tuple[int, int]:
    """Seed groups k = k_mult * ln(1/beta) and fresh samples per group
    ell = l_mult * ln(1/(beta*delta)) / epsilon."""
    k = max(1, math.ceil(k_mult * math.log(1.0 / beta)))
    ell = max(1, math.ceil(l_mult * math.log(1.0 / (beta * delta)) / epsilon))
    return k, ell


def rep_to_dp_privacy_ell(epsilon: float, delta: float) -> int:
    """Per-group sample count at which the group selection is honestly
    (eps/2 * 2, delta/2 * 2)-DP: an argmax flip sits at least
    0.2*ell - 1 counts below the release threshold, so its crossing mass
    0.5 exp(-(eps/2)(0.2 ell - 1)) must be at most delta."""
    return int(math.ceil(10.0 * math.log(1.0 / (2.0 * delta)) / epsilon + 5.0))


def partition_indices(k: int, ell: int, n: int) -> list[list[tuple[int, int]]]:
    """Disjoint index ranges: group i, slot j covers
    [(i*ell + j)*n, (i*ell + j + 1)*n)."""
    return [[((i * ell + j) * n, (i * ell + j + 1) * n) for j in range(ell)]
            for i in range(k)]


def rep_to_dp(mechanism: SampledMechanism, epsilon: float, delta: float,
              beta: float, k: int | None = None, ell: int | None = None,
              check_regime: bool = True) -> SampledMechanism:
    """Reduce a (0.1, 0.1)-replicable algorithm to an (eps, delta)-DP one.

    The returned mechanism takes k*ell*n samples: each of k shared random
    strings gets ell disjoint fresh n-samples, the per-string outputs are
    fed to pick_heavy at (eps/2, delta/2), and a uniformly random
    non-bottom result is released (a uniform output if all are bottom).
    A neighboring input changes one slot of one group, so the release is
    (eps, delta)-DP by the pick_heavy guarantee plus postprocessing.
    Correctness target: failure at most 5*beta on tasks the base
    algorithm solves with failure beta.
    """
    if k is None or ell is None:
        k_auto, ell_auto = rep_to_dp_group_sizes(epsilon, delta, beta)
        k = k_auto if k is None else k
        if ell is None:
            ell = max(ell_auto, rep_to_dp_privacy_ell(epsilon, delta))
    regime_ell = max(pick_heavy_regime_size(epsilon / 2.0, beta, delta / 2.0),
                     rep_to_dp_privacy_ell(epsilon, delta))
    if check_regime and ell < regime_ell:
        raise RegimeError(
            f"ell={ell} below the per-group selection regime {regime_ell}; "
            "pass check_regime=False to run anyway"
        )
    n = mechanism.sample_size
    m = k * ell * n
    ranges = partition_indices(k, ell, n)
    out_size = mechanism.output_size

    def sampler(entries: tuple[int, ...], seed_val: int) -> int:
        results = []
        for i in range(k):
            r_i = derive_seed(seed_val, "group-string", i)
            outputs = [mechanism.sample(entries[a:b], r_i) for a, b in ranges[i]]
            outcome = pick_heavy(outputs, epsilon / 2.0, delta / 2.0,
                                 derive_rng(seed_val, "group-select", i),
                                 output_size=out_size)
            if not outcome.is_bot:
                results.append(outcome.value)
        final_rng = derive_rng(seed_val, "final-choice")
        if results:
            return int(results[int(final_rng.integers(len(results)))])
        return int(final_rng.integers(out_size))

    return SampledMechanism(mechanism.domain_size, m, out_size, sampler)


def majority_mechanism(domain_size: int, sample_size: int) -> SampledMechanism:
    """Deterministic majority vote (lowest index on ties); the canonical
    replicable baseline for heavy-coin identification."""

    def sampler(entries: tuple[int, ...], seed_val: int) -> int:
        counts = np.bincount(np.asarray(entries), minlength=domain_size)
        return int(np.argmax(counts))

    return SampledMechanism(domain_size, sample_size, domain_size, sampler)


def fresh_noise_mechanism(domain_size: int, sample_size: int,
                          output_size: int) -> SampledMechanism:
    """Ignores its input structure and hashes (dataset, seed) to a
    pseudo-uniform output; nothing is ever heavy across fresh samples."""

    def sampler(entries: tuple[int, ...], seed_val: int) -> int:
        return derive_seed(seed_val, "noise", entries) % output_size

    return SampledMechanism(domain_size, sample_size, output_size, sampler)
