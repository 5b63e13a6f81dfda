"""Versioned mechanism catalog for reproducible audits.

Micro entries are fully tabular at one shared scale (|X| = 2, n = 8) so
every measure can be evaluated exactly on every entry. Reconstruction
entries live at the high-entropy scale the blatant-non-privacy definition
requires (|X| >= 100 n^2) as seeded black boxes with structure-aware
adversaries and construction-backed measure values. Attack entries sit at
the tournament scale (|X| = 50, n = 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .finite_prob import FiniteDistribution
from .measures import heavy_count_threshold
from .mechanisms import (
    Preprocessor,
    SampledMechanism,
    TabularMechanism,
    all_datasets,
    constant_mechanism,
    coordinate_mechanism,
    dataset_index,
    first_k_mechanism,
    identity_mechanism,
    index_dataset,
    randomized_response_mechanism,
    symmetrize,
)
from .selection import pick_heavy_tabular

CATALOG_VERSION = "1"

MICRO_DOMAIN = 2
MICRO_N = 8


def noisy_count_mechanism(domain_size: int, sample_size: int,
                          epsilon: float) -> TabularMechanism:
    """Count of element 0 plus two-sided geometric noise, clamped to
    [0, n]. The count has replacement sensitivity 1 and the noise ratio is
    e^eps per unit, so the mechanism is (eps, 0)-DP exactly."""
    n = sample_size
    r = math.exp(-epsilon)
    kappa = (1.0 - r) / (1.0 + r)
    datasets = all_datasets(domain_size, n)
    rows = np.zeros((datasets.shape[0], n + 1))
    for i in range(datasets.shape[0]):
        c = int((datasets[i] == 0).sum())
        for y in range(n + 1):
            d = abs(y - c)
            if y == 0 or y == n:
                rows[i, y] = (1.0 / (1.0 + r)) if d == 0 else (r**d / (1.0 + r))
            else:
                rows[i, y] = kappa * r**d
    return TabularMechanism(domain_size, n, n + 1, rows)


def heavy_leak_mechanism(domain_size: int, sample_size: int) -> TabularMechanism:
    """Output the dataset itself when one element fills 60% of it,
    otherwise a fixed empty marker (output index 0)."""
    datasets = all_datasets(domain_size, sample_size)
    n_rows = datasets.shape[0]
    rows = np.zeros((n_rows, n_rows + 1))
    threshold = heavy_count_threshold(sample_size)
    for i in range(n_rows):
        counts = np.bincount(datasets[i], minlength=domain_size)
        if counts.max() >= threshold:
            rows[i, i + 1] = 1.0
        else:
            rows[i, 0] = 1.0
    return TabularMechanism(domain_size, sample_size, n_rows + 1, rows)


def heavy_majority_mechanism(domain_size: int, sample_size: int) -> TabularMechanism:
    """Output 1 + majority element when the dataset is heavy, else the
    fixed marker 0; the order-invariant heavy-gated workhorse."""
    datasets = all_datasets(domain_size, sample_size)
    rows = np.zeros((datasets.shape[0], domain_size + 1))
    threshold = heavy_count_threshold(sample_size)
    for i in range(datasets.shape[0]):
        counts = np.bincount(datasets[i], minlength=domain_size)
        if counts.max() >= threshold:
            rows[i, 1 + int(np.argmax(counts))] = 1.0
        else:
            rows[i, 0] = 1.0
    return TabularMechanism(domain_size, sample_size, domain_size + 1, rows)


def set_leak_mechanism(domain_size: int, sample_size: int) -> TabularMechanism:
    """Output the sorted input dataset (the unordered multiset); maximally
    TV-unstable among order-invariant mechanisms."""
    datasets = all_datasets(domain_size, sample_size)
    sorted_ds = np.sort(datasets, axis=1)
    out_index = np.array([dataset_index(row, domain_size) for row in sorted_ds])
    codes, compact = np.unique(out_index, return_inverse=True)
    rows = np.zeros((datasets.shape[0], codes.size))
    rows[np.arange(datasets.shape[0]), compact] = 1.0
    return TabularMechanism(domain_size, sample_size, codes.size, rows)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    build: Callable[[], TabularMechanism] = field(repr=False)
    params: dict = field(default_factory=dict)
    notes: str = ""


def micro_catalog() -> dict[str, CatalogEntry]:
    """Tabular entries at the shared micro scale, keyed by name."""
    X, n = MICRO_DOMAIN, MICRO_N
    entries = [
        CatalogEntry("constant", lambda: constant_mechanism(
            X, n, FiniteDistribution([0.5, 0.5])), {"domain": X, "n": n}),
        CatalogEntry("identity", lambda: identity_mechanism(X, n),
                     {"domain": X, "n": n}),
        CatalogEntry("first_half", lambda: first_k_mechanism(X, n, n // 2),
                     {"domain": X, "n": n, "k": n // 2}),
        CatalogEntry("first_one", lambda: first_k_mechanism(X, n, 1),
                     {"domain": X, "n": n, "k": 1}),
        CatalogEntry("sym_first_one",
                     lambda: symmetrize(first_k_mechanism(X, n, 1)),
                     {"domain": X, "n": n},
                     "uniformly random input element"),
        CatalogEntry("randomized_response_tight",
                     lambda: randomized_response_mechanism(X, 0.1, n),
                     {"domain": X, "n": n, "epsilon": 0.1}),
        CatalogEntry("randomized_response_private",
                     lambda: randomized_response_mechanism(X, 0.04, n),
                     {"domain": X, "n": n, "epsilon": 0.04},
                     "below the single-parameter DP privateness threshold"),
        CatalogEntry("noisy_count", lambda: noisy_count_mechanism(X, n, 2.0),
                     {"domain": X, "n": n, "epsilon": 2.0}),
        CatalogEntry("heavy_leak", lambda: heavy_leak_mechanism(X, n),
                     {"domain": X, "n": n}),
        CatalogEntry("heavy_majority", lambda: heavy_majority_mechanism(X, n),
                     {"domain": X, "n": n}),
        CatalogEntry("pick_heavy", lambda: pick_heavy_tabular(X, n, 2.0),
                     {"alphabet": X, "n": n, "epsilon": 2.0}),
    ]
    return {e.name: e for e in entries}


# ---------------------------------------------------------------------------
# Reconstruction-scale entries

@dataclass(frozen=True)
class BlatantEntry:
    """A mechanism at the high-entropy scale with its adversaries and the
    measure values backing its privateness decisions."""

    name: str
    mechanism: SampledMechanism
    sample_size: int
    source: FiniteDistribution
    adversaries: dict[str, Callable[[int], tuple[int, ...]]] = field(repr=False)
    measure_values: dict[str, float] = field(default_factory=dict)
    value_basis: str = ""


def _rr_single_rows(domain_size: int, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    keep = math.exp(epsilon) / (math.exp(epsilon) + domain_size - 1)
    other = (1.0 - keep) / (domain_size - 1)
    row_a = np.full(domain_size, other)
    row_a[0] = keep
    row_b = np.full(domain_size, other)
    row_b[1] = keep
    return row_a, row_b


def rr_pair_delta_curve(domain_size: int, epsilon: float) -> Callable[[float], float]:
    """delta(eps') for per-coordinate randomized response under
    single-coordinate replacement; every neighbor pair is congruent to the
    one-coordinate worst pair, whose shared factors cancel."""
    row_a, row_b = _rr_single_rows(domain_size, epsilon)

    def curve(eps_prime: float) -> float:
        return float(np.clip(row_a - math.exp(eps_prime) * row_b, 0.0, None).sum())

    return curve


def rr_pair_rdp(domain_size: int, epsilon: float) -> float:
    from .dp_analysis import _renyi_vectors

    row_a, row_b = _rr_single_rows(domain_size, epsilon)
    return _renyi_vectors(row_a, row_b, 2.0)


def blatant_catalog(seed: int = 0) -> dict[str, BlatantEntry]:
    """Entries at |X| = 100 n^2 so the uniform source meets the entropy
    ceiling exactly."""
    from .composition import ALPHA_DP
    from .measures import dp_crossing_epsilon

    n2 = 2
    x2 = 100 * n2 * n2
    uniform2 = FiniteDistribution(np.full(x2, 1.0 / x2))

    def identity_sampler(entries, seed_val):
        return dataset_index(entries, x2)

    identity_pair = SampledMechanism(x2, n2, x2**n2, identity_sampler)

    def first_half_sampler(entries, seed_val):
        return int(entries[0])

    first_half_pair = SampledMechanism(x2, n2, x2, first_half_sampler)

    rr_eps = 0.1
    keep = math.exp(rr_eps) / (math.exp(rr_eps) + x2 - 1)

    def rr_sampler(entries, seed_val):
        rng = np.random.default_rng(seed_val)
        out = 0
        for e in entries:
            if rng.random() < keep:
                y = int(e)
            else:
                y = int(rng.integers(x2 - 1))
                y = y if y < e else y + 1
            out = out * x2 + y
        return out

    rr_pair = SampledMechanism(x2, n2, x2**n2, rr_sampler)

    curve = rr_pair_delta_curve(x2, rr_eps)
    rr_eps_star = dp_crossing_epsilon(curve, n2)
    rr_p_dp = (rr_eps_star / ALPHA_DP) ** 1.25
    rr_p_rdp = math.sqrt(rr_pair_rdp(x2, rr_eps))

    n8 = 8
    x8 = 100 * n8 * n8
    uniform8 = FiniteDistribution(np.full(x8, 1.0 / x8))
    threshold8 = heavy_count_threshold(n8)

    def heavy_leak_sampler(entries, seed_val):
        counts = np.bincount(np.asarray(entries), minlength=x8)
        if counts.max() >= threshold8:
            return 1 + dataset_index(entries, x8)
        return 0

    heavy_leak8 = SampledMechanism(x8, n8, x8**n8 + 1, heavy_leak_sampler)

    def decode_pair(y):
        return index_dataset(y, x2, n2)

    def echo_first(y):
        return (y, y)

    def decode_heavy(y):
        if y == 0:
            return tuple(range(n8))
        return index_dataset(y - 1, x8, n8)

    return {
        "identity_pair": BlatantEntry(
            "identity_pair", identity_pair, n2, uniform2,
            {"decode": decode_pair},
            {"p_all": 0.0, "p_half": 2.0, "p_junta": 2.0, "p_sqrt_junta": math.sqrt(2.0)},
            "construction: point mass on the input dataset"),
        "first_half_pair": BlatantEntry(
            "first_half_pair", first_half_pair, n2, uniform2,
            {"echo": echo_first},
            {"p_all": 0.0, "p_half": 0.0, "p_junta": 1.0, "p_sqrt_junta": 1.0},
            "construction: sampler reads entries[0] only"),
        "rr_pair": BlatantEntry(
            "rr_pair", rr_pair, n2, uniform2,
            {"decode": decode_pair},
            {"p_all": 0.0, "p_dp": rr_p_dp, "p_rdp": rr_p_rdp,
             "p_half": 2.0, "p_junta": 2.0, "p_sqrt_junta": math.sqrt(2.0)},
            "per-coordinate randomized response; DP values from the exact "
            "one-coordinate worst-pair curve (shared factors cancel)"),
        "heavy_leak_wide": BlatantEntry(
            "heavy_leak_wide", heavy_leak8, n8, uniform8,
            {"decode": decode_heavy},
            {"p_all": 0.0, "p_heavy": 0.0},
            "construction: fixed marker output on every non-heavy dataset"),
    }


# ---------------------------------------------------------------------------
# Attack-scale entries (|X| = 50, n = 2)

ATTACK_DOMAIN = 50
ATTACK_N = 2


def attack_catalog() -> dict[str, CatalogEntry]:
    """Order-invariant tabular mechanisms for the tournament attack; the
    dp-prefixed entries are certified (0.1, alpha^2/n^3)-DP exactly."""
    X, n = ATTACK_DOMAIN, ATTACK_N
    entries = [
        CatalogEntry("set_leak", lambda: set_leak_mechanism(X, n),
                     {"domain": X, "n": n}),
        CatalogEntry("dp_random_coordinate_response",
                     lambda: symmetrize(
                         preprocess_first_coordinate_rr(X, n, 0.1)),
                     {"domain": X, "n": n, "epsilon": 0.1},
                     "randomized response of a uniformly random coordinate"),
        CatalogEntry("dp_noisy_count",
                     lambda: noisy_count_mechanism(X, n, 0.1),
                     {"domain": X, "n": n, "epsilon": 0.1}),
        CatalogEntry("dp_constant",
                     lambda: constant_mechanism(X, n, FiniteDistribution([1.0])),
                     {"domain": X, "n": n}),
    ]
    return {e.name: e for e in entries}


def preprocess_first_coordinate_rr(domain_size: int, sample_size: int,
                                   epsilon: float) -> TabularMechanism:
    """Randomized response applied to the first coordinate only; Y = X."""
    keep = math.exp(epsilon) / (math.exp(epsilon) + domain_size - 1)
    other = (1.0 - keep) / (domain_size - 1)
    single = np.full((domain_size, domain_size), other)
    np.fill_diagonal(single, keep)
    datasets = all_datasets(domain_size, sample_size)
    rows = single[datasets[:, 0]]
    return TabularMechanism(domain_size, sample_size, domain_size, rows)


def manifest() -> dict:
    """Serializable description of every registered entry."""
    return {
        "version": CATALOG_VERSION,
        "micro": {name: {"params": e.params, "notes": e.notes}
                  for name, e in micro_catalog().items()},
        "attack": {name: {"params": e.params, "notes": e.notes}
                   for name, e in attack_catalog().items()},
        "blatant": {name: {"sample_size": e.sample_size,
                           "domain_size": e.mechanism.domain_size,
                           "measure_values": e.measure_values,
                           "value_basis": e.value_basis}
                    for name, e in blatant_catalog().items()},
    }
