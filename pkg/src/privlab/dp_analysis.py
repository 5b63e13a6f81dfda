"""Exact privacy verification on tabular mechanisms.

Neighboring datasets are ordered tuples differing in exactly one
coordinate (replacement model). For a fixed epsilon the smallest valid
delta has a closed form: the adversarially optimal event for an ordered
neighbor pair (S, S') is {y : P_S(y) > e^eps * P_S'(y)}, so
delta = max over pairs of the positive-part sum. Everything else here
(epsilon search, Renyi divergences, group privacy, witness search) is
built on that scan.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import InfeasibleError
from .finite_prob import TOLERANCE, FiniteDistribution
from .mechanisms import (
    TabularMechanism,
    all_datasets,
    dataset_indices,
    index_dataset,
)
from .seeding import derive_rng

#: Sentinel for "no finite privacy level"; serialized as null + flag.
INFINITY = float("inf")

#: Exhaustive witness search is used when |X|^n * n * |X| is at most this.
WITNESS_EXHAUSTIVE_BUDGET = 10**7


@dataclass(frozen=True)
class Witness:
    """A neighbor pair and event attaining a privacy bound."""

    s: tuple[int, ...]
    s_prime: tuple[int, ...]
    event: tuple[int, ...]

    def to_json(self) -> dict:
        return {"s": list(self.s), "s_prime": list(self.s_prime),
                "event": list(self.event)}


@dataclass(frozen=True)
class DpReport:
    """An (epsilon, delta) certificate, with the witness attaining it."""

    epsilon: float
    delta: float
    witness: Optional[Witness] = None

    def to_json(self) -> dict:
        return {
            "epsilon": None if math.isinf(self.epsilon) else self.epsilon,
            "epsilon_infinite": bool(math.isinf(self.epsilon)),
            "delta": self.delta,
            "witness": self.witness.to_json() if self.witness else None,
        }


def neighbor_pairs(domain_size: int, sample_size: int) -> np.ndarray:
    """All ordered neighbor pairs as an (P, 2) array of dataset ranks.

    For each dataset, each coordinate, each replacement value != current.
    """
    datasets = all_datasets(domain_size, sample_size)
    ranks = dataset_indices(datasets, domain_size)
    pairs = []
    for coord in range(sample_size):
        weight = domain_size ** (sample_size - 1 - coord)
        current = datasets[:, coord]
        for value in range(domain_size):
            mask = current != value
            changed = ranks[mask] + (value - current[mask]) * weight
            pairs.append(np.stack([ranks[mask], changed], axis=1))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(pairs, axis=0)


def _check_feasible(mechanism: TabularMechanism) -> None:
    cost = mechanism.num_rows * mechanism.sample_size * mechanism.domain_size
    if cost * mechanism.output_size > 10**9:
        raise InfeasibleError("neighbor scan too large for exact analysis")


def min_delta_for_epsilon(mechanism: TabularMechanism, epsilon: float) -> DpReport:
    """Smallest delta such that the mechanism is (epsilon, delta)-DP."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    _check_feasible(mechanism)
    pairs = neighbor_pairs(mechanism.domain_size, mechanism.sample_size)
    if pairs.shape[0] == 0:
        return DpReport(epsilon, 0.0, None)
    scale = math.exp(epsilon)
    rows = mechanism.rows
    best_delta = 0.0
    best_pair = None
    chunk = max(1, 4_000_000 // max(1, mechanism.output_size))
    for start in range(0, pairs.shape[0], chunk):
        block = pairs[start : start + chunk]
        gaps = rows[block[:, 0]] - scale * rows[block[:, 1]]
        deltas = np.clip(gaps, 0.0, None).sum(axis=1)
        top = int(np.argmax(deltas))
        if deltas[top] > best_delta:
            best_delta = float(deltas[top])
            best_pair = (int(block[top, 0]), int(block[top, 1]))
    if best_pair is None or best_delta <= TOLERANCE:
        return DpReport(epsilon, max(best_delta, 0.0), None)
    a, b = best_pair
    event = np.nonzero(rows[a] > scale * rows[b])[0]
    witness = Witness(
        index_dataset(a, mechanism.domain_size, mechanism.sample_size),
        index_dataset(b, mechanism.domain_size, mechanism.sample_size),
        tuple(int(y) for y in event),
    )
    return DpReport(epsilon, best_delta, witness)


def _limit_delta(mechanism: TabularMechanism) -> float:
    """delta as epsilon -> infinity: worst mass a pair puts where its
    neighbor puts none."""
    pairs = neighbor_pairs(mechanism.domain_size, mechanism.sample_size)
    if pairs.shape[0] == 0:
        return 0.0
    rows = mechanism.rows
    masses = np.where(rows[pairs[:, 1]] <= 0.0, rows[pairs[:, 0]], 0.0).sum(axis=1)
    return float(masses.max())


def min_epsilon_for_delta(mechanism: TabularMechanism, delta: float,
                          rel_tol: float = 1e-6) -> DpReport:
    """Smallest epsilon such that the mechanism is (epsilon, delta)-DP.

    Binary search; correctness follows from delta being non-increasing in
    epsilon. If even infinite epsilon cannot reach ``delta`` the report
    carries the infinite sentinel.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    _check_feasible(mechanism)
    floor = _limit_delta(mechanism)
    if delta < floor - TOLERANCE:
        return DpReport(INFINITY, delta, None)
    at_zero = min_delta_for_epsilon(mechanism, 0.0)
    if at_zero.delta <= delta + TOLERANCE:
        return DpReport(0.0, at_zero.delta, at_zero.witness)
    pairs = neighbor_pairs(mechanism.domain_size, mechanism.sample_size)
    rows = mechanism.rows
    p, q = rows[pairs[:, 0]], rows[pairs[:, 1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where((p > 0) & (q > 0), np.log(p / np.where(q > 0, q, 1.0)), 0.0)
    hi = max(float(ratios.max(initial=0.0)), 1e-12)
    lo = 0.0
    while hi - lo > rel_tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if min_delta_for_epsilon(mechanism, mid).delta <= delta + TOLERANCE:
            hi = mid
        else:
            lo = mid
    report = min_delta_for_epsilon(mechanism, hi)
    return DpReport(hi, report.delta, report.witness)


def renyi_divergence(p: FiniteDistribution, q: FiniteDistribution,
                     alpha: float) -> float:
    """Order-alpha Renyi divergence D_alpha(p || q), computed in log-space.

    Infinite when p puts mass where q does not.
    """
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    return _renyi_vectors(p.probs, q.probs, alpha)


def _renyi_vectors(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    support = p > 0.0
    if np.any(support & (q <= 0.0)):
        return INFINITY
    if not np.any(support):
        return 0.0
    terms = alpha * np.log(p[support]) - (alpha - 1.0) * np.log(q[support])
    value = float(logsumexp(terms)) / (alpha - 1.0)
    return max(value, 0.0)


def min_rdp_epsilon(mechanism: TabularMechanism, alpha: float) -> float:
    """Max Renyi divergence over all ordered neighbor pairs."""
    _check_feasible(mechanism)
    pairs = neighbor_pairs(mechanism.domain_size, mechanism.sample_size)
    rows = mechanism.rows
    worst = 0.0
    for a, b in pairs:
        value = _renyi_vectors(rows[a], rows[b], alpha)
        if value > worst:
            worst = value
            if math.isinf(worst):
                break
    return worst


def _event_masks(output_size: int, max_events: int, rng: np.random.Generator):
    if output_size <= 12:
        masks = ((np.arange(2**output_size)[:, None]
                  >> np.arange(output_size)[None, :]) & 1).astype(bool)
        return masks
    return rng.random((max_events, output_size)) < 0.5


def rdp_event_bound_holds(mechanism: TabularMechanism, alpha: float,
                          epsilon: float, max_events: int = 10_000,
                          seed: int = 0) -> bool:
    """Check the event-probability consequence of an (alpha, eps)-RDP level:
    P_S(E) <= (e^eps * P_S'(E))^((alpha-1)/alpha) for neighbor pairs.

    Exhaustive over events for |Y| <= 12, else random events. One-way:
    passing does not certify the RDP level itself.
    """
    masks = _event_masks(mechanism.output_size, max_events, derive_rng(seed, "events"))
    pairs = neighbor_pairs(mechanism.domain_size, mechanism.sample_size)
    rows = mechanism.rows
    power = (alpha - 1.0) / alpha
    scale = math.exp(epsilon)
    for start in range(0, pairs.shape[0], 512):
        block = pairs[start : start + 512]
        p_mass = rows[block[:, 0]] @ masks.T
        q_mass = rows[block[:, 1]] @ masks.T
        bound = np.power(scale * q_mass, power)
        if np.any(p_mass > bound + 1e-9):
            return False
    return True


def group_privacy_lb_holds(mechanism: TabularMechanism, epsilon: float,
                           k: int) -> bool:
    """Check the pointwise group-privacy lower bound for a (2, eps)-RDP
    mechanism: P_S'(y) >= P_S(y)^(2^k) * e^(-(2^k - 1) eps) for every
    ordered pair at Hamming distance k and every output."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    datasets = all_datasets(mechanism.domain_size, mechanism.sample_size)
    rows = mechanism.rows
    power = 2**k
    slack = math.exp(-(power - 1) * epsilon)
    for i in range(datasets.shape[0]):
        dist = (datasets != datasets[i]).sum(axis=1)
        targets = np.nonzero(dist == k)[0]
        if targets.size == 0:
            continue
        lower = np.power(rows[i], power) * slack
        if np.any(rows[targets] < lower[None, :] - 1e-9):
            return False
    return True


def dp_violation_witness(mechanism: TabularMechanism, epsilon: float,
                         delta: float, trials: int = 10_000,
                         seed: int = 0) -> Optional[Witness]:
    """Search for a neighbor pair and singleton event violating
    (epsilon, delta)-DP.

    Exhaustive below the probe budget; otherwise random probes over
    (dataset, coordinate, replacement value).
    """
    scale = math.exp(epsilon)
    rows = mechanism.rows
    size = mechanism.num_rows * mechanism.sample_size * mechanism.domain_size
    if size <= WITNESS_EXHAUSTIVE_BUDGET:
        pairs = neighbor_pairs(mechanism.domain_size, mechanism.sample_size)
        chunk = max(1, 2_000_000 // max(1, mechanism.output_size))
        for start in range(0, pairs.shape[0], chunk):
            block = pairs[start : start + chunk]
            gaps = rows[block[:, 0]] - scale * rows[block[:, 1]] - delta
            hits = np.argwhere(gaps > TOLERANCE)
            if hits.size:
                r, y = int(hits[0, 0]), int(hits[0, 1])
                a, b = int(block[r, 0]), int(block[r, 1])
                return Witness(
                    index_dataset(a, mechanism.domain_size, mechanism.sample_size),
                    index_dataset(b, mechanism.domain_size, mechanism.sample_size),
                    (y,),
                )
        return None
    rng = derive_rng(seed, "dp-violation")
    for _ in range(trials):
        s = tuple(int(v) for v in rng.integers(0, mechanism.domain_size,
                                               size=mechanism.sample_size))
        i = int(rng.integers(mechanism.sample_size))
        x = int(rng.integers(mechanism.domain_size))
        if x == s[i]:
            continue
        s_prime = s[:i] + (x,) + s[i + 1 :]
        for a, b in ((s, s_prime), (s_prime, s)):
            gaps = mechanism.row(a) - scale * mechanism.row(b) - delta
            hit = np.argwhere(gaps > TOLERANCE)
            if hit.size:
                return Witness(a, b, (int(hit[0, 0]),))
    return None


def postprocess(mechanism: TabularMechanism, column_map: np.ndarray) -> TabularMechanism:
    """Apply a column-stochastic post-map A (shape |Z| x |Y|) to every row."""
    column_map = np.asarray(column_map, dtype=np.float64)
    if column_map.shape[1] != mechanism.output_size:
        raise ValueError("post-map width must equal the output size")
    rows = mechanism.rows @ column_map.T
    return TabularMechanism(mechanism.domain_size, mechanism.sample_size,
                            column_map.shape[0], rows)
