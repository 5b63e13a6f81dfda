"""The distance-d joint distribution, the random walk to disjoint samples,
and the permutation distinguishing bound.

``sample_jd`` draws ordered pairs of m-subsets at prescribed overlap
distance; ``random_walk`` builds the non-Markovian chain T^0..T^k whose
consecutive pairs all have that pairwise law while the endpoints are a
uniform disjoint pair; ``key_lemma_check`` verifies the resulting lower
bound on how well a uniform domain permutation separates two samples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InfeasibleError
from .finite_prob import tv_vector
from .mechanisms import TabularMechanism, dataset_indices, is_symmetric
from .stability import rho_disjoint
from .seeding import derive_rng

#: Marginal verification enumerates the pair space only when C(|X|, m) is small.
ENUMERATION_GUARDRAIL = 500


def set_dist(a: Sequence[int], b: Sequence[int]) -> int:
    """Number of elements of ``a`` not present in ``b``; for equal-size
    sets this is symmetric and a metric."""
    sa, sb = set(a), set(b)
    if len(sa) != len(a) or len(sb) != len(b):
        raise ValueError("inputs must have distinct elements")
    return len(sa - sb)


@dataclass(frozen=True)
class WalkTrace:
    """Chain of m-subsets with constant step distance and disjoint endpoints."""

    sets: tuple[tuple[int, ...], ...]
    d: int

    @property
    def k(self) -> int:
        return len(self.sets) - 1

    def __post_init__(self) -> None:
        m = len(self.sets[0])
        for i in range(1, len(self.sets)):
            if set_dist(self.sets[i - 1], self.sets[i]) != self.d:
                raise ValueError(f"step {i} has distance != d")
        if set(self.sets[0]) & set(self.sets[-1]):
            raise ValueError("endpoints are not disjoint")
        if any(len(s) != m for s in self.sets):
            raise ValueError("sets must all have the same size")


def sample_jd(domain_size: int, m: int, d: int,
              seed: int | np.random.Generator) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """One draw of an ordered pair (T, T') of m-subsets at distance d,
    uniform over all such pairs.

    T is uniform; T' replaces a uniform d-subset of T with a uniform
    d-subset of the complement.
    """
    if not 0 <= d <= m:
        raise ValueError("d must lie in [0, m]")
    if domain_size < m + d:
        raise ValueError(f"|X|={domain_size} must be at least m+d={m + d}")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "jd")
    t = rng.choice(domain_size, size=m, replace=False)
    removed = rng.choice(t, size=d, replace=False) if d else np.empty(0, dtype=t.dtype)
    complement = np.setdiff1d(np.arange(domain_size), t, assume_unique=False)
    added = rng.choice(complement, size=d, replace=False) if d else removed
    t_prime = np.setdiff1d(t, removed, assume_unique=True)
    t_prime = np.concatenate([t_prime, added]) if d else t
    return tuple(sorted(int(x) for x in t)), tuple(sorted(int(x) for x in t_prime))


def random_walk(s: Sequence[int], s_prime: Sequence[int], domain_size: int,
                seed: int | np.random.Generator) -> WalkTrace:
    """Build the chain T^0..T^k with d = dist(s, s_prime) and k = ceil(m/d).

    Each step rerandomizes exactly d elements: all but the last step remove
    a uniform d-subset of the surviving originals; the last step removes
    every surviving original plus k*d - m uniform non-originals, and every
    step adds fresh elements never seen by the walk. Consecutive pairs are
    then distributed as a uniform-permutation image of (s, s_prime) and the
    endpoints as a uniform disjoint pair.
    """
    m = len(s)
    d = set_dist(s, s_prime)
    if d == 0:
        raise ValueError("inputs must differ (d >= 1)")
    k = math.ceil(m / d)
    if domain_size < m + k * d:
        raise ValueError(
            f"|X|={domain_size} too small: the walk consumes m + k*d = {m + k * d} elements"
        )
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "walk")
    t0 = set(int(x) for x in rng.choice(domain_size, size=m, replace=False))
    seen = set(t0)
    chain = [t0]
    current = t0
    for i in range(1, k + 1):
        survivors = t0 & current
        if i < k:
            removed = set(int(x) for x in rng.choice(sorted(survivors), size=d,
                                                     replace=False))
        else:
            extra = k * d - m
            removed = set(survivors)
            if extra:
                pool = sorted(current - t0)
                removed |= set(int(x) for x in rng.choice(pool, size=extra,
                                                          replace=False))
        fresh_pool = sorted(set(range(domain_size)) - seen)
        added = set(int(x) for x in rng.choice(fresh_pool, size=d, replace=False))
        current = (current - removed) | added
        seen |= current
        chain.append(current)
    return WalkTrace(tuple(tuple(sorted(c)) for c in chain), d)


def _enumerate_pairs(domain_size: int, m: int, d: int) -> dict[tuple, int]:
    """Index every ordered pair of m-subsets at distance d."""
    out: dict[tuple, int] = {}
    for t in itertools.combinations(range(domain_size), m):
        rest = [x for x in range(domain_size) if x not in t]
        for removed in itertools.combinations(t, d):
            keep = tuple(x for x in t if x not in removed)
            for added in itertools.combinations(rest, d):
                t_prime = tuple(sorted(keep + added))
                out[(t, t_prime)] = len(out)
    return out


@dataclass(frozen=True)
class WalkMarginalReport:
    domain_size: int
    m: int
    d: int
    k: int
    trials: int
    step_p_values: tuple[float, ...]
    endpoint_p_value: float
    endpoint_distance_ok: bool
    significance: float

    @property
    def passed(self) -> bool:
        return (self.endpoint_distance_ok
                and self.endpoint_p_value >= self.significance
                and all(p >= self.significance for p in self.step_p_values))

    def to_json(self) -> dict:
        return {
            "domain_size": self.domain_size, "m": self.m, "d": self.d,
            "k": self.k, "trials": self.trials,
            "step_p_values": list(self.step_p_values),
            "endpoint_p_value": self.endpoint_p_value,
            "endpoint_distance_ok": self.endpoint_distance_ok,
            "significance": self.significance, "passed": self.passed,
        }


def verify_walk_marginals(m: int, d: int, domain_size: int, trials: int,
                          seed: int = 0, significance: float = 1e-3) -> WalkMarginalReport:
    """Chi-square goodness of fit of the walk's pairwise marginals against
    the exact distance-d pair law, and of its endpoints against the
    uniform disjoint-pair law."""
    if math.comb(domain_size, m) > ENUMERATION_GUARDRAIL:
        raise InfeasibleError("pair space too large to enumerate")
    k = math.ceil(m / d)
    step_space = _enumerate_pairs(domain_size, m, d)
    end_space = _enumerate_pairs(domain_size, m, m)
    step_counts = np.zeros((k, len(step_space)), dtype=np.int64)
    end_counts = np.zeros(len(end_space), dtype=np.int64)
    distance_ok = True
    rng = derive_rng(seed, "walk-marginals")
    s, s_prime = _canonical_pair(domain_size, m, d)
    for _ in range(trials):
        trace = random_walk(s, s_prime, domain_size, rng)
        for i in range(1, k + 1):
            step_counts[i - 1, step_space[(trace.sets[i - 1], trace.sets[i])]] += 1
        end_counts[end_space[(trace.sets[0], trace.sets[k])]] += 1
        if set_dist(trace.sets[0], trace.sets[k]) != m:
            distance_ok = False
    step_ps = tuple(float(stats.chisquare(row).pvalue) for row in step_counts)
    end_p = float(stats.chisquare(end_counts).pvalue)
    return WalkMarginalReport(domain_size, m, d, k, trials, step_ps, end_p,
                              distance_ok, significance)


def _canonical_pair(domain_size: int, m: int, d: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """A fixed pair of m-subsets at distance d."""
    s = tuple(range(m))
    s_prime = tuple(range(d, m)) + tuple(range(m, m + d))
    if max(s_prime, default=0) >= domain_size:
        raise ValueError("domain too small for the requested distance")
    return s, tuple(sorted(s_prime))


@dataclass(frozen=True)
class KeyLemmaReport:
    lhs_estimate: float
    standard_error: float
    rhs: float
    rho: float
    distance: int

    @property
    def passed(self) -> bool:
        return self.lhs_estimate + 3.0 * self.standard_error >= self.rhs

    def to_json(self) -> dict:
        return {"lhs_estimate": self.lhs_estimate,
                "standard_error": self.standard_error, "rhs": self.rhs,
                "rho": self.rho, "distance": self.distance,
                "passed": self.passed}


def key_lemma_check(mechanism: TabularMechanism, s: Sequence[int],
                    s_prime: Sequence[int], trials: int = 2000,
                    seed: int = 0, rho: float | None = None) -> KeyLemmaReport:
    """Monte Carlo check that a uniform domain permutation separates two
    samples at rate at least (rho/2) * dist(s, s_prime) / m, where rho is
    the disjoint-pair separation of the (order-invariant) mechanism."""
    if not is_symmetric(mechanism):
        raise ValueError("the distinguishing bound is stated for order-invariant mechanisms")
    m = mechanism.sample_size
    if rho is None:
        rho = rho_disjoint(mechanism, m)
    d = set_dist(s, s_prime)
    rhs = 0.5 * rho * d / m
    if d == 0:
        return KeyLemmaReport(0.0, 0.0, 0.0, rho, 0)
    rng = derive_rng(seed, "key-lemma")
    batch = 100
    means = []
    done = 0
    s_arr = np.asarray(s)
    sp_arr = np.asarray(s_prime)
    while done < trials:
        b = min(batch, trials - done)
        perms = np.argsort(rng.random((b, mechanism.domain_size)), axis=1)
        left = np.sort(perms[:, s_arr], axis=1)
        right = np.sort(perms[:, sp_arr], axis=1)
        rows_l = mechanism.rows[dataset_indices(left, mechanism.domain_size)]
        rows_r = mechanism.rows[dataset_indices(right, mechanism.domain_size)]
        tvs = 0.5 * np.abs(rows_l - rows_r).sum(axis=1)
        means.append(float(tvs.mean()))
        done += b
    arr = np.asarray(means)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return KeyLemmaReport(float(arr.mean()), se, rhs, rho, d)
