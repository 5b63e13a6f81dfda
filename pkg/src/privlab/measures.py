"""Privacy measures: scalar functionals of mechanisms.

Seven measures are defined. Two collapse the standard definitions to one
parameter (the DP crossing measure and the order-2 Renyi measure); the
others are deliberately defective foils for the axiom audits: first-half
dependence, heavy-input-only leakage, the allow-everything measure, and
the two junta scalings. A mechanism is "private" under a measure when
its value is at most 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .composition import ALPHA_DP
from .dp_analysis import INFINITY, min_delta_for_epsilon, min_rdp_epsilon
from .finite_prob import TOLERANCE, FiniteDistribution
from .mechanisms import TabularMechanism, all_datasets, dataset_indices

#: Heaviness gate on the sample size; the analysis constant is 40, the
#: desk-scale floor is configurable and audits record when it is relaxed.
HEAVY_N_ANALYSIS = 40
HEAVY_N_FLOOR = 8

#: Heavy-sample comparison constant: the n-sample heaviness probability is
#: at least 1/HEAVY_COMPARISON_C times the m-sample one (m >= 2n+1).
HEAVY_COMPARISON_C = 20.0


@dataclass(frozen=True)
class PrivacyMeasure:
    """A named mechanism functional with its claimed axiom profile."""

    name: str
    evaluate: Callable[[TabularMechanism], float] = field(repr=False)
    composition_exponent: Optional[float] = None
    scaling_constant: Optional[float] = None

    def is_private(self, mechanism: TabularMechanism) -> bool:
        return self.evaluate(mechanism) <= 1.0 + TOLERANCE


# ---------------------------------------------------------------------------
# DP and Renyi measures

def dp_crossing_epsilon(delta_curve: Callable[[float], float], n: int,
                        tol: float = 1e-9) -> float:
    """Smallest eps with delta_curve(eps) <= eps^2 / n^3.

    The curve is non-increasing and the threshold strictly increasing, so
    the crossing is unique. Returns the infinite sentinel when the
    crossing happens only where the threshold is already >= 1 (a vacuous
    certificate).
    """
    ceiling = n ** 1.5  # threshold reaches delta = 1 here

    def excess(eps: float) -> float:
        return delta_curve(eps) - eps * eps / n**3

    if excess(0.0) <= TOLERANCE:
        return 0.0
    lo, hi = 0.0, 1.0
    while excess(hi) > 0.0:
        hi *= 2.0
        if hi >= ceiling:
            hi = ceiling
            break
    if excess(hi) > 0.0:
        return INFINITY
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    if hi >= ceiling * (1.0 - 1e-9):
        return INFINITY
    return hi


def p_dp(mechanism: TabularMechanism, alpha: float = ALPHA_DP) -> float:
    """(eps*/alpha)^(5/4) for the smallest eps* making the mechanism
    (eps*, eps*^2/n^3)-DP."""
    eps = dp_crossing_epsilon(
        lambda e: min_delta_for_epsilon(mechanism, e).delta,
        mechanism.sample_size)
    if math.isinf(eps):
        return INFINITY
    return (eps / alpha) ** 1.25


def p_rdp(mechanism: TabularMechanism) -> float:
    """sqrt of the exact order-2 Renyi privacy level."""
    eps = min_rdp_epsilon(mechanism, 2.0)
    return INFINITY if math.isinf(eps) else math.sqrt(eps)


# ---------------------------------------------------------------------------
# Coordinate-dependence measures

def _depends_only_on(mechanism: TabularMechanism, coords: Sequence[int]) -> bool:
    """True iff rows agree (within tolerance) whenever datasets agree on
    the given coordinates."""
    datasets = all_datasets(mechanism.domain_size, mechanism.sample_size)
    if len(coords) == 0:
        spread = mechanism.rows.max(axis=0) - mechanism.rows.min(axis=0)
        return bool(spread.max() <= TOLERANCE)
    keys = dataset_indices(datasets[:, list(coords)], mechanism.domain_size)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    sorted_rows = mechanism.rows[order]
    boundaries = np.nonzero(np.diff(sorted_keys))[0] + 1
    for group in np.split(np.arange(sorted_keys.size), boundaries):
        block = sorted_rows[group]
        if block.shape[0] > 1:
            if (block.max(axis=0) - block.min(axis=0)).max() > TOLERANCE:
                return False
    return True


def junta_size(mechanism: TabularMechanism, max_n: int = 12) -> int:
    """Minimum number of coordinates the output law depends on, by
    increasing-size subset search."""
    n = mechanism.sample_size
    if n > max_n:
        raise ValueError(f"junta search is limited to n <= {max_n}")
    for k in range(n + 1):
        for coords in itertools.combinations(range(n), k):
            if _depends_only_on(mechanism, coords):
                return k
    return n


def p_junta(mechanism: TabularMechanism) -> float:
    """2k/n for the minimum junta size k."""
    return 2.0 * junta_size(mechanism) / mechanism.sample_size


def p_sqrt_junta(mechanism: TabularMechanism) -> float:
    """sqrt(2k/n) for the minimum junta size k."""
    return math.sqrt(p_junta(mechanism))


def p_half(mechanism: TabularMechanism) -> float:
    """0 when the output law depends only on the first floor(n/2)
    coordinates, else 2."""
    n = mechanism.sample_size
    if n < 2:
        return 2.0
    first_half = range(n // 2)
    return 0.0 if _depends_only_on(mechanism, list(first_half)) else 2.0


# ---------------------------------------------------------------------------
# Heaviness

def is_heavy(entries: Sequence[int]) -> bool:
    """True iff one element fills at least 60% of the dataset."""
    arr = np.asarray(entries, dtype=np.int64)
    counts = np.bincount(arr)
    return bool(counts.max() + 1e-9 >= 0.6 * arr.size)


def heavy_count_threshold(n: int) -> int:
    """Smallest count that makes an element heavy in an n-sample."""
    return math.ceil(0.6 * n - 1e-9)


def p_heavy(mechanism: TabularMechanism, n_floor: int = HEAVY_N_FLOOR) -> float:
    """0 when every non-heavy dataset maps to one fixed point-mass output,
    else 2. The sample size must meet the configured floor."""
    n = mechanism.sample_size
    if n < n_floor:
        raise ValueError(f"heaviness measure needs n >= {n_floor} (got {n})")
    datasets = all_datasets(mechanism.domain_size, n)
    counts = np.zeros((datasets.shape[0],), dtype=np.int64)
    threshold = heavy_count_threshold(n)
    for x in range(mechanism.domain_size):
        counts = np.maximum(counts, (datasets == x).sum(axis=1))
    light = counts < threshold
    if not light.any():
        return 0.0
    light_rows = mechanism.rows[light]
    star = int(np.argmax(light_rows[0]))
    return 0.0 if float(light_rows[:, star].min()) >= 1.0 - TOLERANCE else 2.0


def p_all(mechanism: TabularMechanism) -> float:
    """Everything is perfectly private under this measure."""
    return 0.0


def heavy_probability_exact(dist: FiniteDistribution, n: int) -> float:
    """P[some element appears >= 0.6n times in an n-sample]; at most one
    element can, so the per-element binomial tails add exactly."""
    threshold = heavy_count_threshold(n)
    total = 0.0
    for p in dist.probs:
        if p > 0.0:
            total += float(scipy_stats.binom.sf(threshold - 1, n, p))
    return total


@dataclass(frozen=True)
class HeavyComparisonReport:
    prob_small: float
    prob_large: float
    ratio_bound: float
    holds: bool

    def to_json(self) -> dict:
        return {"prob_small": self.prob_small, "prob_large": self.prob_large,
                "ratio_bound": self.ratio_bound, "holds": self.holds}


def heavy_comparison_check(dist: FiniteDistribution, n: int, m: int,
                           c: float = HEAVY_COMPARISON_C) -> HeavyComparisonReport:
    """Check P[n-sample heavy] >= P[m-sample heavy] / c exactly via
    binomial tails; requires m >= 2n + 1."""
    if m < 2 * n + 1:
        raise ValueError("the comparison needs m >= 2n + 1")
    small = heavy_probability_exact(dist, n)
    large = heavy_probability_exact(dist, m)
    return HeavyComparisonReport(small, large, 1.0 / c,
                                 small + 1e-12 >= large / c)


# ---------------------------------------------------------------------------
# Measure registry

def standard_measures(heavy_floor: int = HEAVY_N_FLOOR) -> dict[str, PrivacyMeasure]:
    """The seven measures with their claimed composition exponents and
    scaling constants (None where the profile deliberately drops one)."""
    return {
        "p_dp": PrivacyMeasure("p_dp", p_dp, composition_exponent=5.0 / 8.0,
                               scaling_constant=1.0),
        "p_rdp": PrivacyMeasure("p_rdp", p_rdp, composition_exponent=0.5,
                                scaling_constant=4.0),
        "p_half": PrivacyMeasure("p_half", p_half, composition_exponent=0.5,
                                 scaling_constant=1.0),
        "p_heavy": PrivacyMeasure(
            "p_heavy", lambda m: p_heavy(m, n_floor=heavy_floor),
            composition_exponent=0.5, scaling_constant=1.0),
        "p_all": PrivacyMeasure("p_all", p_all, composition_exponent=0.5,
                                scaling_constant=1.0),
        "p_junta": PrivacyMeasure("p_junta", p_junta, composition_exponent=1.0,
                                  scaling_constant=1.0),
        "p_sqrt_junta": PrivacyMeasure("p_sqrt_junta", p_sqrt_junta,
                                       composition_exponent=0.5,
                                       scaling_constant=1.0),
    }
