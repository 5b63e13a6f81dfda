"""Hypothesis selection and dataset-reconstruction attacks.

The attack composes preprocessed copies of an order-invariant mechanism:
it samples preprocessors gamma_i = (sigma_i, pi_i) with uniform domain
permutations, observes y_i from the mechanism run on gamma_i of a hidden
dataset, and runs a minimum-distance tournament over candidate datasets,
each represented by the implicit law of (gamma, output). Candidate
families are either exhaustive (small scales) or the truth plus random
decoys, with the mode recorded in every report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InfeasibleError
from .finite_prob import FiniteDistribution
from .dp_analysis import Witness
from .mechanisms import (
    Preprocessor,
    TabularMechanism,
    all_datasets,
    dataset_indices,
)
from .stability import StatisticalTask
from .seeding import derive_rng, derive_seed

#: Full candidate families are allowed up to this many candidates.
FULL_FAMILY_BUDGET = 256

#: Entropy ceiling for reconstruction scoring: max D(x) <= 1/(entropy_c * n^2).
ENTROPY_CONSTANT = 100.0


def hypothesis_select(candidates: Sequence[FiniteDistribution],
                      samples: Sequence[int]) -> int:
    """Minimum-distance estimate over explicit candidate distributions.

    For each candidate pair the comparison set is where the first density
    exceeds the second; a candidate loses when its mass on that set is
    farther from the empirical frequency than its opponent's. Returns the
    candidate with the fewest losses, lowest index on ties.
    """
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    if len(samples) == 0:
        raise ValueError("sample list must be nonempty")
    rows = np.stack([c.probs for c in candidates])
    counts = np.bincount(np.asarray(samples), minlength=rows.shape[1])
    emp = counts / counts.sum()
    losses = np.zeros(rows.shape[0], dtype=np.int64)
    for i in range(rows.shape[0]):
        for j in range(i + 1, rows.shape[0]):
            mask = rows[i] > rows[j]
            emp_mass = float(emp[mask].sum())
            gap_i = abs(emp_mass - float(rows[i][mask].sum()))
            gap_j = abs(emp_mass - float(rows[j][mask].sum()))
            if gap_i < gap_j:
                losses[j] += 1
            elif gap_j < gap_i:
                losses[i] += 1
    return int(np.argmin(losses))


@dataclass(frozen=True)
class CandidateFamily:
    """Unordered candidate datasets for the reconstruction tournament."""

    sets: tuple[tuple[int, ...], ...]
    truth_index: int
    mode: str  # "full" | "decoy"


def build_family(truth: Sequence[int], domain_size: int, mode: str,
                 decoys: int, rng: np.random.Generator) -> CandidateFamily:
    truth_set = tuple(sorted(int(x) for x in truth))
    n = len(truth_set)
    if mode == "full":
        count = math.comb(domain_size, n)
        if count > FULL_FAMILY_BUDGET:
            raise InfeasibleError(
                f"full family has {count} candidates (> {FULL_FAMILY_BUDGET}); "
                "use decoy mode"
            )
        import itertools

        sets = tuple(itertools.combinations(range(domain_size), n))
        return CandidateFamily(sets, sets.index(truth_set), "full")
    if mode != "decoy":
        raise ValueError(f"unknown family mode {mode!r}")
    chosen = {truth_set}
    while len(chosen) < decoys + 1:
        cand = tuple(sorted(int(x) for x in
                            rng.choice(domain_size, size=n, replace=False)))
        chosen.add(cand)
    others = sorted(chosen - {truth_set})
    position = int(rng.integers(len(others) + 1))
    sets = tuple(others[:position]) + (truth_set,) + tuple(others[position:])
    return CandidateFamily(sets, position, "decoy")


def _tournament(rows: np.ndarray, observed: np.ndarray) -> int:
    """Minimum-distance selection over implicit candidates.

    ``rows[t, c]`` is candidate c's conditional output law for draw t and
    ``observed[t]`` the output seen. Comparison-set masses are estimated
    on the shared draws, which is unbiased because the draw marginal does
    not depend on the candidate.
    """
    ell, n_cand, _ = rows.shape
    p_obs = np.stack([rows[t, :, observed[t]] for t in range(ell)])
    emp = (p_obs[:, :, None] > p_obs[:, None, :]).mean(axis=0)
    mass_first = np.zeros((n_cand, n_cand))
    mass_second = np.zeros((n_cand, n_cand))
    # ~8M float32 comparison entries per chunk keeps peak memory modest
    chunk = max(1, 8_000_000 // max(1, n_cand * n_cand * rows.shape[2]))
    for start in range(0, ell, chunk):
        block = rows[start : start + chunk]
        greater = (block[:, :, None, :] > block[:, None, :, :]).astype(np.float32)
        mass_first += np.einsum("tiy,tijy->ij", block, greater)
        mass_second += np.einsum("tjy,tijy->ij", block, greater)
    mass_first /= ell
    mass_second /= ell
    gap_first = np.abs(emp - mass_first)
    gap_second = np.abs(emp - mass_second)
    losses = np.zeros(n_cand, dtype=np.int64)
    for i in range(n_cand):
        for j in range(i + 1, n_cand):
            if gap_first[i, j] < gap_second[i, j]:
                losses[j] += 1
            elif gap_second[i, j] < gap_first[i, j]:
                losses[i] += 1
    return int(np.argmin(losses))


@dataclass(frozen=True)
class RecoveryReport:
    """Reconstruction overlap achieved by the tournament attack."""

    expected_overlap: float
    per_trial: tuple[int, ...]
    gamma_bar: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    sample_size: int
    ell: int
    family_mode: str
    trials: int

    def to_json(self) -> dict:
        return {
            "expected_overlap": self.expected_overlap,
            "per_trial": list(self.per_trial),
            "gamma_bar": [{"sigma": list(s), "pi": list(p)}
                          for s, p in self.gamma_bar],
            "sample_size": self.sample_size,
            "ell": self.ell,
            "family_mode": self.family_mode,
            "trials": self.trials,
        }


def default_ell(sample_size: int, domain_size: int, c: float = 10.0) -> int:
    """Number of preprocessed copies: c * n * log|X|."""
    return max(1, math.ceil(c * sample_size * math.log(domain_size)))


def blatant_attack(mechanism: TabularMechanism, n: int, ell: int | None = None,
                   trials: int = 200, seed: int = 0, family_mode: str = "decoy",
                   decoys: int = 20) -> RecoveryReport:
    """Run the composed-preprocessed-copies attack against hidden datasets
    drawn uniformly from the distinct-entry tuples.

    Per trial: sample gamma_bar, observe the ell preprocessed outputs on
    the hidden dataset, run the tournament over the candidate family, and
    record how many hidden elements the selected candidate contains.
    """
    if mechanism.sample_size != n:
        raise ValueError("mechanism sample size must equal n")
    from .mechanisms import is_symmetric

    if not is_symmetric(mechanism):
        raise ValueError("the candidate family is over unordered datasets; "
                         "symmetrize the mechanism first")
    domain = mechanism.domain_size
    if domain < n:
        raise ValueError("need |X| >= n for distinct-entry datasets")
    if ell is None:
        ell = default_ell(n, domain)
    rng = derive_rng(seed, "blatant-attack")
    overlaps = []
    last_gammas: tuple = ()
    for trial in range(trials):
        hidden = tuple(int(x) for x in rng.choice(domain, size=n, replace=False))
        family = build_family(hidden, domain, family_mode, decoys, rng)
        gammas = [Preprocessor.random(domain, n, rng, bijective_sigma=True)
                  for _ in range(ell)]
        cand_sets = np.asarray(family.sets)
        rows = np.empty((ell, len(family.sets), mechanism.output_size))
        observed = np.empty(ell, dtype=np.int64)
        for t, gamma in enumerate(gammas):
            mapped = np.sort(gamma.apply_batch(cand_sets), axis=1)
            rows[t] = mechanism.rows[dataset_indices(mapped, domain)]
            hidden_row = mechanism.row(tuple(sorted(gamma.apply(hidden))))
            observed[t] = int(rng.choice(mechanism.output_size, p=hidden_row))
        selected = _tournament(rows, observed)
        guess = set(family.sets[selected])
        overlaps.append(sum(1 for x in hidden if x in guess))
        last_gammas = tuple((g.sigma, g.pi) for g in gammas)
    return RecoveryReport(float(np.mean(overlaps)), tuple(overlaps),
                          last_gammas, n, ell, family_mode, trials)


@dataclass(frozen=True)
class RecoveryScore:
    """Expected recovered-entry count for a fixed adversary."""

    score: float
    standard_error: float
    threshold: float
    blatant: bool
    entropy_relaxed: bool
    trials: int

    def to_json(self) -> dict:
        return {"score": self.score, "standard_error": self.standard_error,
                "threshold": self.threshold, "blatant": self.blatant,
                "entropy_relaxed": self.entropy_relaxed, "trials": self.trials}


def recovery_score(mechanism, adversary: Callable[[int], Sequence[int]],
                   dist: FiniteDistribution, trials: int, n: int,
                   seed: int = 0, relax_entropy: bool = False) -> RecoveryScore:
    """Monte Carlo estimate of E[sum_i 1[S_i in A(M(S))]] for S ~ D^n.

    The source must satisfy the high-entropy ceiling
    max_x D(x) <= 1/(100 n^2) unless explicitly relaxed, in which case the
    report is watermarked. Blatant means score - 3*SE >= 0.9 n.
    """
    ceiling = 1.0 / (ENTROPY_CONSTANT * n * n)
    if float(dist.probs.max()) > ceiling + 1e-12:
        if not relax_entropy:
            raise ValueError(
                f"max D(x) = {float(dist.probs.max()):.4g} exceeds the "
                f"high-entropy ceiling {ceiling:.4g}; pass relax_entropy=True "
                "to override"
            )
        relaxed = True
    else:
        relaxed = relax_entropy
    rng = derive_rng(seed, "recovery-score")
    per_trial = np.empty(trials)
    for t in range(trials):
        s = tuple(int(x) for x in dist.sample(rng, n))
        if isinstance(mechanism, TabularMechanism):
            y = int(rng.choice(mechanism.output_size, p=mechanism.row(s)))
        else:
            y = mechanism.sample(s, derive_seed(seed, "recovery-mech", t))
        guessed = set(int(v) for v in adversary(y))
        per_trial[t] = sum(1 for x in s if x in guessed)
    score = float(per_trial.mean())
    se = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    threshold = 0.9 * n
    return RecoveryScore(score, se, threshold, score - 3.0 * se >= threshold,
                         relaxed, trials)


# ---------------------------------------------------------------------------
# Element-finding tasks and the hardness apparatus

def task_find_element(domain_size: int,
                      family: Sequence[FiniteDistribution]) -> StatisticalTask:
    """Output any element the source puts positive mass on."""
    return StatisticalTask(
        "find-element", domain_size, domain_size, tuple(family),
        lambda dist, y: dist[y] > 0.0)


def _unique_heavy(dist: FiniteDistribution) -> Optional[int]:
    heavy = np.nonzero((dist.probs >= 0.7) & (dist.probs <= 0.9))[0]
    return int(heavy[0]) if heavy.size == 1 else None


def task_find_light_element(domain_size: int,
                            family: Sequence[FiniteDistribution]) -> StatisticalTask:
    """Output a positive-mass element other than the unique one carrying
    mass in [0.7, 0.9]; sources without such an element are excluded."""
    members = tuple(d for d in family if _unique_heavy(d) is not None)

    def valid(dist: FiniteDistribution, y: int) -> bool:
        star = _unique_heavy(dist)
        if star is None:
            raise ValueError("distribution has no unique heavy element in [0.7, 0.9]")
        return y != star and dist[y] > 0.0

    return StatisticalTask("find-light-element", domain_size, domain_size,
                           members, valid)


def find_element_reduction(mechanism: TabularMechanism, x_star: int,
                           mix_prob: float = 0.7) -> TabularMechanism:
    """Wrap a light-element finder into an element finder on X minus x_star.

    Each input coordinate is independently replaced by x_star with
    probability ``mix_prob`` before running the base mechanism; an x_star
    output is post-processed into a uniform element of the reduced domain.
    The wrapper preserves any (eps, delta)-DP level of the base mechanism.
    """
    if not 0 <= x_star < mechanism.domain_size:
        raise ValueError("x_star outside the domain")
    if mechanism.output_size != mechanism.domain_size:
        raise ValueError("the base mechanism must output domain elements")
    big = mechanism.domain_size
    small = big - 1
    n = mechanism.sample_size
    to_big = np.array([j if j < x_star else j + 1 for j in range(small)])
    post = np.zeros((small, big))
    for j in range(small):
        post[j, to_big[j]] = 1.0
    post[:, x_star] = 1.0 / small

    datasets = all_datasets(small, n)
    rows = np.zeros((datasets.shape[0], small))
    for bits in range(2**n):
        pattern = [(bits >> i) & 1 for i in range(n)]
        weight = math.prod(mix_prob if b else (1.0 - mix_prob) for b in pattern)
        mixed = np.where(np.asarray(pattern, dtype=bool)[None, :],
                         x_star, to_big[datasets])
        base_rows = mechanism.rows[dataset_indices(mixed, big)]
        rows += weight * (base_rows @ post.T)
    return TabularMechanism(small, n, small, rows)


def membership_rate(mechanism: TabularMechanism) -> float:
    """P over uniform datasets that the output is one of the input entries."""
    if mechanism.output_size != mechanism.domain_size:
        raise ValueError("mechanism must output domain elements")
    datasets = all_datasets(mechanism.domain_size, mechanism.sample_size)
    total = 0.0
    for i in range(datasets.shape[0]):
        members = sorted(set(int(v) for v in datasets[i]))
        total += float(mechanism.rows[i, members].sum())
    return total / datasets.shape[0]


@dataclass(frozen=True)
class HardnessProbeReport:
    membership: float
    gate_triggered: bool
    witness: Optional[Witness]
    confirmed_violation: bool

    def to_json(self) -> dict:
        return {"membership": self.membership,
                "gate_triggered": self.gate_triggered,
                "witness": self.witness.to_json() if self.witness else None,
                "confirmed_violation": self.confirmed_violation}


def find_element_hardness_probe(mechanism: TabularMechanism, epsilon: float,
                                delta: float, trials: int = 20_000,
                                seed: int = 0) -> HardnessProbeReport:
    """When the mechanism outputs one of its inputs too often
    (membership rate >= 1/3), search random (dataset, coordinate,
    replacement) probes for a singleton-event DP violation: the replaced
    dataset must output the new element much more often than the original
    does."""
    p = membership_rate(mechanism)
    n = mechanism.sample_size
    if p < 1.0 / 3.0:
        return HardnessProbeReport(p, False, None, False)
    rng = derive_rng(seed, "hardness-probe")
    low = 1.0 / (100.0 * n)
    high = 1.0 / (5.0 * n)
    scale = math.exp(epsilon)
    for _ in range(trials):
        s = tuple(int(v) for v in rng.integers(0, mechanism.domain_size, size=n))
        x = int(rng.integers(mechanism.domain_size))
        i = int(rng.integers(n))
        if s[i] == x:
            continue
        s_prime = s[:i] + (x,) + s[i + 1 :]
        p_orig = float(mechanism.row(s)[x])
        p_repl = float(mechanism.row(s_prime)[x])
        if p_orig <= low and p_repl >= high:
            confirmed = p_repl > scale * p_orig + delta
            return HardnessProbeReport(p, True, Witness(s_prime, s, (x,)),
                                       confirmed)
    return HardnessProbeReport(p, True, None, False)
