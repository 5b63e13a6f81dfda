import itertools
import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from privlab.coupling import (
    WalkTrace,
    key_lemma_check,
    random_walk,
    sample_jd,
    set_dist,
    verify_walk_marginals,
)
from privlab.errors import InfeasibleError
from privlab.finite_prob import FiniteDistribution, tv_vector
from privlab.mechanisms import constant_mechanism, random_mechanism, symmetrize
from privlab.seeding import derive_rng
from privlab.stability import rho_disjoint


class TestSetDist:
    def test_examples(self):
        assert set_dist((0, 1), (0, 1)) == 0
        assert set_dist((0, 1), (1, 2)) == 1
        assert set_dist((0, 1), (2, 3)) == 2

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            set_dist((0, 0), (0, 1))

    def test_metric_on_random_triples(self):
        rng = derive_rng(0, "dist-metric")
        for _ in range(300):
            size = int(rng.integers(2, 5))
            a, b, c = (tuple(sorted(int(x) for x in
                                    rng.choice(10, size=size, replace=False)))
                       for _ in range(3))
            assert set_dist(a, b) == set_dist(b, a)
            assert set_dist(a, c) <= set_dist(a, b) + set_dist(b, c)
            assert (set_dist(a, b) == 0) == (a == b)


class TestSampleJd:
    def test_distance_zero_returns_same_set(self):
        t, t2 = sample_jd(6, 3, 0, 5)
        assert t == t2

    def test_full_distance_forces_complement(self):
        t, t2 = sample_jd(4, 2, 2, 9)
        assert set(t) | set(t2) == set(range(4))
        assert not set(t) & set(t2)

    def test_uniform_over_24_ordered_pairs(self):
        rng = derive_rng(1, "jd-uniform")
        counts = Counter(sample_jd(4, 2, 1, rng) for _ in range(48000))
        assert len(counts) == 24
        assert stats.chisquare(list(counts.values())).pvalue >= 1e-3

    def test_relabeling_invariance(self):
        # remapping the domain by a fixed permutation leaves the law unchanged
        rng = derive_rng(2, "jd-relabel")
        perm = {0: 3, 1: 0, 2: 4, 3: 1, 4: 2}
        plain = Counter(sample_jd(5, 2, 1, rng) for _ in range(30000))
        rng2 = derive_rng(3, "jd-relabel-2")
        mapped = Counter()
        for _ in range(30000):
            t, t2 = sample_jd(5, 2, 1, rng2)
            mapped[(tuple(sorted(perm[x] for x in t)),
                    tuple(sorted(perm[x] for x in t2)))] += 1
        all_pairs = sorted(set(plain) | set(mapped))
        table = np.array([[plain.get(k, 0) for k in all_pairs],
                          [mapped.get(k, 0) for k in all_pairs]])
        assert stats.chi2_contingency(table).pvalue >= 1e-3

    def test_infeasible_parameters(self):
        with pytest.raises(ValueError):
            sample_jd(4, 3, 2, 0)  # needs |X| >= m + d = 5


class TestRandomWalk:
    def test_disjoint_inputs_single_step(self):
        trace = random_walk((0, 1), (2, 3), 6, 4)
        assert trace.k == 1
        assert not set(trace.sets[0]) & set(trace.sets[1])

    def test_rejects_equal_inputs(self):
        with pytest.raises(ValueError):
            random_walk((0, 1), (0, 1), 8, 0)

    def test_rejects_small_domain(self):
        # m=2, d=1 -> k=2 consumes m + k*d = 4 elements
        with pytest.raises(ValueError):
            random_walk((0, 1), (1, 2), 3, 0)

    def test_step_distances_m2_d1(self):
        rng = derive_rng(4, "walk-m2")
        for _ in range(2000):
            trace = random_walk((0, 1), (1, 2), 6, rng)
            assert trace.k == 2
            assert set_dist(trace.sets[0], trace.sets[1]) == 1
            assert set_dist(trace.sets[1], trace.sets[2]) == 1
            assert set_dist(trace.sets[0], trace.sets[2]) == 2

    def test_correction_branch_m3_d2(self):
        # k=2 and k*d - m = 1: the last step removes the one surviving
        # original plus one newcomer
        rng = derive_rng(5, "walk-corr")
        for _ in range(2000):
            trace = random_walk((0, 1, 2), (0, 3, 4), 12, rng)
            assert trace.k == 2
            t0, t1, t2 = (set(s) for s in trace.sets)
            assert len(t0 & t1) == 1
            assert set_dist(trace.sets[1], trace.sets[2]) == 2
            assert not t0 & t2
            removed = t1 - t2
            assert len(removed & t0) == 1 and len(removed - t0) == 1

    def test_trace_invariants_enforced(self):
        with pytest.raises(ValueError, match="distance"):
            WalkTrace(((0, 1), (0, 1)), d=1)
        with pytest.raises(ValueError, match="disjoint"):
            WalkTrace(((0, 1), (1, 2)), d=1)


class TestVerifyWalkMarginals:
    def test_small_instance_passes(self):
        report = verify_walk_marginals(2, 1, 6, trials=20000, seed=0)
        assert report.passed
        assert report.k == 2
        assert len(report.step_p_values) == 2

    def test_d_equals_m_single_marginal(self):
        report = verify_walk_marginals(2, 2, 8, trials=15000, seed=1)
        assert report.k == 1
        assert report.passed

    def test_enumeration_guardrail(self):
        with pytest.raises(InfeasibleError):
            verify_walk_marginals(3, 2, 40, trials=10)


class TestKeyLemma:
    def test_equal_inputs_trivial(self):
        rng = derive_rng(6, "kl-equal")
        mech = symmetrize(random_mechanism(6, 2, 3, rng))
        report = key_lemma_check(mech, (0, 1), (0, 1), trials=100, seed=0)
        assert report.rhs == 0.0 and report.passed

    def test_constant_mechanism_trivial(self):
        mech = constant_mechanism(6, 2, FiniteDistribution([0.5, 0.5]))
        report = key_lemma_check(mech, (0, 1), (2, 3), trials=100, seed=0)
        assert report.rho == 0.0 and report.passed

    def test_requires_symmetric_mechanism(self):
        rng = derive_rng(7, "kl-asym")
        mech = random_mechanism(6, 2, 2, rng)
        with pytest.raises(ValueError, match="order-invariant"):
            key_lemma_check(mech, (0, 1), (2, 3))

    def test_exact_permutation_average_dominates_bound(self):
        # exact version of the Monte Carlo claim on a tiny instance
        rng = derive_rng(8, "kl-exact")
        for _ in range(10):
            mech = symmetrize(random_mechanism(6, 2, 2, rng))
            rho = rho_disjoint(mech)
            perms = list(itertools.permutations(range(6)))
            for s, s2 in [((0, 1), (1, 2)), ((0, 1), (2, 3))]:
                lhs = np.mean([
                    tv_vector(
                        mech.row(tuple(sorted(p[x] for x in s))),
                        mech.row(tuple(sorted(p[x] for x in s2))))
                    for p in perms])
                d = set_dist(s, s2)
                assert lhs >= 0.5 * rho * d / 2 - 1e-12


class TestDistributionCorollary:
    def test_candidate_distance_bound(self):
        # the candidate-family law inherits the permutation separation:
        # dtv(D_S, D_S') >= (rho/2) * dist/n on a tiny instance, computed
        # exactly over all (sigma, pi) pairs
        rng = derive_rng(9, "corollary")
        domain, n = 5, 2
        mech = symmetrize(random_mechanism(domain, n, 2, rng))
        rho = rho_disjoint(mech)
        sigmas = list(itertools.permutations(range(domain)))
        pis = list(itertools.permutations(range(n)))
        for s, s2 in [((0, 1), (1, 2)), ((0, 1), (2, 3))]:
            total = 0.0
            for sigma in sigmas:
                for pi in pis:
                    left = tuple(sorted(sigma[s[j]] for j in pi))
                    right = tuple(sorted(sigma[s2[j]] for j in pi))
                    total += tv_vector(mech.row(left), mech.row(right))
            dtv_candidates = total / (len(sigmas) * len(pis))
            assert (dtv_candidates
                    >= 0.5 * rho * set_dist(s, s2) / n - 1e-12)
