import math

import numpy as np
import pytest

from privlab.catalog import (
    heavy_leak_mechanism,
    heavy_majority_mechanism,
    noisy_count_mechanism,
    rr_pair_delta_curve,
    rr_pair_rdp,
)
from privlab.composition import ALPHA_DP
from privlab.dp_analysis import min_delta_for_epsilon, min_rdp_epsilon
from privlab.finite_prob import FiniteDistribution
from privlab.measures import (
    dp_crossing_epsilon,
    heavy_comparison_check,
    heavy_probability_exact,
    is_heavy,
    junta_size,
    p_all,
    p_dp,
    p_half,
    p_heavy,
    p_junta,
    p_rdp,
    p_sqrt_junta,
)
from privlab.mechanisms import (
    TabularMechanism,
    compose_tuple,
    constant_mechanism,
    coordinate_mechanism,
    first_k_mechanism,
    identity_mechanism,
    postprocess_relabel,
    random_mechanism,
    randomized_response_mechanism,
)
from privlab.seeding import derive_rng


class TestPDp:
    def test_constant_is_zero(self):
        mech = constant_mechanism(2, 2, FiniteDistribution([0.3, 0.7]))
        assert p_dp(mech) == 0.0

    def test_identity_infinite(self):
        assert math.isinf(p_dp(identity_mechanism(2, 2)))

    def test_randomized_response_crossing_matches_grid_oracle(self):
        mech = randomized_response_mechanism(2, 1.0, 1)
        eps_star = dp_crossing_epsilon(
            lambda e: min_delta_for_epsilon(mech, e).delta, 1)
        # grid oracle: scan for the first eps with delta(eps) <= eps^2/n^3
        grid = np.linspace(0, 2, 20001)
        hits = [e for e in grid
                if min_delta_for_epsilon(mech, float(e)).delta <= e * e]
        assert eps_star == pytest.approx(hits[0], abs=2e-4)
        assert p_dp(mech) == pytest.approx((eps_star / ALPHA_DP) ** 1.25)

    def test_private_iff_below_alpha_threshold(self):
        tiny = randomized_response_mechanism(2, 0.04, 2)
        assert p_dp(tiny) <= 1.0
        loud = randomized_response_mechanism(2, 0.5, 2)
        assert p_dp(loud) > 1.0


class TestPRdp:
    def test_constant_zero_identity_infinite(self):
        assert p_rdp(constant_mechanism(2, 1, FiniteDistribution([0.5, 0.5]))) == 0.0
        assert math.isinf(p_rdp(identity_mechanism(2, 1)))

    def test_constructed_divergence_value(self):
        # two-point rows with order-2 divergence exactly 1/16
        target = 1.0 / 16.0
        lo, hi = 0.5, 0.999
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            div = math.log(mid**2 / (1 - mid) + (1 - mid) ** 2 / mid)
            if div > target:
                hi = mid
            else:
                lo = mid
        p = 0.5 * (lo + hi)
        rows = np.array([[p, 1 - p], [1 - p, p]])
        mech = TabularMechanism(2, 1, 2, rows)
        assert p_rdp(mech) == pytest.approx(0.25, abs=1e-6)


class TestJunta:
    def test_first_coordinate(self):
        mech = coordinate_mechanism(2, 4, 0)
        assert junta_size(mech) == 1
        assert p_junta(mech) == pytest.approx(0.5)

    def test_constant_is_zero_junta(self):
        mech = constant_mechanism(2, 3, FiniteDistribution([0.4, 0.6]))
        assert junta_size(mech) == 0
        assert p_junta(mech) == 0.0
        assert p_sqrt_junta(mech) == 0.0

    def test_first_and_last(self):
        mech = compose_tuple([coordinate_mechanism(2, 4, 0),
                              coordinate_mechanism(2, 4, 3)])
        assert junta_size(mech) == 2

    def test_subadditive_under_composition(self):
        rng = derive_rng(0, "junta-sub")
        for _ in range(10):
            coords = rng.choice(6, size=2, replace=False)
            parts = [coordinate_mechanism(2, 6, int(c)) for c in coords]
            composed = compose_tuple(parts)
            assert junta_size(composed) <= sum(junta_size(p) for p in parts)

    def test_sqrt_variant(self):
        mech = coordinate_mechanism(2, 4, 0)
        assert p_sqrt_junta(mech) == pytest.approx(math.sqrt(0.5))


class TestPHalf:
    def test_first_half_mechanism(self):
        assert p_half(first_k_mechanism(2, 4, 2)) == 0.0

    def test_identity_depends_on_everything(self):
        assert p_half(identity_mechanism(2, 4)) == 2.0

    def test_needs_two_samples(self):
        assert p_half(constant_mechanism(2, 1, FiniteDistribution([1.0]))) == 2.0


class TestHeaviness:
    def test_is_heavy_examples(self):
        assert is_heavy([3] * 10)
        assert is_heavy([0] * 6 + [1] * 4)
        assert not is_heavy([0] * 5 + [1] * 5)

    def test_p_heavy_on_leak_mechanism(self):
        assert p_heavy(heavy_leak_mechanism(2, 8)) == 0.0
        assert p_heavy(heavy_majority_mechanism(2, 8)) == 0.0

    def test_identity_fails_heaviness(self):
        assert p_heavy(identity_mechanism(2, 8)) == 2.0

    def test_sample_size_floor(self):
        with pytest.raises(ValueError):
            p_heavy(heavy_leak_mechanism(2, 4))
        assert p_heavy(heavy_leak_mechanism(2, 4), n_floor=4) == 0.0

    def test_heavy_probability_exact_vs_monte_carlo(self):
        rng = derive_rng(1, "heavy-mc")
        dist = FiniteDistribution([0.65, 0.35])
        exact = heavy_probability_exact(dist, 9)
        draws = rng.choice(2, size=(20000, 9), p=dist.probs)
        emp = np.mean([is_heavy(row) for row in draws])
        assert abs(emp - exact) < 0.02

    def test_comparison_point_mass(self):
        report = heavy_comparison_check(FiniteDistribution([1.0, 0.0]), 40, 81)
        assert report.prob_small == pytest.approx(1.0)
        assert report.prob_large == pytest.approx(1.0)
        assert report.holds

    def test_comparison_binomial_grid(self):
        for p in np.linspace(0.0, 1.0, 21):
            dist = FiniteDistribution([p, 1 - p]) if 0 < p < 1 else \
                FiniteDistribution([max(p, 1e-12), max(1 - p, 1e-12)])
            assert heavy_comparison_check(dist, 40, 81).holds

    def test_comparison_requires_m_bound(self):
        with pytest.raises(ValueError):
            heavy_comparison_check(FiniteDistribution([0.5, 0.5]), 40, 60)


class TestPAll:
    def test_everything_private(self):
        assert p_all(identity_mechanism(2, 2)) == 0.0


class TestRelabelingInvariance:
    def test_p_dp_and_p_rdp_invariant_under_output_bijection(self):
        rng = derive_rng(2, "relabel")
        for _ in range(5):
            mech = random_mechanism(2, 2, 4, rng, concentration=4.0)
            perm = tuple(int(x) for x in rng.permutation(4))
            relabeled = postprocess_relabel(mech, perm)
            assert p_dp(relabeled) == pytest.approx(p_dp(mech), abs=1e-6)
            assert p_rdp(relabeled) == pytest.approx(p_rdp(mech), abs=1e-9)


class TestBlatantEntryValueBases:
    """The reconstruction-scale catalog declares measure values from
    construction or closed-form curves; verify both against exact
    evaluation on small tabular twins."""

    def test_rr_delta_curve_matches_exact_scan_small_domain(self):
        domain, eps0 = 6, 0.1
        curve = rr_pair_delta_curve(domain, eps0)
        mech1 = randomized_response_mechanism(domain, eps0, 1)
        mech2 = randomized_response_mechanism(domain, eps0, 2)
        for eps in (0.0, 0.03, 0.07, 0.12):
            exact1 = min_delta_for_epsilon(mech1, eps).delta
            exact2 = min_delta_for_epsilon(mech2, eps).delta
            assert curve(eps) == pytest.approx(exact1, abs=1e-12)
            assert curve(eps) == pytest.approx(exact2, abs=1e-12)

    def test_rr_rdp_matches_exact_scan_small_domain(self):
        domain, eps0 = 6, 0.1
        assert rr_pair_rdp(domain, eps0) == pytest.approx(
            min_rdp_epsilon(randomized_response_mechanism(domain, eps0, 2), 2.0),
            abs=1e-12)

    def test_declared_junta_values_match_tabular_twins(self):
        twin = first_k_mechanism(6, 2, 1)
        assert p_half(twin) == 0.0
        assert p_junta(twin) == pytest.approx(1.0)
        assert p_sqrt_junta(twin) == pytest.approx(1.0)
        ident = identity_mechanism(4, 2)
        assert p_half(ident) == 2.0
        assert p_junta(ident) == pytest.approx(2.0)


class TestNoisyCount:
    def test_pure_dp_level_exact(self):
        for eps in (0.5, 1.0, 2.0):
            mech = noisy_count_mechanism(2, 4, eps)
            assert min_delta_for_epsilon(mech, eps).delta <= 1e-9
            assert min_delta_for_epsilon(mech, eps * 0.99).delta > 0

    def test_rows_sum_to_one(self):
        mech = noisy_count_mechanism(3, 5, 1.0)
        assert np.allclose(mech.rows.sum(axis=1), 1.0)
