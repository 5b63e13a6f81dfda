import math

import numpy as np
import pytest

from privlab.composition import (
    CompositionInput,
    basic_composition,
    pdp_composition_params,
    rdp_composition,
    rdp_separation_min_samples,
    rdp_subsample_amplify,
    strong_composition,
)
from privlab.dp_analysis import min_delta_for_epsilon, min_rdp_epsilon
from privlab.errors import RegimeError
from privlab.mechanisms import (
    compose_tuple,
    randomized_response_mechanism,
    random_mechanism,
    subsample,
)
from privlab.seeding import derive_rng


class TestBasicComposition:
    def test_zero_budget(self):
        out = basic_composition(CompositionInput(0.0, 0.0, 7))
        assert (out.epsilon, out.delta) == (0.0, 0.0)

    def test_direct_multiplication(self):
        out = basic_composition(CompositionInput(0.1, 1e-6, 3))
        assert out.epsilon == pytest.approx(0.3)
        assert out.delta == pytest.approx(3e-6)
        assert not out.delta_clamped

    def test_delta_clamped_at_one(self):
        out = basic_composition(CompositionInput(1.0, 0.4, 3))
        assert out.epsilon == pytest.approx(3.0)
        assert out.delta == 1.0
        assert out.delta_clamped


class TestStrongComposition:
    def test_zero_epsilon(self):
        out = strong_composition(CompositionInput(0.0, 1e-4, 5))
        assert out.epsilon == 0.0
        assert out.delta == pytest.approx(2 * 5 * 1e-4)

    def test_formula_single_copy(self):
        # frozen from the stated formula: 0.1*sqrt(ln 1e6) + 0.1*(e^0.1 - 1)
        out = strong_composition(CompositionInput(0.1, 1e-6, 1))
        expected = 0.1 * math.sqrt(math.log(1e6)) + 0.1 * (math.e**0.1 - 1)
        assert out.epsilon == pytest.approx(expected, abs=1e-12)
        assert out.epsilon == pytest.approx(0.3822093, abs=1e-6)

    def test_formula_hundred_copies(self):
        out = strong_composition(CompositionInput(0.01, 1e-9, 100))
        expected = (0.01 * math.sqrt(100 * math.log(1e7))
                    + 100 * 0.01 * (math.e**0.01 - 1))
        assert out.epsilon == pytest.approx(expected, abs=1e-12)
        assert out.delta == pytest.approx(2e-7)

    def test_sqrt2_variant(self):
        plain = strong_composition(CompositionInput(0.1, 1e-6, 4))
        doubled = strong_composition(CompositionInput(0.1, 1e-6, 4), sqrt2=True)
        linear = 4 * 0.1 * (math.e**0.1 - 1)
        assert (doubled.epsilon - linear) == pytest.approx(
            math.sqrt(2) * (plain.epsilon - linear))

    def test_rejects_large_ell_delta(self):
        with pytest.raises(RegimeError):
            strong_composition(CompositionInput(0.1, 0.5, 2))

    def test_flags_outside_unit_regime(self):
        out = strong_composition(CompositionInput(1.0, 1e-6, 4))
        assert out.outside_unit_regime

    def test_dominates_single_mechanism_below_one_over_e(self):
        # at l=1 and delta <= 1/e the sqrt factor is >= 1
        rng = derive_rng(0, "dominate")
        for _ in range(50):
            eps = float(rng.uniform(0.01, 1.0))
            delta = float(rng.uniform(1e-9, 1.0 / math.e))
            out = strong_composition(CompositionInput(eps, delta, 1))
            assert out.epsilon >= eps - 1e-12


class TestRdpFormulas:
    def test_single_copy(self):
        assert rdp_composition(0.7, 2.0, 1) == 0.7

    def test_unit_budget_split(self):
        assert rdp_composition(1.0 / 16, 2.0, 16) == pytest.approx(1.0)

    def test_multiplication(self):
        assert rdp_composition(0.25, 2.0, 3) == pytest.approx(0.75)

    def test_subsample_half_is_identity_point(self):
        assert rdp_subsample_amplify(1.0, 1, 2) == pytest.approx(1.0)

    def test_subsample_zero(self):
        assert rdp_subsample_amplify(0.0, 2, 5) == 0.0

    def test_subsample_quadratic_decay(self):
        for k in (2, 5, 10):
            amplified = rdp_subsample_amplify(1.0, 1, k)
            assert amplified <= 16.0 / k**2
            assert math.sqrt(amplified) <= 4.0 / k

    def test_subsample_monotone(self):
        values = [rdp_subsample_amplify(e, 1, 3) for e in (0.1, 0.5, 1.0, 2.0)]
        assert values == sorted(values)
        assert rdp_subsample_amplify(1.0, 2, 4) > rdp_subsample_amplify(1.0, 1, 4)

    def test_subsample_rejects_small_m(self):
        with pytest.raises(ValueError):
            rdp_subsample_amplify(1.0, 3, 2)


class TestPdpCompositionParams:
    def test_boundary_chain_passes(self):
        record = pdp_composition_params(2.6e-5, 64, 4)
        assert record.eps_star <= 0.1
        assert record.delta_star <= record.delta_star_bound
        assert record.mu_at_most_one and record.mu_sq_ell_below_alpha

    def test_single_copy_tiny_epsilon(self):
        record = pdp_composition_params(1e-8, 16, 1)
        assert record.eps_star_ok and record.delta_star_ok

    def test_regime_gate(self):
        with pytest.raises(RegimeError, match="violates"):
            pdp_composition_params(0.5, 64, 4)


class TestSeparationArithmetic:
    def test_large_output_space(self):
        assert rdp_separation_min_samples(2**10, 1.0) == 9

    def test_binary_output_space(self):
        assert rdp_separation_min_samples(1.0, 1.0) == 0

    def test_huge_epsilon_limit(self):
        assert rdp_separation_min_samples(2**20, 1e9) == 0

    def test_threshold_is_tight(self):
        m = rdp_separation_min_samples(2**10, 1.0)
        log_y = 2**10 * math.log(2)
        assert 2**m >= log_y / (1.0 + math.log(2))
        assert 2 ** (m - 1) < log_y / (1.0 + math.log(2))


class TestSoundnessOnTables:
    def test_basic_and_strong_dominate_exact_composition(self):
        rng = derive_rng(1, "soundness")
        for _ in range(40):
            eps0 = float(rng.uniform(0.05, 0.8))
            ell = int(rng.integers(2, 4))
            mech = randomized_response_mechanism(
                int(rng.integers(2, 4)), eps0, int(rng.integers(1, 3)))
            composed = compose_tuple([mech] * ell)
            basic = basic_composition(CompositionInput(eps0, 0.0, ell))
            assert (min_delta_for_epsilon(composed, basic.epsilon).delta
                    <= basic.delta + 1e-9)
            strong = strong_composition(CompositionInput(eps0, 1e-6, ell))
            assert (min_delta_for_epsilon(composed, strong.epsilon).delta
                    <= strong.delta + 1e-9)

    def test_rdp_composition_sound(self):
        rng = derive_rng(2, "rdp-sound")
        for _ in range(40):
            mech = random_mechanism(2, 1, 3, rng, concentration=3.0)
            ell = int(rng.integers(2, 4))
            base = min_rdp_epsilon(mech, 2.0)
            composed = min_rdp_epsilon(compose_tuple([mech] * ell), 2.0)
            assert composed <= rdp_composition(base, 2.0, ell) + 1e-9

    def test_subsample_amplification_sound(self):
        rng = derive_rng(3, "amp-sound")
        for _ in range(80):
            mech = random_mechanism(2, 1, 2, rng, concentration=2.0)
            base = min_rdp_epsilon(mech, 2.0)
            for m in (2, 3, 4):
                exact = min_rdp_epsilon(subsample(mech, m), 2.0)
                assert exact <= rdp_subsample_amplify(base, 1, m) + 1e-9
