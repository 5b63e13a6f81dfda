import itertools
import math

import numpy as np
import pytest

from privlab.errors import DimensionError, InfeasibleError
from privlab.finite_prob import FiniteDistribution, tv_vector
from privlab.mechanisms import (
    Preprocessor,
    SampledMechanism,
    TabularMechanism,
    all_datasets,
    apply,
    compose_tuple,
    constant_mechanism,
    dataset_index,
    dataset_indices,
    first_k_mechanism,
    identity_mechanism,
    index_dataset,
    is_symmetric,
    preprocess,
    random_mechanism,
    randomized_response_mechanism,
    subsample,
    symmetrize,
    validate_dataset,
)
from privlab.seeding import derive_rng, derive_seed
from privlab.stability import output_law, product_weights


class TestDatasets:
    def test_index_roundtrip(self):
        for entries in itertools.product(range(3), repeat=3):
            idx = dataset_index(entries, 3)
            assert index_dataset(idx, 3, 3) == entries

    def test_lexicographic_order(self):
        ds = all_datasets(2, 2)
        assert ds.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
        assert dataset_indices(ds, 2).tolist() == [0, 1, 2, 3]

    def test_validation(self):
        with pytest.raises(ValueError):
            validate_dataset([], 2)
        with pytest.raises(ValueError):
            validate_dataset([2], 2)


class TestPreprocessor:
    def test_requires_bijection(self):
        with pytest.raises(ValueError):
            Preprocessor((0, 1), (0, 0))

    def test_apply_reorders_then_remaps(self):
        gamma = Preprocessor(sigma=(1, 0), pi=(1, 0))
        assert gamma.apply((0, 1)) == (0, 1)  # reversal then swap

    def test_compose_matches_sequential_preprocessing(self):
        rng = derive_rng(0, "gamma-compose")
        mech = random_mechanism(3, 3, 2, rng)
        for _ in range(100):
            g1 = Preprocessor.random(3, 3, rng)
            g2 = Preprocessor.random(3, 3, rng)
            twice = preprocess(preprocess(mech, g1), g2)
            once = preprocess(mech, g1.compose(g2))
            assert np.allclose(twice.rows, once.rows, atol=1e-9)


class TestTabularMechanism:
    def test_apply_constant(self):
        dist = FiniteDistribution([0.2, 0.8])
        mech = constant_mechanism(3, 2, dist)
        assert np.allclose(apply(mech, (1, 2)).probs, dist.probs)

    def test_apply_identity_point_mass(self):
        mech = identity_mechanism(2, 2)
        out = apply(mech, (1, 0))
        assert out[dataset_index((1, 0), 2)] == 1.0

    def test_randomized_response_row(self):
        mech = randomized_response_mechanism(2, 1.0)
        expected = math.e / (1 + math.e)
        assert apply(mech, (0,)).probs == pytest.approx([expected, 1 - expected])

    def test_incompatible_dataset(self):
        mech = constant_mechanism(2, 2, FiniteDistribution([1.0]))
        with pytest.raises(DimensionError):
            mech.row((0, 1, 0))

    def test_guardrail(self):
        with pytest.raises(InfeasibleError):
            TabularMechanism(10, 9, 1000, np.zeros((2, 2)))

    def test_json_roundtrip(self, tmp_path):
        rng = derive_rng(1, "json")
        mech = random_mechanism(2, 2, 3, rng)
        path = tmp_path / "mech.json"
        mech.save(str(path))
        again = TabularMechanism.load(str(path))
        assert np.allclose(again.rows, mech.rows)
        assert again.output_size == 3


class TestPreprocess:
    def test_identity_gamma_is_noop(self):
        rng = derive_rng(2, "noop")
        mech = random_mechanism(3, 2, 2, rng)
        gamma = Preprocessor.identity(3, 2)
        assert np.allclose(preprocess(mech, gamma).rows, mech.rows)

    def test_reversal_on_identity_mechanism(self):
        mech = identity_mechanism(2, 2)
        gamma = Preprocessor(sigma=(0, 1), pi=(1, 0))
        out = apply(preprocess(mech, gamma), (0, 1))
        assert out[dataset_index((1, 0), 2)] == 1.0

    def test_constant_sigma_collapses_rows(self):
        rng = derive_rng(3, "collapse")
        mech = random_mechanism(3, 2, 2, rng)
        gamma = Preprocessor(sigma=(0, 0, 0), pi=(0, 1))
        collapsed = preprocess(mech, gamma)
        assert np.allclose(collapsed.rows, mech.rows[0])

    def test_sampled_mechanism_wrapping(self):
        base = SampledMechanism(2, 2, 4, lambda e, s: dataset_index(e, 2))
        gamma = Preprocessor(sigma=(1, 0), pi=(0, 1))
        wrapped = preprocess(base, gamma)
        assert wrapped.sample((0, 1), 0) == dataset_index((1, 0), 2)


class TestSymmetrize:
    def test_already_symmetric_unchanged(self):
        mech = constant_mechanism(2, 3, FiniteDistribution([0.3, 0.7]))
        assert np.allclose(symmetrize(mech).rows, mech.rows)

    def test_two_permutation_average(self):
        mech = identity_mechanism(2, 2)
        sym = symmetrize(mech)
        row = sym.row((0, 1))
        assert row[dataset_index((0, 1), 2)] == pytest.approx(0.5)
        assert row[dataset_index((1, 0), 2)] == pytest.approx(0.5)

    def test_idempotent(self):
        rng = derive_rng(4, "idem")
        mech = random_mechanism(2, 3, 2, rng)
        once = symmetrize(mech)
        twice = symmetrize(once)
        assert np.allclose(once.rows, twice.rows, atol=1e-9)
        assert is_symmetric(once)


class TestComposeTuple:
    def test_single_component(self):
        rng = derive_rng(5, "single")
        mech = random_mechanism(2, 2, 3, rng)
        assert np.allclose(compose_tuple([mech]).rows, mech.rows)

    def test_two_constants(self):
        a = constant_mechanism(2, 1, FiniteDistribution([1.0, 0.0]))
        b = constant_mechanism(2, 1, FiniteDistribution([0.0, 1.0]))
        pair = compose_tuple([a, b])
        assert apply(pair, (0,))[0 * 2 + 1] == 1.0

    def test_two_fair_coins(self):
        coin = constant_mechanism(2, 1, FiniteDistribution([0.5, 0.5]))
        pair = compose_tuple([coin, coin])
        assert np.allclose(pair.row((0,)), [0.25] * 4)

    def test_marginals_recover_components(self):
        rng = derive_rng(6, "marginals")
        a = random_mechanism(2, 2, 3, rng)
        b = random_mechanism(2, 2, 2, rng)
        both = compose_tuple([a, b])
        rows = both.rows.reshape(-1, 3, 2)
        assert np.allclose(rows.sum(axis=2), a.rows, atol=1e-12)
        assert np.allclose(rows.sum(axis=1), b.rows, atol=1e-12)

    def test_mismatched_shapes_rejected(self):
        a = constant_mechanism(2, 1, FiniteDistribution([1.0]))
        b = constant_mechanism(3, 1, FiniteDistribution([1.0]))
        with pytest.raises(DimensionError):
            compose_tuple([a, b])


class TestSubsample:
    def test_m_equals_n_is_symmetrization(self):
        rng = derive_rng(7, "sub-sym")
        mech = random_mechanism(2, 2, 3, rng)
        assert np.allclose(subsample(mech, 2).rows, symmetrize(mech).rows,
                           atol=1e-12)

    def test_constant_stays_constant(self):
        mech = constant_mechanism(2, 1, FiniteDistribution([0.4, 0.6]))
        sub = subsample(mech, 3)
        assert np.allclose(sub.rows, mech.rows[0])

    def test_two_subset_average(self):
        mech = identity_mechanism(3, 1)
        sub = subsample(mech, 2)
        row = sub.row((0, 1))
        assert row[0] == pytest.approx(0.5)
        assert row[1] == pytest.approx(0.5)

    def test_rejects_m_below_n(self):
        mech = constant_mechanism(2, 2, FiniteDistribution([1.0]))
        with pytest.raises(ValueError):
            subsample(mech, 1)

    @pytest.mark.parametrize("domain,n,m", [(2, 1, 3), (3, 1, 2), (2, 2, 4), (3, 2, 3)])
    def test_iid_output_law_matches_base(self, domain, n, m):
        rng = derive_rng(8, "sub-law", domain, n, m)
        mech = random_mechanism(domain, n, 3, rng)
        sub = subsample(mech, m)
        for _ in range(5):
            dist = FiniteDistribution(rng.dirichlet(np.ones(domain)))
            base_law = output_law(mech, dist).probs
            sub_law = output_law(sub, dist).probs
            assert np.allclose(base_law, sub_law, atol=1e-12)


class TestSampledMechanism:
    def test_reproducibility_contract(self):
        mech = SampledMechanism(
            2, 2, 5,
            lambda e, s: derive_seed(s, "out", e) % 5)
        a = mech.sample((0, 1), 42)
        b = mech.sample((0, 1), 42)
        assert a == b
        assert mech.sample((0, 1), 43) in range(5)
