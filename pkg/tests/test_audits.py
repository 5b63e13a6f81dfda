"""Targeted audit checks; the full matrix runs in the acceptance suite."""

import math

import numpy as np
import pytest

from privlab.audits import (
    EXPECTED_MATRIX,
    audit_axiom_blatant,
    audit_axiom_composition,
    audit_axiom_preprocessing,
    audit_axiom_scaling,
    composition_cells,
    extend_first_n,
    heavy_gated_subsample,
    preprocessing_gammas,
)
from privlab.catalog import (
    blatant_catalog,
    heavy_leak_mechanism,
    heavy_majority_mechanism,
    manifest,
    micro_catalog,
)
from privlab.finite_prob import FiniteDistribution
from privlab.measures import p_heavy, standard_measures
from privlab.mechanisms import (
    coordinate_mechanism,
    first_k_mechanism,
    random_mechanism,
)
from privlab.seeding import derive_rng
from privlab.stability import output_law


MEASURES = standard_measures()


class TestPreprocessingAudit:
    def test_first_half_fails_reorder_with_witness(self):
        gammas = preprocessing_gammas(2, 8, seed=0)
        reports = audit_axiom_preprocessing(
            MEASURES["p_half"], {"first_half": first_k_mechanism(2, 8, 4)},
            gammas)
        assert reports["preprocessing.reorder"].verdict == "fail"
        witness = reports["preprocessing.reorder"].evidence["witness"]
        assert witness["base_value"] == 0.0
        assert witness["preprocessed_value"] == 2.0
        assert reports["preprocessing.remap"].verdict == "pass"

    def test_heavy_fails_partial_collapse_only(self):
        gammas = preprocessing_gammas(3, 8, seed=0)
        mechs = {"heavy_leak": heavy_leak_mechanism(3, 8)}
        reports = audit_axiom_preprocessing(MEASURES["p_heavy"], mechs, gammas)
        assert reports["preprocessing.reorder"].verdict == "pass"
        assert reports["preprocessing.remap"].verdict == "fail"
        assert reports["preprocessing.remap_bijective"].verdict == "pass"

    def test_junta_passes_all_parts(self):
        gammas = preprocessing_gammas(2, 8, seed=1)
        mechs = {"first_one": first_k_mechanism(2, 8, 1),
                 "first_half": first_k_mechanism(2, 8, 4)}
        reports = audit_axiom_preprocessing(MEASURES["p_junta"], mechs, gammas)
        assert all(r.verdict == "pass" for r in reports.values())


class TestBlatantAudit:
    def test_p_all_fails_with_identity_witness(self):
        entries = blatant_catalog()
        report = audit_axiom_blatant(MEASURES["p_all"], entries, trials=60,
                                     seed=0)
        assert report.verdict == "fail"
        assert report.evidence["witness"]["entry"] == "identity_pair"

    def test_p_half_passes(self):
        entries = blatant_catalog()
        report = audit_axiom_blatant(MEASURES["p_half"], entries, trials=60,
                                     seed=1)
        assert report.verdict == "pass"
        audited_names = {a["entry"] for a in report.evidence["audited"]}
        assert "first_half_pair" in audited_names
        assert "identity_pair" not in audited_names


class TestCompositionAudit:
    def test_junta_passes_linear_fails_sublinear(self):
        cells = composition_cells("p_junta")
        linear = audit_axiom_composition(MEASURES["p_junta"], cells, c=1.0)
        sublinear = audit_axiom_composition(MEASURES["p_junta"], cells, c=0.5)
        assert linear.verdict == "pass"
        assert sublinear.verdict == "fail"
        assert sublinear.evidence["witness"]["composed_value"] > 1.0

    def test_sqrt_junta_passes_sublinear(self):
        cells = composition_cells("p_sqrt_junta")
        report = audit_axiom_composition(MEASURES["p_sqrt_junta"], cells, c=0.5)
        assert report.verdict == "pass"
        assert report.evidence["triggered"]

    def test_rdp_passes_with_exact_divergences(self):
        cells = composition_cells("p_rdp")
        report = audit_axiom_composition(MEASURES["p_rdp"], cells, c=0.5)
        assert report.verdict == "pass"


class TestScalingAudit:
    def test_rdp_subsample_meets_4_over_k(self):
        report = audit_axiom_scaling(MEASURES["p_rdp"], (2, 3, 4), seed=0)
        assert report.verdict == "pass"
        for check in report.evidence["checks"]:
            assert check["achieved"] <= check["bound"] + 1e-9

    def test_junta_first_n_scales_linearly(self):
        report = audit_axiom_scaling(MEASURES["p_junta"], (2, 4), seed=0)
        assert report.verdict == "pass"

    def test_sqrt_junta_fails_linear_target(self):
        report = audit_axiom_scaling(MEASURES["p_sqrt_junta"], (2, 4), seed=0)
        assert report.verdict == "fail"
        witness = report.evidence["witness"]
        assert witness["achieved"] == pytest.approx(
            math.sqrt(1.0 / witness["k"]))

    def test_heavy_transform_exact_table(self):
        base = heavy_majority_mechanism(2, 4)
        scaled = heavy_gated_subsample(base, 12)
        assert p_heavy(scaled, n_floor=4) == 0.0
        # light 12-samples map to the marker deterministically
        row = scaled.row(tuple([0] * 6 + [1] * 6))
        assert row[0] == 1.0

    def test_first_n_extension_output_law(self):
        rng = derive_rng(0, "first-n")
        base = coordinate_mechanism(2, 2, 0)
        ext = extend_first_n(base, 6)
        dist = FiniteDistribution(rng.dirichlet(np.ones(2)))
        assert np.allclose(output_law(ext, dist).probs,
                           output_law(base, dist).probs, atol=1e-12)


class TestCatalog:
    def test_micro_catalog_builds(self):
        for name, entry in micro_catalog().items():
            mech = entry.build()
            assert mech.sample_size == 8, name
            assert np.allclose(mech.rows.sum(axis=1), 1.0)

    def test_manifest_is_versioned_and_serializable(self):
        import json

        m = manifest()
        assert m["version"] == "1"
        assert "set_leak" in m["attack"]
        assert "rr_pair" in m["blatant"]
        json.dumps(m)  # must be JSON-serializable

    def test_expected_matrix_covers_all_measures(self):
        assert set(EXPECTED_MATRIX) == set(MEASURES)
