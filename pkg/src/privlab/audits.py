"""Axiom audits: exercising each privacy measure against the four axioms.

Audits certify catalogs, not universal quantifications: each verdict is
backed by the mechanisms, preprocessors, composition cells, or scaling
transforms actually run, and failing verdicts carry a reproducible
witness. The expected verdict matrix encodes which audit each defective
measure fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .catalog import (
    BlatantEntry,
    CatalogEntry,
    blatant_catalog,
    heavy_majority_mechanism,
    micro_catalog,
)
from .composition import ALPHA_DP, BETA_COMPOSITION, C_DP
from .errors import InfeasibleError
from .finite_prob import TOLERANCE, FiniteDistribution
from .measures import (
    HEAVY_COMPARISON_C,
    PrivacyMeasure,
    heavy_count_threshold,
    standard_measures,
)
from .mechanisms import (
    Preprocessor,
    TabularMechanism,
    all_datasets,
    compose_tuple,
    coordinate_mechanism,
    dataset_indices,
    first_k_mechanism,
    randomized_response_mechanism,
    subsample,
)
from .adversary import recovery_score
from .selection import majority_mechanism, rep_to_dp, rep_to_dp_group_sizes
from .seeding import derive_rng, derive_seed
from .stability import failure_probability, output_law, product_weights

AXIOM_PARTS = (
    "preprocessing.reorder",
    "preprocessing.remap",
    "preprocessing.remap_bijective",
    "blatant",
    "composition",
    "scaling",
)


@dataclass(frozen=True)
class AxiomAuditReport:
    measure: str
    axiom: str
    verdict: str  # "pass" | "fail" | "inconclusive"
    evidence: dict = field(default_factory=dict)
    notes: str = ""

    def to_json(self) -> dict:
        return {"measure": self.measure, "axiom": self.axiom,
                "verdict": self.verdict, "evidence": self.evidence,
                "notes": self.notes}


def _le(a: float, b: float) -> bool:
    if math.isinf(b):
        return True
    if math.isinf(a):
        return False
    return a <= b + TOLERANCE


# ---------------------------------------------------------------------------
# Axiom 1: preprocessing

def preprocessing_gammas(domain_size: int, sample_size: int, seed: int,
                         random_count: int = 3) -> dict[str, list[Preprocessor]]:
    """Targeted plus seeded random preprocessors for each sub-axiom."""
    rng = derive_rng(seed, "preprocessing-gammas")
    ident_sigma = tuple(range(domain_size))
    ident_pi = tuple(range(sample_size))
    reversal = tuple(reversed(ident_pi))
    swap_ends = list(ident_pi)
    swap_ends[0], swap_ends[-1] = swap_ends[-1], swap_ends[0]
    reorder = [Preprocessor(ident_sigma, reversal),
               Preprocessor(ident_sigma, tuple(swap_ends))]
    collapse = Preprocessor((0,) * domain_size, ident_pi)
    partial = list(range(domain_size))
    partial[min(1, domain_size - 1)] = 0
    remap = [collapse, Preprocessor(tuple(partial), ident_pi)]
    bijective = []
    for _ in range(random_count):
        reorder.append(Preprocessor(
            ident_sigma, tuple(int(x) for x in rng.permutation(sample_size))))
        remap.append(Preprocessor(
            tuple(int(x) for x in rng.integers(0, domain_size, domain_size)),
            ident_pi))
        bijective.append(Preprocessor(
            tuple(int(x) for x in rng.permutation(domain_size)), ident_pi))
    return {"preprocessing.reorder": reorder,
            "preprocessing.remap": remap,
            "preprocessing.remap_bijective": bijective}


def audit_axiom_preprocessing(measure: PrivacyMeasure,
                              mechanisms: dict[str, TabularMechanism],
                              gammas: dict[str, list[Preprocessor]]
                              ) -> dict[str, AxiomAuditReport]:
    """Check value(M after gamma) <= value(M) for every catalog mechanism
    and preprocessor, separately for input reordering, arbitrary domain
    remaps, and bijective remaps."""
    from .mechanisms import preprocess

    reports = {}
    base_values = {name: measure.evaluate(m) for name, m in mechanisms.items()}
    for part, gamma_list in gammas.items():
        witness = None
        checked = 0
        for name, mech in mechanisms.items():
            for g_idx, gamma in enumerate(gamma_list):
                value = measure.evaluate(preprocess(mech, gamma))
                checked += 1
                if not _le(value, base_values[name]):
                    witness = {"mechanism": name, "gamma_index": g_idx,
                               "sigma": list(gamma.sigma), "pi": list(gamma.pi),
                               "base_value": base_values[name],
                               "preprocessed_value": value}
                    break
            if witness:
                break
        verdict = "fail" if witness else "pass"
        reports[part] = AxiomAuditReport(
            measure.name, part, verdict,
            {"checked": checked, "witness": witness})
    return reports


# ---------------------------------------------------------------------------
# Axiom 2: prohibition of blatant non-privacy

def audit_axiom_blatant(measure: PrivacyMeasure,
                        entries: dict[str, BlatantEntry],
                        trials: int = 400, seed: int = 0) -> AxiomAuditReport:
    """For every catalog entry the measure deems private, run its
    registered adversaries; fail when any private entry is blatantly
    reconstructed (score - 3 SE >= 0.9 n)."""
    witness = None
    audited = []
    for name, entry in entries.items():
        value = entry.measure_values.get(measure.name)
        if value is None or value > 1.0 + TOLERANCE:
            continue
        best = None
        for adv_name, adversary in entry.adversaries.items():
            score = recovery_score(entry.mechanism, adversary, entry.source,
                                   trials, entry.sample_size,
                                   seed=derive_seed(seed, name, adv_name))
            if best is None or score.score > best[1].score:
                best = (adv_name, score)
        audited.append({"entry": name, "value": value,
                        "adversary": best[0], "score": best[1].score,
                        "standard_error": best[1].standard_error,
                        "threshold": best[1].threshold})
        if best[1].blatant and witness is None:
            witness = audited[-1]
    if not audited:
        return AxiomAuditReport(measure.name, "blatant", "inconclusive",
                                {"audited": audited},
                                "no private catalog entry to attack")
    verdict = "fail" if witness else "pass"
    return AxiomAuditReport(measure.name, "blatant", verdict,
                            {"audited": audited, "witness": witness})


# ---------------------------------------------------------------------------
# Axiom 3: strong composition

@dataclass(frozen=True)
class CompositionCell:
    """Mechanisms to compose in one audit cell."""

    name: str
    mechanisms: tuple[TabularMechanism, ...]


def composition_cells(measure_name: str) -> list[CompositionCell]:
    """Measure-appropriate composition cells. Junta-style measures compose
    juntas on disjoint coordinates (same-coordinate copies never grow);
    DP-style measures compose independent randomized-response copies."""
    X, n = 2, 8
    cells: list[CompositionCell] = []
    if measure_name in ("p_junta", "p_sqrt_junta", "p_all"):
        for ell in (2, 4, 8):
            cells.append(CompositionCell(
                f"disjoint-coordinate-juntas-l{ell}",
                tuple(coordinate_mechanism(X, n, c) for c in range(ell))))
    elif measure_name == "p_half":
        for ell in (2, 4):
            cells.append(CompositionCell(
                f"first-half-juntas-l{ell}",
                tuple(coordinate_mechanism(X, n, c % (n // 2))
                      for c in range(ell))))
    elif measure_name == "p_heavy":
        base = heavy_majority_mechanism(X, n)
        for ell in (2, 3):
            cells.append(CompositionCell(
                f"heavy-gated-l{ell}", tuple([base] * ell)))
    elif measure_name == "p_rdp":
        base = randomized_response_mechanism(2, 0.3, 2)
        for ell in (2, 4):
            cells.append(CompositionCell(
                f"rr-0.3-l{ell}", tuple([base] * ell)))
    elif measure_name == "p_dp":
        base = randomized_response_mechanism(2, 3.8e-4, 2)
        for ell in (2, 4):
            cells.append(CompositionCell(
                f"rr-tiny-l{ell}", tuple([base] * ell)))
    else:
        raise ValueError(f"no composition cells for {measure_name}")
    return cells


def composition_polylog(measure_name: str, sample_size: int) -> float:
    """Polylog factor kappa in eps' = kappa * eps * l^c. The DP measure's
    factor is (beta log2(n)^2)^(2c); the others use 1."""
    if measure_name == "p_dp":
        log_sq = max(math.log2(sample_size), 1.0) ** 2
        return (BETA_COMPOSITION * log_sq) ** (2.0 * C_DP)
    return 1.0


def audit_axiom_composition(measure: PrivacyMeasure,
                            cells: Sequence[CompositionCell],
                            c: float, kappa: float | None = None
                            ) -> AxiomAuditReport:
    """For cells whose per-mechanism privacy level eps gives
    eps' = kappa * eps * l^c <= 1, assert the composed mechanism's value
    stays at most 1."""
    witness = None
    triggered = []
    skipped = []
    for cell in cells:
        values = [measure.evaluate(m) for m in cell.mechanisms]
        eps = max(values)
        ell = len(cell.mechanisms)
        k = kappa if kappa is not None else composition_polylog(
            measure.name, cell.mechanisms[0].sample_size)
        eps_prime = k * eps * ell**c if not math.isinf(eps) else math.inf
        if eps_prime > 1.0 + TOLERANCE:
            skipped.append({"cell": cell.name, "eps": eps,
                            "eps_prime": eps_prime})
            continue
        composed_value = measure.evaluate(compose_tuple(cell.mechanisms))
        entry = {"cell": cell.name, "ell": ell, "eps": eps,
                 "eps_prime": eps_prime, "composed_value": composed_value}
        triggered.append(entry)
        if not _le(composed_value, 1.0) and witness is None:
            witness = entry
    if not triggered:
        return AxiomAuditReport(measure.name, "composition", "inconclusive",
                                {"c": c, "skipped": skipped},
                                "no cell entered the eps' <= 1 regime")
    verdict = "fail" if witness else "pass"
    return AxiomAuditReport(measure.name, "composition", verdict,
                            {"c": c, "triggered": triggered,
                             "skipped": skipped, "witness": witness})


# ---------------------------------------------------------------------------
# Axiom 4: linear scaling

def extend_first_n(mechanism: TabularMechanism, m: int) -> TabularMechanism:
    """Run the base mechanism on the first n of m inputs."""
    n = mechanism.sample_size
    if m < n:
        raise ValueError("m must be at least the base sample size")
    datasets = all_datasets(mechanism.domain_size, m)
    rows = mechanism.rows[dataset_indices(datasets[:, :n], mechanism.domain_size)]
    return TabularMechanism(mechanism.domain_size, m, mechanism.output_size, rows)


def heavy_gated_subsample(mechanism: TabularMechanism, m: int) -> TabularMechanism:
    """Subsample n of m inputs for the base mechanism, but release its
    output only when the full m-sample is heavy; otherwise emit the base
    mechanism's fixed non-heavy output. Requires an order-invariant,
    heavy-gated base with marker output 0 and m >= 2n + 1."""
    n = mechanism.sample_size
    X = mechanism.domain_size
    if m < 2 * n + 1:
        raise ValueError("the heavy comparison needs m >= 2n + 1")
    from scipy.stats import hypergeom

    count_rows = np.zeros((m + 1, mechanism.output_size))
    base_counts = all_datasets(X, n)
    if X != 2:
        raise ValueError("count-class construction implemented for |X| = 2")
    base_by_count = {}
    for i in range(base_counts.shape[0]):
        c = int(base_counts[i].sum())
        base_by_count.setdefault(c, mechanism.rows[i])
    threshold_m = heavy_count_threshold(m)
    for c in range(m + 1):
        if max(c, m - c) >= threshold_m:
            weights = hypergeom.pmf(np.arange(n + 1), m, c, n)
            count_rows[c] = sum(w * base_by_count[j]
                                for j, w in enumerate(weights))
        else:
            count_rows[c, 0] = 1.0
    datasets = all_datasets(X, m)
    rows = count_rows[datasets.sum(axis=1)]
    return TabularMechanism(X, m, mechanism.output_size, rows)


@dataclass(frozen=True)
class ScalingCheck:
    """One (mechanism, k) scaling-audit cell result."""

    k: int
    value_bound: float
    achieved: float
    basis: str
    equivalence: dict

    @property
    def ok(self) -> bool:
        return _le(self.achieved, self.value_bound)


def _distribution_grid(domain_size: int, seed: int, count: int = 4
                       ) -> list[FiniteDistribution]:
    rng = derive_rng(seed, "scaling-grid")
    grid = [FiniteDistribution(np.full(domain_size, 1.0 / domain_size))]
    for _ in range(count - 1):
        grid.append(FiniteDistribution(rng.dirichlet(np.ones(domain_size))))
    return grid


def _scaling_rdp(measure, k_values, seed) -> list[ScalingCheck]:
    base = randomized_response_mechanism(2, 1.0, 1)
    checks = []
    for k in k_values:
        scaled = subsample(base, k)
        achieved = measure.evaluate(scaled)
        worst = 0.0
        for dist in _distribution_grid(2, seed):
            worst = max(worst, float(np.abs(
                output_law(scaled, dist).probs - output_law(base, dist).probs
            ).max()))
        checks.append(ScalingCheck(
            k, 4.0 / k, achieved, "exact subsampled table",
            {"kind": "output-law identity", "max_gap": worst,
             "ok": worst <= TOLERANCE}))
    return checks


def _scaling_first_n(measure, base: TabularMechanism, k_values, seed,
                     constant: float) -> list[ScalingCheck]:
    checks = []
    for k in k_values:
        scaled = extend_first_n(base, k * base.sample_size)
        achieved = measure.evaluate(scaled)
        worst = 0.0
        for dist in _distribution_grid(base.domain_size, seed):
            worst = max(worst, float(np.abs(
                output_law(scaled, dist).probs - output_law(base, dist).probs
            ).max()))
        checks.append(ScalingCheck(
            k, constant / k, achieved, "exact first-n extension",
            {"kind": "output-law identity", "max_gap": worst,
             "ok": worst <= TOLERANCE}))
    return checks


def _scaling_heavy(measure, k_values, seed) -> list[ScalingCheck]:
    from .measures import p_heavy

    n = 4  # below the analysis constant; the relaxation is recorded
    base = heavy_majority_mechanism(2, n)
    base_value = p_heavy(base, n_floor=n)
    checks = []
    for k in k_values:
        m = k * n
        scaled = heavy_gated_subsample(base, m)
        achieved = p_heavy(scaled, n_floor=n)
        inflation = HEAVY_COMPARISON_C + 1.0
        entries = []
        ok = True
        for dist in _distribution_grid(2, seed):
            for invalid_marker in (False, True):
                mask = np.ones(base.output_size, dtype=bool)
                if invalid_marker:
                    mask[0] = False
                    mask[1 + int(np.argmax(dist.probs))] = True
                base_fail = _masked_failure(base, dist, mask)
                scaled_fail = _masked_failure(scaled, dist, mask)
                bound = base_fail + inflation * max(base_fail, 1e-12) \
                    if invalid_marker else base_fail + TOLERANCE
                entries.append({"base_fail": base_fail,
                                "scaled_fail": scaled_fail,
                                "invalid_marker": invalid_marker,
                                "bound": bound})
                if scaled_fail > bound + 1e-9:
                    ok = False
        checks.append(ScalingCheck(
            k, 1.0 / k if base_value <= 1.0 else math.inf, achieved,
            "exact count-class table (n floor relaxed to 4)",
            {"kind": "exact failure inflation", "entries": entries, "ok": ok}))
    return checks


def _masked_failure(mechanism: TabularMechanism, dist: FiniteDistribution,
                    valid_mask: np.ndarray) -> float:
    w = product_weights(dist, mechanism.sample_size)
    invalid = (~valid_mask).astype(np.float64)
    return float(w @ (mechanism.rows @ invalid))


def _scaling_dp_certificate(k_values, seed, equivalence_trials: int = 20
                            ) -> list[ScalingCheck]:
    """Certificate route: the replicability-to-DP pipeline at target
    eps_t = alpha (1/k)^(4/5) certifies value (eps_t/alpha)^(5/4) = 1/k;
    its premises (per-group selection privacy coverage and the one-slot
    locality of a neighboring change) are checked arithmetically and
    structurally, and equivalence is sampled on the heavy-coin task."""
    from .selection import pick_heavy_regime_size, rep_to_dp_privacy_ell

    n = 30
    base = majority_mechanism(2, n)
    source = FiniteDistribution([0.8, 0.2])
    checks = []
    for k in k_values:
        eps_t = ALPHA_DP * (1.0 / k) ** 0.8
        beta = 0.1
        delta_t, ell, groups = 1e-12, 0, 0
        for _ in range(6):
            groups, ell_corr = rep_to_dp_group_sizes(eps_t, delta_t, beta)
            ell = max(ell_corr, rep_to_dp_privacy_ell(eps_t, delta_t))
            m = groups * ell * n
            delta_t = eps_t * eps_t / m**3
        m = groups * ell * n
        reduced = rep_to_dp(base, eps_t, delta_t, beta, k=groups, ell=ell,
                            check_regime=False)
        coverage_ok = ell >= rep_to_dp_privacy_ell(eps_t, delta_t)
        rng = derive_rng(seed, "dp-scaling", k)
        fails = 0
        for t in range(equivalence_trials):
            data = tuple(int(x) for x in source.sample(rng, m))
            if reduced.sample(data, int(rng.integers(2**63))) != 0:
                fails += 1
        fail_rate = fails / equivalence_trials
        checks.append(ScalingCheck(
            k, 1.0 / k, (eps_t / ALPHA_DP) ** 1.25,
            "certificate: (eps_t, eps_t^2/m^3)-DP pipeline, "
            "coverage and locality checked",
            {"kind": "heavy-coin equivalence (sampled)",
             "eps_t": eps_t, "delta_t": delta_t, "groups": groups,
             "ell": ell, "m": m, "coverage_ok": coverage_ok,
             "fail_rate": fail_rate, "bound": 5 * beta,
             "ok": coverage_ok and fail_rate <= 5 * beta}))
    return checks


def audit_axiom_scaling(measure: PrivacyMeasure, k_values: Sequence[int],
                        seed: int = 0) -> AxiomAuditReport:
    """Apply the measure's registered scaler at each k and assert the
    scaled value meets C/k together with the equivalence check."""
    name = measure.name
    if name == "p_rdp":
        checks = _scaling_rdp(measure, k_values, seed)
    elif name in ("p_junta", "p_sqrt_junta"):
        checks = _scaling_first_n(measure, coordinate_mechanism(2, 2, 0),
                                  k_values, seed, constant=1.0)
    elif name == "p_half":
        checks = _scaling_first_n(measure, first_k_mechanism(2, 2, 1),
                                  k_values, seed, constant=1.0)
    elif name == "p_all":
        checks = _scaling_first_n(measure, coordinate_mechanism(2, 2, 0),
                                  k_values, seed, constant=1.0)
    elif name == "p_heavy":
        checks = _scaling_heavy(measure, [k for k in k_values if k >= 3] or [3],
                                seed)
    elif name == "p_dp":
        checks = _scaling_dp_certificate(k_values, seed)
    else:
        return AxiomAuditReport(name, "scaling", "inconclusive", {},
                                "no registered scaling transform")
    witness = None
    for check in checks:
        if not (check.ok and check.equivalence.get("ok", True)):
            witness = {"k": check.k, "achieved": check.achieved,
                       "bound": check.value_bound,
                       "equivalence": check.equivalence}
            break
    verdict = "fail" if witness else "pass"
    evidence = {"checks": [{"k": c.k, "bound": c.value_bound,
                            "achieved": c.achieved, "basis": c.basis,
                            "equivalence_ok": c.equivalence.get("ok", True)}
                           for c in checks],
                "witness": witness}
    notes = ""
    if measure.name == "p_heavy":
        notes = "sample-size floor relaxed below the analysis constant 40"
    return AxiomAuditReport(name, "scaling", verdict, evidence, notes)


# ---------------------------------------------------------------------------
# The full matrix

EXPECTED_MATRIX: dict[str, dict[str, str]] = {
    "p_dp": {part: "pass" for part in AXIOM_PARTS},
    "p_rdp": {part: "pass" for part in AXIOM_PARTS},
    "p_half": {
        "preprocessing.reorder": "fail",
        "preprocessing.remap": "pass",
        "preprocessing.remap_bijective": "pass",
        "blatant": "pass", "composition": "pass", "scaling": "pass",
    },
    "p_heavy": {
        "preprocessing.reorder": "pass",
        "preprocessing.remap": "fail",
        "preprocessing.remap_bijective": "pass",
        "blatant": "pass", "composition": "pass", "scaling": "pass",
    },
    "p_all": {
        "preprocessing.reorder": "pass",
        "preprocessing.remap": "pass",
        "preprocessing.remap_bijective": "pass",
        "blatant": "fail", "composition": "pass", "scaling": "pass",
    },
    "p_junta": {
        "preprocessing.reorder": "pass",
        "preprocessing.remap": "pass",
        "preprocessing.remap_bijective": "pass",
        "blatant": "pass", "composition": "pass", "scaling": "pass",
    },
    "p_sqrt_junta": {
        "preprocessing.reorder": "pass",
        "preprocessing.remap": "pass",
        "preprocessing.remap_bijective": "pass",
        "blatant": "pass", "composition": "pass", "scaling": "fail",
    },
}

#: p_junta additionally fails strong composition below its linear exponent.
JUNTA_SUBLINEAR_EXPECTED = "fail"


def axiom_matrix(seed: int = 0, blatant_trials: int = 400,
                 scaling_k: Sequence[int] = (2, 4)) -> dict:
    """Run every audit for every measure; returns verdicts plus reports."""
    measures = standard_measures()
    micro = {name: entry.build() for name, entry in micro_catalog().items()}
    gammas = preprocessing_gammas(2, 8, seed)
    blatant_entries = blatant_catalog(seed)
    verdicts: dict[str, dict[str, str]] = {}
    reports: dict[str, dict[str, AxiomAuditReport]] = {}
    for name, measure in measures.items():
        mechs = dict(micro)
        part_gammas = gammas
        if name == "p_heavy":
            # a remap witness needs a partial collapse, impossible on a
            # binary domain: audit the heavy measure on ternary entries
            from .catalog import heavy_leak_mechanism

            mechs = {"heavy_leak3": heavy_leak_mechanism(3, 8),
                     "heavy_majority3": heavy_majority_mechanism(3, 8)}
            part_gammas = preprocessing_gammas(3, 8, seed)
        pre = audit_axiom_preprocessing(measure, mechs, part_gammas)
        blat = audit_axiom_blatant(measure, blatant_entries,
                                   trials=blatant_trials, seed=seed)
        comp = audit_axiom_composition(measure, composition_cells(name),
                                       c=measure.composition_exponent)
        scal = audit_axiom_scaling(measure, scaling_k, seed=seed)
        row_reports = dict(pre)
        row_reports["blatant"] = blat
        row_reports["composition"] = comp
        row_reports["scaling"] = scal
        if name == "p_junta":
            row_reports["composition.sublinear"] = audit_axiom_composition(
                measure, composition_cells(name), c=0.5)
        reports[name] = row_reports
        verdicts[name] = {k: r.verdict for k, r in row_reports.items()}
    return {"verdicts": verdicts, "reports": reports,
            "expected": EXPECTED_MATRIX}


def matrix_matches_expected(verdicts: dict[str, dict[str, str]]) -> bool:
    for measure, row in EXPECTED_MATRIX.items():
        for axiom, expected in row.items():
            if verdicts.get(measure, {}).get(axiom) != expected:
                return False
    return verdicts.get("p_junta", {}).get("composition.sublinear") == \
        JUNTA_SUBLINEAR_EXPECTED
