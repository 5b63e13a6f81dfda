"""privlab: a finite-domain differential-privacy laboratory.

Mechanisms over finite domains are represented explicitly, so privacy
definitions ((eps, delta)-DP, order-2 Renyi DP, TV stability), their
composition calculus, reconstruction attacks, private selection, and
privacy-measure axiom audits can all be verified exactly at desk scale.
"""

from .finite_prob import (
    TOLERANCE,
    FiniteDistribution,
    HypergeometricParams,
    hypergeom_median_near_mean,
    hypergeom_pmf,
    learn_empirical,
    logconcave_mode_bound_holds,
    tv_distance,
)
from .mechanisms import (
    Preprocessor,
    SampledMechanism,
    TabularMechanism,
    apply,
    compose_tuple,
    preprocess,
    subsample,
    symmetrize,
)
from .dp_analysis import (
    DpReport,
    dp_violation_witness,
    group_privacy_lb_holds,
    min_delta_for_epsilon,
    min_epsilon_for_delta,
    min_rdp_epsilon,
    renyi_divergence,
)
from .composition import (
    CompositionInput,
    basic_composition,
    pdp_composition_params,
    rdp_composition,
    rdp_separation_min_samples,
    rdp_subsample_amplify,
    strong_composition,
)
from .stability import (
    StatisticalTask,
    equivalent_on,
    failure_probability,
    make_tv_stable_small_domain,
    rho_disjoint,
    stab_tv,
    transfer_stability_gap,
)
from .coupling import (
    WalkTrace,
    key_lemma_check,
    random_walk,
    sample_jd,
    set_dist,
    verify_walk_marginals,
)
from .adversary import (
    blatant_attack,
    find_element_hardness_probe,
    find_element_reduction,
    hypothesis_select,
    recovery_score,
    task_find_element,
    task_find_light_element,
)
from .selection import (
    check_replicability,
    dp_select,
    laplace_noise,
    pick_heavy,
    rdp_select,
    rep_to_dp,
)

__version__ = "0.1.0"
