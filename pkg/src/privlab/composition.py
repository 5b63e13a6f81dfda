"""Closed-form composition and amplification formulas.

Includes the numeric replay of the strong-composition parameter chain
used to certify the single-parameter DP measure, with its pinned
constants exposed on the returned record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import RegimeError

#: Constant of the DP amplification lemma (<= 0.1); companion of the 0.1
#: epsilon level in the single-parameter DP measure.
ALPHA_DP = 0.05

#: "Suitably large" constant multiplying log^2(n) in the composition chain.
BETA_COMPOSITION = 64.0

#: Strong-composition exponent achieved by the single-parameter DP measure.
C_DP = 5.0 / 8.0


@dataclass(frozen=True)
class CompositionInput:
    """Per-mechanism (epsilon, delta) and the number of composed copies."""

    epsilon: float
    delta: float
    ell: int

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.ell < 1:
            raise ValueError("ell must be a positive integer")


@dataclass(frozen=True)
class ComposedPrivacy:
    epsilon: float
    delta: float
    delta_clamped: bool = False
    outside_unit_regime: bool = False

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "delta_clamped": self.delta_clamped,
            "outside_unit_regime": self.outside_unit_regime,
        }


def basic_composition(inp: CompositionInput) -> ComposedPrivacy:
    """(l * eps, l * delta), delta capped at 1 with a flag."""
    delta = inp.ell * inp.delta
    clamped = delta > 1.0
    return ComposedPrivacy(inp.ell * inp.epsilon, min(delta, 1.0), clamped)


def strong_composition(inp: CompositionInput, sqrt2: bool = False) -> ComposedPrivacy:
    """Advanced composition: delta' = 2*l*delta and
    eps' = eps * sqrt(l * ln(1/(l*delta))) + l * eps * (e^eps - 1).

    ``sqrt2=True`` uses sqrt(2 * l * ln(1/(l*delta))) in the first term,
    the variant appearing in the parameter chain replayed by
    :func:`pdp_composition_params`. Flags results with eps' >= 1, outside
    the regime the calculus is used in.
    """
    ld = inp.ell * inp.delta
    if ld >= 1.0:
        raise RegimeError(f"l*delta = {ld} must be below 1")
    if ld <= 0.0:
        raise RegimeError("strong composition requires delta > 0")
    factor = 2.0 if sqrt2 else 1.0
    eps = (inp.epsilon * math.sqrt(factor * inp.ell * math.log(1.0 / ld))
           + inp.ell * inp.epsilon * math.expm1(inp.epsilon))
    raw_delta = 2.0 * ld
    return ComposedPrivacy(eps, min(raw_delta, 1.0), raw_delta > 1.0, eps >= 1.0)


def rdp_composition(epsilon: float, alpha: float, ell: int) -> float:
    """Non-adaptive composition of l copies at the same order: l * eps."""
    if epsilon < 0 or ell < 1:
        raise ValueError("epsilon must be nonnegative and ell positive")
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    return ell * epsilon


def rdp_subsample_amplify(epsilon: float, n: int, m: int) -> float:
    """Order-2 amplification by subsampling without replacement:
    eps' = ln(1 + 4 (n/m)^2 (e^eps - 1))."""
    if m < n:
        raise ValueError(f"m={m} must be at least n={n}")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    ratio = n / m
    return math.log1p(4.0 * ratio * ratio * math.expm1(epsilon))


@dataclass(frozen=True)
class PdpCompositionRecord:
    """Numeric replay of the strong-composition chain for the
    single-parameter DP measure, all intermediates included."""

    epsilon: float
    n: int
    ell: int
    alpha: float
    beta: float
    c: float
    regime_bound: float
    mu: float
    delta: float
    mu_at_most_one: bool
    mu_sq_ell_below_alpha: bool
    eps_star: float
    delta_star: float
    delta_star_bound: float
    eps_star_ok: bool
    delta_star_ok: bool

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def pdp_composition_params(epsilon: float, n: int, ell: int,
                           alpha: float = ALPHA_DP,
                           beta: float = BETA_COMPOSITION) -> PdpCompositionRecord:
    """Replay the parameter chain showing that l composed copies at privacy
    level ``epsilon`` stay within the (0.1, alpha^2/n^3) certificate.

    Requires epsilon <= l^(-c) * (beta * log2(n)^2)^(-2c) with c = 5/8;
    then mu = alpha * eps^(4/5), delta = mu^2 / n^3, and the sqrt2 strong
    composition of l copies of (mu, delta) must give eps* <= 0.1 and
    delta* <= alpha^2 / n^3.
    """
    if n < 2 or ell < 1 or epsilon <= 0:
        raise ValueError("need n >= 2, ell >= 1, epsilon > 0")
    c = C_DP
    log_sq = math.log2(n) ** 2
    bound = ell ** (-c) * (beta * log_sq) ** (-2.0 * c)
    if epsilon > bound * (1.0 + 1e-12):
        raise RegimeError(
            f"epsilon={epsilon:.3e} violates epsilon <= "
            f"ell^(-5/8) * (beta*log2(n)^2)^(-5/4) = {bound:.3e}"
        )
    mu = alpha * epsilon ** 0.8
    delta = mu * mu / n**3
    composed = strong_composition(CompositionInput(mu, delta, ell), sqrt2=True)
    delta_star_bound = alpha * alpha / n**3
    record = PdpCompositionRecord(
        epsilon=epsilon, n=n, ell=ell, alpha=alpha, beta=beta, c=c,
        regime_bound=bound, mu=mu, delta=delta,
        mu_at_most_one=mu <= 1.0,
        mu_sq_ell_below_alpha=mu * mu * ell <= alpha,
        eps_star=composed.epsilon, delta_star=composed.delta,
        delta_star_bound=delta_star_bound,
        eps_star_ok=composed.epsilon <= 0.1,
        delta_star_ok=composed.delta <= delta_star_bound,
    )
    if not (record.eps_star_ok and record.delta_star_ok):
        raise RegimeError(
            "composition chain failed: "
            + ("eps* > 0.1 " if not record.eps_star_ok else "")
            + ("delta* > alpha^2/n^3" if not record.delta_star_ok else "")
        )
    return record


def rdp_separation_min_samples(output_log2: float, epsilon: float) -> int:
    """Smallest m with |Y| * (e^-eps / 2)^(2^m) <= 1, i.e.
    2^m >= ln|Y| / (eps + ln 2), for log2|Y| = output_log2."""
    if output_log2 <= 0:
        raise ValueError("output_log2 must be positive")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    log_y = output_log2 * math.log(2.0)
    threshold = log_y / (epsilon + math.log(2.0))
    if threshold <= 1.0:
        return 0
    m = max(0, math.ceil(math.log2(threshold)))
    while 2.0**m < threshold:
        m += 1
    return m
