"""Shared exception types."""


class DimensionError(ValueError):
    """Two objects have incompatible support or sample sizes."""


class InfeasibleError(ValueError):
    """An exact enumeration would exceed the tabular feasibility guardrail."""


class RegimeError(ValueError):
    """A parameter falls outside the regime a guarantee is stated for."""
