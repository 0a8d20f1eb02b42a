"""Cumulative-cost estimation: Monte-Carlo oracle, mean-field estimator, bound."""

from .cost import CostEstimate, mean_field_cost, monte_carlo_cost, rollout_seed
from .linear import (
    LinearJumpSystem,
    MfaCurves,
    mfa_experiment,
    random_contractive_system,
)
from .lipschitz import (
    BoundInapplicable,
    LipschitzProfile,
    estimate_lipschitz,
    mean_field_error_bound,
)

__all__ = [
    "CostEstimate",
    "mean_field_cost",
    "monte_carlo_cost",
    "rollout_seed",
    "LinearJumpSystem",
    "MfaCurves",
    "mfa_experiment",
    "random_contractive_system",
    "BoundInapplicable",
    "LipschitzProfile",
    "estimate_lipschitz",
    "mean_field_error_bound",
]
