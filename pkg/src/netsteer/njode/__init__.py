"""Learned environment: latent jump-ODE dynamics, likelihood, fitting, rollouts."""

from .fit import FitResult, fit_mle, homogeneous_poisson_nll
from .model import (
    INTENSITY_EXPONENT_CAP,
    LatentState,
    NjodeModel,
    checkpoint_blob,
    checkpoint_hash,
    effective_influence,
    emission_loglik,
    flow,
    init_model,
    intensity,
    jump_update,
    load_checkpoint,
    save_checkpoint,
    sequence_loglik,
    validate_checkpoint,
)
from .rollout import (
    NjodeDynamic,
    RolloutTrace,
    mean_field_rollout,
    sample_rollout,
    state_from_history,
)

__all__ = [
    "INTENSITY_EXPONENT_CAP",
    "LatentState",
    "NjodeModel",
    "FitResult",
    "RolloutTrace",
    "NjodeDynamic",
    "init_model",
    "effective_influence",
    "flow",
    "jump_update",
    "intensity",
    "emission_loglik",
    "sequence_loglik",
    "fit_mle",
    "homogeneous_poisson_nll",
    "sample_rollout",
    "mean_field_rollout",
    "state_from_history",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_blob",
    "checkpoint_hash",
    "validate_checkpoint",
]
