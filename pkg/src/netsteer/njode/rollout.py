"""Stochastic and mean-field rollouts of a fitted jump-ODE model.

Stochastic mode samples per-bin counts ``x ~ Poisson(lambda)`` and feeds the
samples into the jump update; mean-field mode feeds the intensities back
directly, yielding one deterministic trajectory (seed-free, differentiable in
graph mode). Both solve one ODE per bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..diffcore import val
from ..pointproc import SpikeCountMatrix
from .model import LatentState, NjodeModel, flow, intensity, jump_update

__all__ = [
    "RolloutTrace",
    "sample_rollout",
    "mean_field_rollout",
    "state_from_history",
    "NjodeDynamic",
]


@dataclass(frozen=True)
class RolloutTrace:
    latents: list
    intensities: list
    counts: np.ndarray | None
    mode: str

    @property
    def n_steps(self) -> int:
        return len(self.intensities)

    def intensity_matrix(self) -> np.ndarray:
        """(steps, N) array of intensities (values, graph detached)."""
        return np.stack([val(lam).reshape(-1) for lam in self.intensities])


def _detached_params(model: NjodeModel) -> dict:
    return {name: p.value for name, p in model.params.items()}


def sample_rollout(model: NjodeModel, state: LatentState, steps: int,
                   W_eff=None, seed: int = 0) -> RolloutTrace:
    """Roll ``steps`` bins forward sampling counts; value mode only."""
    if steps < 0:
        raise dc.ContractViolation("steps must be >= 0")
    rng = np.random.Generator(np.random.Philox(seed))
    params = _detached_params(model)
    w = val(W_eff) if W_eff is not None else None
    h = val(state.h)
    cur = LatentState(h=h, tau=state.tau)
    latents = [cur]
    intensities: list[np.ndarray] = []
    counts = np.zeros((steps, model.n_nodes), dtype=np.int64)
    for i in range(steps):
        cur = flow(model, cur, cur.tau + model.bin_width, params=params)
        lam = intensity(model, cur, params=params)
        x = rng.poisson(lam.reshape(-1)).astype(np.float64)
        counts[i] = x
        cur = jump_update(model, cur, x, W_eff=w, params=params)
        latents.append(cur)
        intensities.append(lam)
    return RolloutTrace(latents=latents, intensities=intensities,
                        counts=counts, mode="stochastic")


def mean_field_rollout(model: NjodeModel, state: LatentState, steps: int,
                       W_eff=None) -> RolloutTrace:
    """Deterministic rollout feeding intensities back as counts.

    Runs in graph mode when the state or ``W_eff`` carries Tensors (the
    planner differentiates through it); otherwise plain numpy.
    """
    if steps < 0:
        raise dc.ContractViolation("steps must be >= 0")
    graph = isinstance(state.h, dc.Tensor) or isinstance(W_eff, dc.Tensor)
    params = model.params if graph else _detached_params(model)
    cur = state if graph else LatentState(h=val(state.h), tau=state.tau)
    latents = [cur]
    intensities = []
    for _ in range(steps):
        cur = flow(model, cur, cur.tau + model.bin_width, params=params)
        lam = intensity(model, cur, params=params)
        cur = jump_update(model, cur, lam, W_eff=W_eff, params=params)
        latents.append(cur)
        intensities.append(lam)
    return RolloutTrace(latents=latents, intensities=intensities,
                        counts=None, mode="mean-field")


def state_from_history(model: NjodeModel, X: SpikeCountMatrix) -> LatentState:
    """Latent state after rolling the model over an observed count matrix."""
    params = _detached_params(model)
    h = np.zeros((model.n_nodes, model.latent_dim))
    cur = LatentState(h=h, tau=X.t0)
    for i in range(X.n_bins):
        cur = flow(model, cur, cur.tau + X.bin_width, params=params)
        x = X.counts[:, i].astype(np.float64)
        cur = jump_update(model, cur, x, params=params)
    return cur


class NjodeDynamic:
    """Adapter exposing the rollout interface used by the cost estimators."""

    def __init__(self, model: NjodeModel, state: LatentState, W_eff=None):
        self.model = model
        self.state = state
        self.W_eff = W_eff

    @property
    def n_nodes(self) -> int:
        return self.model.n_nodes

    def mean_field_intensities(self, steps: int) -> np.ndarray:
        trace = mean_field_rollout(self.model, self.state, steps, self.W_eff)
        return trace.intensity_matrix()

    def sample_counts(self, steps: int, seed: int) -> np.ndarray:
        trace = sample_rollout(self.model, self.state, steps, self.W_eff, seed)
        return trace.counts.astype(np.float64)
