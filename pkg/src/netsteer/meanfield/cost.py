"""Cumulative-cost estimation: Monte-Carlo oracle J and mean-field estimator.

``J(t)`` averages the discounted total count ``sum_{i<=t} gamma^i sum_n x_n^i``
over independent stochastic rollouts keyed by ``(seed, index)``; the
reduction runs in fixed index order. ``Jhat(t)`` replaces sampled counts by
the fed-back intensities, costing exactly one deterministic trajectory.

A dynamic is anything exposing::

    n_nodes
    mean_field_intensities(steps) -> (steps, N)
    sample_counts(steps, seed)    -> (steps, N)

with ``steps = t + 1`` (step 0 is the first future bin).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CostEstimate", "monte_carlo_cost", "mean_field_cost", "rollout_seed"]


@dataclass(frozen=True)
class CostEstimate:
    value: float
    stderr: float
    rollouts: int
    gamma: float

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.rollouts < 1:
            raise ValueError("rollouts must be >= 1")


def rollout_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Independent per-rollout stream keyed by (seed, index)."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(index,))


def _discount(gamma: float, steps: int) -> np.ndarray:
    return gamma ** np.arange(steps, dtype=np.float64)


def monte_carlo_cost(dynamic, t: int, gamma: float, rollouts: int,
                     seed: int) -> CostEstimate:
    """Monte-Carlo estimate of the discounted cumulative count up to ``t``."""
    if rollouts < 1:
        raise ValueError("rollouts must be >= 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    steps = t + 1
    disc = _discount(gamma, steps)
    totals = np.empty(rollouts)
    for k in range(rollouts):
        counts = dynamic.sample_counts(steps, rollout_seed(seed, k))
        totals[k] = float(disc @ counts.sum(axis=1))
    stderr = float(totals.std(ddof=1) / np.sqrt(rollouts)) if rollouts > 1 else 0.0
    return CostEstimate(value=float(totals.mean()), stderr=stderr,
                        rollouts=rollouts, gamma=gamma)


def mean_field_cost(dynamic, t: int, gamma: float) -> CostEstimate:
    """Deterministic mean-field estimate; one trajectory, zero stderr."""
    if t < 0:
        raise ValueError("t must be >= 0")
    steps = t + 1
    lam = dynamic.mean_field_intensities(steps)
    value = float(_discount(gamma, steps) @ lam.sum(axis=1))
    return CostEstimate(value=value, stderr=0.0, rollouts=1, gamma=gamma)
