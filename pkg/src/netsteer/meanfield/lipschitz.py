"""Lipschitz profiles and the mean-field approximation error bound.

For a per-node composite transition with Lipschitz constant ``L_T_n < 1``, an
intensity head that is ``L_g``-Lipschitz and bounded by ``L_0``, the gap
between the Monte-Carlo cost and its mean-field estimate at discount 1
satisfies

    |J(t) - Jhat(t)| <= N (t+1) L_g max_n M_n / (1 - max_n L_T_n)

with ``M_n = L_T_n (sqrt(L_0) + L_0)`` (the sqrt term is the per-node Poisson
standard-deviation bound, the linear term covers the intensity gap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["LipschitzProfile", "BoundInapplicable", "mean_field_error_bound",
           "estimate_lipschitz"]


class BoundInapplicable(ValueError):
    """The contraction hypothesis max L_T < 1 does not hold."""


@dataclass(frozen=True)
class LipschitzProfile:
    """Constants of one dynamic: drift, jump, composite transition, intensity."""

    L_f: float
    L_phi: float
    L_T: np.ndarray  # per node
    L_0: float
    L_g: float
    lambda_w: float

    def __post_init__(self):
        object.__setattr__(self, "L_T", np.atleast_1d(np.asarray(self.L_T, float)))
        vals = [self.L_f, self.L_phi, self.L_0, self.L_g, self.lambda_w]
        if any(v < 0 for v in vals) or np.any(self.L_T < 0):
            raise ValueError("Lipschitz constants must be nonnegative")

    @property
    def M(self) -> np.ndarray:
        return self.L_T * (math.sqrt(self.L_0) + self.L_0)

    @property
    def contractive(self) -> bool:
        return bool(np.max(self.L_T) < 1.0)


def mean_field_error_bound(profile: LipschitzProfile, n_nodes: int, t: int) -> float:
    """Bound on |J - Jhat| at discount 1; requires max L_T < 1."""
    max_lt = float(np.max(profile.L_T))
    if max_lt >= 1.0:
        raise BoundInapplicable(f"max L_T = {max_lt:.4f} >= 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    return n_nodes * (t + 1) * profile.L_g * float(np.max(profile.M)) / (1.0 - max_lt)


def estimate_lipschitz(map_fn, sampler, pairs: int, seed: int = 0) -> float:
    """Empirical lower bound on a map's Lipschitz constant.

    Samples ``pairs`` point pairs from ``sampler(rng)`` and returns the
    largest ratio ``||f(x) - f(y)|| / ||x - y||``; degenerate pairs (x == y)
    are skipped. A sampled maximum never exceeds the true constant.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    best = 0.0
    for _ in range(pairs):
        x = np.asarray(sampler(rng), dtype=np.float64)
        y = np.asarray(sampler(rng), dtype=np.float64)
        dist = float(np.linalg.norm((x - y).ravel()))
        if dist == 0.0:
            continue
        gap = float(np.linalg.norm((np.asarray(map_fn(x)) - np.asarray(map_fn(y))).ravel()))
        best = max(best, gap / dist)
    return best
