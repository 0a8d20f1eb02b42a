"""Maximum-likelihood fitting of the jump-ODE model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..diffcore import Adam, NumericFault, grad
from ..pointproc import SpikeCountMatrix
from .model import NjodeModel, sequence_loglik

__all__ = ["FitResult", "fit_mle", "homogeneous_poisson_nll"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitResult:
    model: NjodeModel
    nll_curve: np.ndarray
    diverged: bool = False
    diagnostic: str = ""


def fit_mle(model: NjodeModel, X: SpikeCountMatrix, epochs: int = 200,
            lr: float = 1e-3, seed: int = 0, decay: float = 1e-2) -> FitResult:
    """Gradient ascent on the sequence log-likelihood.

    Full-batch Adam with step size ``lr / (1 + decay * epoch)``; the returned
    model is the best iterate seen, so the final NLL never exceeds the
    initial one. On a non-finite loss the fit aborts and returns the last
    good parameters with a diagnostic.
    """
    if X.counts.size == 0:
        raise ValueError("cannot fit on an empty spike matrix")
    scale = float(X.n_nodes * X.n_bins)
    params = dict(model.params)
    opt = Adam(lr=lr)
    curve: list[float] = []
    best_nll = math.inf
    best_params = params
    diverged = False
    diagnostic = ""
    for epoch in range(epochs + 1):
        try:
            ll = sequence_loglik(model, X, params=params)
        except NumericFault as exc:
            diverged = True
            diagnostic = f"aborted at epoch {epoch}: {exc}"
            logger.warning("fit_mle %s", diagnostic)
            break
        nll = -float(ll.value)
        if not math.isfinite(nll):
            diverged = True
            diagnostic = f"aborted at epoch {epoch}: non-finite loss"
            logger.warning("fit_mle %s", diagnostic)
            break
        curve.append(nll)
        if nll < best_nll:
            best_nll = nll
            best_params = params
        if epoch == epochs:
            break
        gs = grad(ll, list(params.values()))
        grads = {name: -g.value / scale for name, g in zip(params, gs)}
        params = opt.step(params, grads, lr=lr / (1.0 + decay * epoch))
    return FitResult(model=model.with_params(best_params),
                     nll_curve=np.asarray(curve), diverged=diverged,
                     diagnostic=diagnostic)


def homogeneous_poisson_nll(X: SpikeCountMatrix) -> float:
    """NLL of the per-node constant-rate Poisson baseline (rate = node mean)."""
    counts = X.counts.astype(np.float64)
    lam = counts.mean(axis=1, keepdims=True)
    lam = np.maximum(lam, 1e-12)
    ll = -lam + counts * np.log(lam) - gammaln(counts + 1.0)
    return -float(ll.sum())
