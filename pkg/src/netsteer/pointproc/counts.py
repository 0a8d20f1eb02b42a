"""Conditional spike-count distribution family.

Each family is parameterized by a natural parameter ``psi`` and, where
needed, a dispersion / trial count ``upsilon``:

    Poisson(exp(psi))            mean exp(psi)         var exp(psi)
    Bernoulli(sigmoid(psi))      mean s(psi)           var s(psi) s(-psi)
    Binomial(upsilon, s(psi))    mean upsilon s(psi)   var upsilon s(psi) s(-psi)
    NegBinomial(upsilon, s(psi)) mean upsilon exp(psi) var upsilon exp(psi)/s(-psi)

Out-of-support arguments yield ``-inf`` log-probability (flagged on the
module logger). The main model pipeline uses the Poisson row; the rest of the
family is provided for completeness.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from scipy.special import gammaln

__all__ = ["CountDistribution", "FAMILIES"]

logger = logging.getLogger(__name__)

FAMILIES = ("poisson", "bernoulli", "binomial", "negative_binomial")


def _log_sigmoid(z: float) -> float:
    # log s(z) = -softplus(-z), stable on both tails
    if z >= 0:
        return -math.log1p(math.exp(-z))
    return z - math.log1p(math.exp(z))


@dataclass(frozen=True)
class CountDistribution:
    family: str
    psi: float
    upsilon: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family in ("binomial", "negative_binomial"):
            if self.upsilon is None or self.upsilon <= 0:
                raise ValueError(f"{self.family} requires upsilon > 0")

    def mean(self) -> float:
        s = 1.0 / (1.0 + math.exp(-self.psi))
        if self.family == "poisson":
            return math.exp(self.psi)
        if self.family == "bernoulli":
            return s
        if self.family == "binomial":
            return self.upsilon * s
        return self.upsilon * math.exp(self.psi)

    def variance(self) -> float:
        s = 1.0 / (1.0 + math.exp(-self.psi))
        s_neg = 1.0 / (1.0 + math.exp(self.psi))
        if self.family == "poisson":
            return math.exp(self.psi)
        if self.family == "bernoulli":
            return s * s_neg
        if self.family == "binomial":
            return self.upsilon * s * s_neg
        return self.upsilon * math.exp(self.psi) / s_neg

    def logpmf(self, x: int) -> float:
        if x < 0 or x != int(x):
            return self._flag(x)
        x = int(x)
        psi = self.psi
        if self.family == "poisson":
            return -math.exp(psi) + x * psi - math.lgamma(x + 1)
        if self.family == "bernoulli":
            if x not in (0, 1):
                return self._flag(x)
            return x * _log_sigmoid(psi) + (1 - x) * _log_sigmoid(-psi)
        if self.family == "binomial":
            v = self.upsilon
            if x > v:
                return self._flag(x)
            comb = gammaln(v + 1) - gammaln(x + 1) - gammaln(v - x + 1)
            return float(comb + x * _log_sigmoid(psi) + (v - x) * _log_sigmoid(-psi))
        v = self.upsilon
        comb = gammaln(v + x) - gammaln(x + 1) - gammaln(v)
        return float(comb + x * _log_sigmoid(psi) + v * _log_sigmoid(-psi))

    def _flag(self, x) -> float:
        logger.debug("out-of-support count %s for %s", x, self)
        return float("-inf")

    def support_upper(self, tail: float = 1e-12) -> int:
        """Smallest K with cumulative mass >= 1 - tail (finite families exact)."""
        if self.family == "bernoulli":
            return 1
        if self.family == "binomial":
            return int(self.upsilon)
        total = 0.0
        x = 0
        while total < 1.0 - tail:
            total += math.exp(self.logpmf(x))
            x += 1
            if x > 10_000_000:
                raise RuntimeError("support truncation did not converge")
        return x - 1
