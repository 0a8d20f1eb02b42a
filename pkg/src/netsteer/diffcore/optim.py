"""Adam over named parameter dictionaries.

Tensors are immutable, so a step maps ``{name: Tensor}`` to a fresh dict; the
moment estimates live in the optimizer keyed by parameter name.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["Adam"]


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t = 0

    def step(self, params: dict[str, Tensor], grads: dict[str, np.ndarray],
             lr: float | None = None) -> dict[str, Tensor]:
        """One descent step; pass ``lr`` to override the base rate (schedules)."""
        rate = self.lr if lr is None else lr
        self._t += 1
        out: dict[str, Tensor] = {}
        bc1 = 1.0 - self.beta1 ** self._t
        bc2 = 1.0 - self.beta2 ** self._t
        for name, p in params.items():
            g = np.asarray(grads[name], dtype=np.float64)
            m = self._m.get(name)
            v = self._v.get(name)
            if m is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self._m[name] = m
            self._v[name] = v
            update = rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            out[name] = Tensor(p.value - update)
        return out
