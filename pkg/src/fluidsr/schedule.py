"""Variance-preserving noise schedule with a linear beta ramp."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """beta(t) = beta0 + (beta1 - beta0) t on t in [0, 1].

    The closed-form integral gives the signal scale
    alpha(t) = exp(-(beta0 t + (beta1 - beta0) t^2 / 2) / 2) and the
    perturbation variance sigma^2(t) = 1 - alpha^2(t).
    """

    beta0: float = 0.1
    beta1: float = 20.0
    t_min: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.beta0 <= self.beta1):
            raise ValueError("need 0 < beta0 <= beta1")
        if not (0.0 < self.t_min < 1.0):
            raise ValueError("need 0 < t_min < 1")

    def beta(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.beta0 + (self.beta1 - self.beta0) * t

    def beta_integral(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.beta0 * t + 0.5 * (self.beta1 - self.beta0) * t * t

    def alpha(self, t):
        return np.exp(-0.5 * self.beta_integral(t))

    def sigma(self, t):
        return np.sqrt(self.sigma2(t))

    def sigma2(self, t):
        # -expm1 keeps full precision for small t where 1 - alpha^2 underflows
        return -np.expm1(-self.beta_integral(t))

    def at(self, t):
        """Return (beta, alpha, sigma) evaluated at t (scalar or array)."""
        return self.beta(t), self.alpha(t), self.sigma(t)
