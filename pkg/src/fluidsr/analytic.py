"""Closed forms for Gaussian data under the probability-flow ODE.

For data N(mu, s^2) the diffused marginal at time t is
N(alpha(t) mu, v(t)) with v(t) = alpha^2 s^2 + sigma^2, and the
probability-flow velocity is affine in x, so the flow map from 0 to t is
the monotone affine map x -> A(t) x + B(t) with A = sqrt(v)/s and
B = alpha mu - A mu.  These exact maps anchor the transport checks.
"""

from __future__ import annotations

import numpy as np

from .schedule import NoiseSchedule


def marginal(schedule: NoiseSchedule, mu: float, s: float, t):
    """Mean and variance of the diffused marginal of N(mu, s^2) at time t."""
    a = schedule.alpha(t)
    v = a * a * s * s + schedule.sigma2(t)
    return a * mu, v


def flow_coeffs(schedule: NoiseSchedule, mu: float, s: float, t):
    """Affine flow map x -> A x + B transporting N(mu, s^2) from 0 to t."""
    m_t, v_t = marginal(schedule, mu, s, t)
    A = np.sqrt(v_t) / s
    B = m_t - A * mu
    return A, B


def velocity_slope(schedule: NoiseSchedule, mu: float, s: float, t):
    """d(velocity)/dx of the probability-flow velocity for N(mu, s^2) data."""
    _, v = marginal(schedule, mu, s, t)
    return -0.5 * schedule.beta(t) * (1.0 - 1.0 / v)


def velocity_lipschitz(schedule: NoiseSchedule, mu: float, s: float,
                       t_hi: float, samples: int = 4096) -> float:
    """sup over t in [0, t_hi] of |velocity_slope|, on a dense grid."""
    ts = np.linspace(0.0, t_hi, samples + 1)
    return float(np.abs(velocity_slope(schedule, mu, s, ts)).max())


def gaussian_kl(m1: float, v1: float, m2: float, v2: float) -> float:
    """KL(N(m1, v1) || N(m2, v2)) for scalars."""
    return 0.5 * (np.log(v2 / v1) + (v1 + (m1 - m2) ** 2) / v2 - 1.0)


def gaussian_w2(m1: float, v1: float, m2: float, v2: float) -> float:
    """2-Wasserstein distance between two scalar Gaussians."""
    return float(np.sqrt((m1 - m2) ** 2 + (np.sqrt(v1) - np.sqrt(v2)) ** 2))
