import numpy as np

from fluidsr import autodiff as ad
from fluidsr.optim import AdamState, adam_step


def test_zero_gradient_leaves_params_unchanged():
    p = ad.parameter(np.array([1.5, -2.0]))
    state = AdamState()
    adam_step([p], {p: np.zeros(2)}, state, lr=0.1)
    assert np.array_equal(p.data, [1.5, -2.0])
    assert state.step == 1


def test_first_step_with_unit_gradient_moves_by_lr():
    # bias correction makes mhat = vhat = 1, so the step is lr/(1 + eps)
    p = ad.parameter(np.array([0.7]))
    adam_step([p], {p: np.ones(1)}, AdamState(), lr=0.1)
    assert abs(p.data[0] - 0.6) <= 1e-8


def _reference_adam_quadratic(steps, lr):
    # independent plain-numpy implementation used as the oracle
    p = 0.0
    m = v = 0.0
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t in range(1, steps + 1):
        g = 2.0 * (p - 5.0)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return p


def test_quadratic_convergence_matches_reference():
    assert abs(_reference_adam_quadratic(2000, 0.05) - 5.0) <= 0.01

    p = ad.parameter(np.zeros(()))
    state = AdamState()
    for _ in range(2000):
        graph = ad.Graph(ad.square(ad.add(p, -5.0)), [p])
        grads, _ = ad.backprop(graph)
        adam_step([p], grads, state, lr=0.05)
    assert abs(float(p.data) - 5.0) <= 0.01
    assert abs(float(p.data) - _reference_adam_quadratic(2000, 0.05)) <= 1e-9
