import itertools
import math

import numpy as np
import pytest

from fluidsr import metrics as me


def test_tvd_values():
    u = np.array([[2.0, 0.0]])
    v = np.array([[1.0, 1.0]])
    assert me.tvd(u, u) == 0.0
    assert me.tvd(u, v) == pytest.approx(1.0, abs=1e-15)
    # ratio homogeneity
    assert me.tvd(3.5 * u, 3.5 * v) == pytest.approx(me.tvd(u, v), abs=1e-14)


def test_tvd_errors():
    u = np.array([[1.0, 0.0]])
    with pytest.raises(ValueError):
        me.tvd(u, np.array([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        me.tvd(u, np.ones((2, 2)))


def test_rmse_values():
    u = np.array([[1.0, 1.0]])
    v = np.array([[1.0, 0.0]])
    assert me.rmse(u, u) == 0.0
    assert me.rmse(u, v) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        me.rmse(np.array([[3.0, 4.0]]), np.array([[0.0, 0.0]]))


def test_mmd_singleton_value():
    u = np.array([[0.0]])
    v = np.array([[1.0]])
    want = 2.0 - 2.0 * math.exp(-0.5)
    assert me.mmd(u, v, bandwidth=1.0) == pytest.approx(want, abs=1e-12)


def test_mmd_basic_properties():
    rng = np.random.default_rng(0)
    u = rng.standard_normal((20, 3))
    v = rng.standard_normal((15, 3)) + 1.0
    assert me.mmd(u, u, bandwidth=1.0) == pytest.approx(0.0, abs=1e-12)
    assert me.mmd(u, v, bandwidth=1.0) == pytest.approx(
        me.mmd(v, u, bandwidth=1.0), abs=1e-12)
    assert me.mmd(u, v, bandwidth=1.0) >= -1e-12
    # permutation invariance
    perm = rng.permutation(20)
    assert me.mmd(u[perm], v, bandwidth=1.0) == pytest.approx(
        me.mmd(u, v, bandwidth=1.0), abs=1e-12)


def test_mmd_standardized_mode_differs_and_is_finite():
    rng = np.random.default_rng(1)
    u = 100.0 * rng.standard_normal((30, 4))
    v = 100.0 * rng.standard_normal((30, 4)) + 50.0
    raw = me.mmd(u, v, bandwidth=1.0)
    std = me.mmd(u, v, bandwidth=1.0, standardize=True)
    assert np.isfinite(raw) and np.isfinite(std)
    assert std != raw


def _brute_force_w2(u, v):
    # equal-size oracle: search all permutation couplings
    n = len(u)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.sum((u[i] - v[j]) ** 2) for i, j in enumerate(perm)) / n
        best = min(best, cost)
    return math.sqrt(best)


def test_w2_known_values():
    assert me.w2(np.array([[0.0]]), np.array([[3.0]])) == pytest.approx(3.0)
    u = np.array([[0.0], [1.0]])
    v = np.array([[10.0], [11.0]])
    assert me.w2(u, v) == pytest.approx(_brute_force_w2(u, v), abs=1e-12)
    assert me.w2(u, v) == pytest.approx(10.0, abs=1e-12)
    assert me.w2(u, u) == 0.0


def test_w2_matches_brute_force_2d():
    rng = np.random.default_rng(2)
    u = rng.standard_normal((6, 2))
    v = rng.standard_normal((6, 2)) + 0.5
    assert me.w2(u, v) == pytest.approx(_brute_force_w2(u, v), abs=1e-12)


def test_w2_unequal_sizes_forced_plan():
    u = np.array([[0.0]])
    v = np.array([[1.0], [2.0]])
    # the only feasible plan splits the unit mass evenly
    assert me.w2(u, v) == pytest.approx(math.sqrt(2.5), abs=1e-12)


def test_w2_dual_route_agreement():
    rng = np.random.default_rng(3)
    # 1-D: sort route vs transportation LP route
    x = rng.standard_normal((9, 1))
    y = rng.standard_normal((7, 1)) + 0.3
    lp = math.sqrt(me._w2_sq_lp(
        ((x[:, None, 0] - y[None, :, 0]) ** 2)))
    assert me.w2(x, y) == pytest.approx(lp, abs=1e-9)
    # equal sizes in 2-D: assignment route vs LP route
    u = rng.standard_normal((8, 2))
    v = rng.standard_normal((8, 2))
    cost = ((u[:, None, :] - v[None, :, :]) ** 2).sum(-1)
    assert me.w2(u, v) == pytest.approx(math.sqrt(me._w2_sq_lp(cost)), abs=1e-9)


def test_w2_triangle_inequality():
    rng = np.random.default_rng(4)
    for _ in range(5):
        a = rng.standard_normal((10, 2))
        b = rng.standard_normal((10, 2)) + 0.5
        c = rng.standard_normal((10, 2)) - 0.5
        assert me.w2(a, c) <= me.w2(a, b) + me.w2(b, c) + 1e-12


def test_w2_size_limit():
    with pytest.raises(ValueError, match="subsample"):
        me.w2(np.zeros((4000, 1, 2)), np.zeros((4000, 1, 2)))


def test_energy_spectrum_single_mode():
    for q in (4, 8, 32):
        x = 2.0 * np.pi * np.arange(q) / q
        f = np.sin(x)[None, :] * np.ones((q, 1))
        f = np.sin(x)[:, None] * np.ones((1, q))  # varies along axis 0
        spec = me.energy_spectrum(f)
        assert spec.energy[1] > 0.0
        mask = np.ones_like(spec.energy, dtype=bool)
        mask[1] = False
        assert np.all(spec.energy[mask] <= 1e-18 * spec.energy[1])


def test_energy_spectrum_constant_field():
    q = 16
    spec = me.energy_spectrum(3.0 * np.ones((q, q)))
    assert spec.energy[0] == pytest.approx((3.0 * q * q) ** 2, rel=1e-12)
    assert np.all(spec.energy[1:] == 0.0)


def test_energy_spectrum_parseval():
    rng = np.random.default_rng(5)
    q = 32
    f = rng.standard_normal((q, q))
    spec = me.energy_spectrum(f)
    total = spec.energy.sum()
    assert total == pytest.approx(q ** 4 * np.mean(f ** 2), rel=1e-10)


def test_energy_spectrum_rejects_non_square():
    with pytest.raises(ValueError):
        me.energy_spectrum(np.zeros((4, 8)))


def test_melr_identity_and_doubling():
    rng = np.random.default_rng(6)
    v = rng.standard_normal((4, 8, 8))
    assert me.melr(v, v, weighted=False) == 0.0
    assert me.melr(v, v, weighted=True) == 0.0
    u = np.sqrt(2.0) * v  # doubles every shell energy
    spec = me.energy_spectrum(v[0])
    want_u = (spec.k_max + 1) * math.log(2.0)
    assert me.melr(u, v, weighted=False) == pytest.approx(want_u, rel=1e-12)
    assert me.melr(u, v, weighted=True) == pytest.approx(math.log(2.0),
                                                         rel=1e-12)


def test_melr_weights_sum_to_one_over_included_shells():
    rng = np.random.default_rng(7)
    v = rng.standard_normal((4, 8, 8))
    u = rng.standard_normal((4, 8, 8))
    su, sv = me.mean_spectrum(u), me.mean_spectrum(v)
    ratios = np.abs(np.log(su.energy / sv.energy))
    wts = sv.energy / sv.energy.sum()
    assert me.melr(u, v, weighted=True) == pytest.approx((wts * ratios).sum(),
                                                         rel=1e-12)


def test_melr_excludes_zero_shells_with_warning():
    # constant fields carry exactly zero energy outside shell 0
    q = 8
    u = 2.0 * np.ones((3, q, q))
    rng = np.random.default_rng(8)
    v = rng.standard_normal((3, q, q))
    with pytest.warns(UserWarning, match="excluded"):
        value, excluded = me.melr(u, v, weighted=True, return_excluded=True)
    assert 0 not in excluded and 1 in excluded
    su, sv = me.mean_spectrum(u), me.mean_spectrum(v)
    assert value == pytest.approx(abs(math.log(su.energy[0] / sv.energy[0])),
                                  rel=1e-12)


def test_melr_rejects_fully_disjoint_spectra():
    u = np.ones((2, 8, 8))
    spec = me.mean_spectrum(u)
    hollow = me.Spectrum(spec.k, np.where(spec.k == 0, 0.0, 1.0), spec.length,
                         spec.q)
    with pytest.raises(ValueError):
        with pytest.warns(UserWarning):
            me.melr_from_spectra(spec, hollow, weighted=False)


def test_melr_cross_resolution_truncates_to_smaller_nyquist():
    rng = np.random.default_rng(9)
    u = rng.standard_normal((4, 16, 16))
    v = rng.standard_normal((4, 8, 8))
    value = me.melr(u, v, weighted=False)
    su = me.mean_spectrum(u)
    sv = me.mean_spectrum(v)
    # shells 0..4 survive; energies are put on the per-grid q^4 footing
    eu = su.energy[:5] / 16.0 ** 4
    ev = sv.energy[:5] / 8.0 ** 4
    want = np.abs(np.log(eu / ev)).sum()
    assert value == pytest.approx(want, rel=1e-12)


def test_kl_knn_standard_normal_self():
    rng = np.random.default_rng(10)
    u = rng.standard_normal((4096, 1))
    v = rng.standard_normal((4096, 1))
    assert abs(me.kl_knn(u, v, k=5)) <= 0.05


def test_kl_knn_shifted_gaussian():
    rng = np.random.default_rng(11)
    u = rng.standard_normal((8192, 1)) + 1.0
    v = rng.standard_normal((8192, 1))
    assert me.kl_knn(u, v, k=5) == pytest.approx(0.5, abs=0.1)


def test_kl_knn_errors_and_duplicates():
    with pytest.raises(ValueError):
        me.kl_knn(np.zeros((4, 1)), np.zeros((10, 1)), k=5)
    u = np.zeros((10, 1))
    v = np.ones((10, 1))
    with pytest.warns(UserWarning, match="jitter"):
        assert np.isfinite(me.kl_knn(u, v, k=2))


def test_set_metric_permutation_invariance():
    rng = np.random.default_rng(12)
    u = rng.standard_normal((12, 4))
    v = rng.standard_normal((12, 4)) + 0.2
    perm = rng.permutation(12)
    assert me.w2(u[perm], v) == pytest.approx(me.w2(u, v), abs=1e-12)
    uf = rng.standard_normal((6, 8, 8))
    vf = rng.standard_normal((6, 8, 8))
    p2 = rng.permutation(6)
    assert me.melr(uf[p2], vf) == pytest.approx(me.melr(uf, vf), abs=1e-12)
    assert me.kl_knn(u[perm], v, k=3) == pytest.approx(me.kl_knn(u, v, k=3),
                                                       abs=1e-12)
