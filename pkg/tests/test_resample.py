"""Periodic bicubic restriction and upsampling on the [0, 2pi)^2 grid."""

import numpy as np
import pytest

from fluidsr.metrics import energy_spectrum
from fluidsr.resample import resample, resample_matrix, restrict, upsample


def grid(q):
    x = 2.0 * np.pi * np.arange(q) / q
    return np.meshgrid(x, x, indexing="ij")


def test_restrict_constant_exact():
    f = np.full((32, 32), 3.7)
    for factor in (2, 4, 8):
        out = restrict(f, factor)
        assert out.shape == (32 // factor, 32 // factor)
        assert np.max(np.abs(out - 3.7)) < 1e-12


def test_restrict_single_mode_matches_direct_evaluation():
    # sin(x1) sampled at q=64, restricted by 4: equals sin(x1) on the
    # q=16 grid because the coarse nodes coincide with fine nodes
    x1, _ = grid(64)
    f = np.sin(x1)
    out = restrict(f, 4)
    c1, _ = grid(16)
    assert np.max(np.abs(out - np.sin(c1))) < 1e-6


def test_restrict_composition():
    rng = np.random.default_rng(0)
    x1, x2 = grid(64)
    # smooth band-limited field
    f = (np.sin(x1) + 0.5 * np.cos(2 * x2) + 0.3 * np.sin(3 * x1 + 2 * x2)
         + 0.1 * np.cos(4 * x1 - x2))
    a = restrict(restrict(f, 2), 2)
    b = restrict(f, 4)
    rel = np.linalg.norm(a - b) / np.linalg.norm(b)
    assert rel < 1e-3


def test_restrict_rejects_bad_factor():
    f = np.zeros((12, 12))
    with pytest.raises(ValueError):
        restrict(f, 8)  # 12 not divisible by 8
    with pytest.raises(ValueError):
        restrict(f, 3)  # unsupported factor


def test_upsample_constant_exact():
    f = np.full((8, 8), -1.25)
    out = upsample(f, 4)
    assert out.shape == (32, 32)
    assert np.max(np.abs(out + 1.25)) < 1e-12


def test_upsample_low_mode_accuracy():
    # Catmull-Rom interpolation of a slowly varying mode is accurate to
    # a fraction of a percent at 16 samples per period
    c1, _ = grid(16)
    f = np.sin(c1)
    out = upsample(f, 4)
    x1, _ = grid(64)
    assert np.max(np.abs(out - np.sin(x1))) < 5e-3


def test_resample_matrix_rows_sum_to_one():
    for q_from, q_to in ((64, 16), (16, 64), (8, 8)):
        m = resample_matrix(q_from, q_to)
        assert m.shape == (q_to, q_from)
        assert np.max(np.abs(m.sum(axis=1) - 1.0)) < 1e-12


def test_resample_identity_when_grids_match():
    rng = np.random.default_rng(1)
    f = rng.standard_normal((8, 8))
    assert np.max(np.abs(resample(f, 8) - f)) < 1e-12


def test_resample_batched_matches_loop():
    rng = np.random.default_rng(2)
    fs = rng.standard_normal((5, 16, 16))
    batch = resample(fs, 8)
    for i in range(5):
        assert np.array_equal(batch[i], resample(fs[i], 8))


def test_restricted_spectrum_agrees_on_low_shells():
    # band-limited content below the coarse Nyquist survives restriction
    # untouched, so the spectra agree on shells k <= q_low/4 once both
    # are put on the per-grid q^4 footing
    x1, x2 = grid(64)
    f = (np.sin(x1) + 0.5 * np.cos(2 * x2) + 0.25 * np.sin(3 * x1 + x2)
         + 0.1 * np.cos(5 * x2) + 0.05 * np.sin(7 * x1 - 2 * x2))
    coarse = restrict(f, 2)  # q_low = 32
    s_hi = energy_spectrum(f)
    s_lo = energy_spectrum(coarse)
    e_hi = s_hi.energy / 64.0 ** 4
    e_lo = s_lo.energy / 32.0 ** 4
    for k in range(32 // 4 + 1):
        if e_hi[k] > 1e-12:
            assert abs(e_lo[k] / e_hi[k] - 1.0) < 0.1
