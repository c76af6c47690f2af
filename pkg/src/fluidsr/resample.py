"""Periodic bicubic resampling between uniform square grids."""

from __future__ import annotations

import numpy as np


def _cubic(s: np.ndarray) -> np.ndarray:
    # Catmull-Rom kernel (Keys, a = -1/2)
    s = np.abs(s)
    out = np.zeros_like(s)
    near = s < 1.0
    far = (s >= 1.0) & (s < 2.0)
    out[near] = 1.5 * s[near] ** 3 - 2.5 * s[near] ** 2 + 1.0
    out[far] = -0.5 * s[far] ** 3 + 2.5 * s[far] ** 2 - 4.0 * s[far] + 2.0
    return out


def resample_matrix(q_from: int, q_to: int) -> np.ndarray:
    """Row-stochastic periodic bicubic interpolation matrix [q_to, q_from]."""
    W = np.zeros((q_to, q_from))
    # target points in source-grid coordinates
    pos = np.arange(q_to) * (q_from / q_to)
    base = np.floor(pos).astype(int)
    frac = pos - base
    for off in (-1, 0, 1, 2):
        w = _cubic(np.array(frac - off))
        cols = (base + off) % q_from
        np.add.at(W, (np.arange(q_to), cols), w)
    # kernel weights sum to 1 at every offset; normalize to kill roundoff
    W /= W.sum(axis=1, keepdims=True)
    return W


def resample(field, q_to: int):
    """Separable periodic bicubic resampling of a square field (or batch)."""
    f = np.asarray(field, dtype=np.float64)
    q_from = f.shape[-1]
    if f.shape[-2] != q_from:
        raise ValueError("resample expects square fields")
    if q_to == q_from:
        return f.copy()
    W = resample_matrix(q_from, q_to)
    return np.einsum("ij,...jk,lk->...il", W, f, W, optimize=True)


def restrict(field, factor: int):
    """Bicubic downsampling by an integer factor on the periodic grid."""
    f = np.asarray(field, dtype=np.float64)
    if factor not in (2, 4, 8):
        raise ValueError("restriction factor must be 2, 4, or 8")
    q = f.shape[-1]
    if q % factor != 0:
        raise ValueError(f"resolution {q} not divisible by factor {factor}")
    return resample(f, q // factor)


def upsample(field, factor: int):
    """Bicubic upsampling by an integer factor on the periodic grid."""
    f = np.asarray(field, dtype=np.float64)
    if factor < 1:
        raise ValueError("upsampling factor must be >= 1")
    if factor == 1:
        return f.copy()
    return resample(f, f.shape[-1] * factor)
