"""Distributional and spectral evaluation metrics for field sets.

A field set is a numpy array whose leading axis indexes samples; paired
metrics require equal sizes with index correspondence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy import sparse

W2_COST_LIMIT = 10 ** 7


def _as_set(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape[0] == 0:
        raise ValueError("field set is empty")
    return u.reshape(u.shape[0], -1)


def _as_paired(u, v):
    u, v = _as_set(u), _as_set(v)
    if u.shape != v.shape:
        raise ValueError("paired metrics need equal-size, same-shape sets")
    return u, v


def tvd(u, v) -> float:
    """Mean relative L1 distance over paired samples."""
    u, v = _as_paired(u, v)
    ref = np.abs(v).sum(axis=1)
    if np.any(ref == 0.0):
        raise ValueError("reference sample with zero L1 norm")
    return float((np.abs(u - v).sum(axis=1) / ref).mean())


def rmse(u, v) -> float:
    """Mean relative L2 distance over paired samples."""
    u, v = _as_paired(u, v)
    ref = np.linalg.norm(v, axis=1)
    if np.any(ref == 0.0):
        raise ValueError("reference sample with zero L2 norm")
    return float((np.linalg.norm(u - v, axis=1) / ref).mean())


def mmd(u, v, bandwidth: float = 0.01, standardize: bool = False) -> float:
    """Squared maximum mean discrepancy, biased V-statistic with diagonals.

    Gaussian kernel exp(-||a - b||^2 / (2 l^2)).  With `standardize` each
    feature is shifted/scaled by the pooled mean and standard deviation
    before kernel evaluation.
    """
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    u, v = _as_set(u), _as_set(v)
    if u.shape[1] != v.shape[1]:
        raise ValueError("sets have different dimensionality")
    if standardize:
        pool = np.concatenate([u, v], axis=0)
        mean = pool.mean(axis=0)
        std = pool.std(axis=0)
        std[std == 0.0] = 1.0
        u = (u - mean) / std
        v = (v - mean) / std
    gamma = 1.0 / (2.0 * bandwidth ** 2)
    kuu = np.exp(-gamma * cdist(u, u, "sqeuclidean")).mean()
    kvv = np.exp(-gamma * cdist(v, v, "sqeuclidean")).mean()
    kuv = np.exp(-gamma * cdist(u, v, "sqeuclidean")).mean()
    return float(kuu + kvv - 2.0 * kuv)


def _w2_sq_1d(x: np.ndarray, y: np.ndarray) -> float:
    # exact 1-D transport: monotone coupling of the empirical quantiles
    x = np.sort(x)
    y = np.sort(y)
    n, m = x.size, y.size
    if n == m:
        return float(((x - y) ** 2).mean())
    breaks = np.union1d(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
    widths = np.diff(np.concatenate([[0.0], breaks]))
    mids = breaks - widths / 2.0
    xi = np.minimum((mids * n).astype(int), n - 1)
    yi = np.minimum((mids * m).astype(int), m - 1)
    return float((widths * (x[xi] - y[yi]) ** 2).sum())


def _w2_sq_lp(cost: np.ndarray) -> float:
    # exact transportation LP with uniform marginals (unequal set sizes)
    n, m = cost.shape
    row = sparse.kron(sparse.eye(n), np.ones((1, m)))
    col = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A = sparse.vstack([row, col]).tocsc()
    b = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    res = linprog(cost.ravel(), A_eq=A, b_eq=b, bounds=(0.0, None),
                  method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def w2(u, v) -> float:
    """Exact 2-Wasserstein distance between empirical distributions.

    Uniform marginals 1/N and 1/M, squared-Euclidean ground cost, solved
    exactly (sorting in 1-D, assignment for N = M, transportation LP
    otherwise).  Returns the square root of the optimal cost.
    """
    u, v = _as_set(u), _as_set(v)
    if u.shape[1] != v.shape[1]:
        raise ValueError("sets have different dimensionality")
    n, m = u.shape[0], v.shape[0]
    if u.shape[1] == 1:
        # sorting needs no cost matrix, so the size limit does not apply
        return float(np.sqrt(_w2_sq_1d(u.ravel(), v.ravel())))
    if n * m > W2_COST_LIMIT:
        raise ValueError(
            f"cost matrix {n}x{m} exceeds {W2_COST_LIMIT} entries; "
            "subsample the sets before calling w2")
    cost = cdist(u, v, "sqeuclidean")
    if n == m:
        rows, cols = linear_sum_assignment(cost)
        return float(np.sqrt(cost[rows, cols].mean()))
    return float(np.sqrt(_w2_sq_lp(cost)))


def ot_plan(u, v) -> np.ndarray:
    """Exact optimal transport plan between two empirical sets.

    Returns the (N, M) coupling with uniform marginals 1/N and 1/M under
    squared-Euclidean cost.  Equal sizes reduce to an assignment, whose
    plan is a scaled permutation matrix.
    """
    u, v = _as_set(u), _as_set(v)
    if u.shape[1] != v.shape[1]:
        raise ValueError("sets have different dimensionality")
    n, m = u.shape[0], v.shape[0]
    if n * m > W2_COST_LIMIT:
        raise ValueError(
            f"cost matrix {n}x{m} exceeds {W2_COST_LIMIT} entries; "
            "subsample the sets before calling ot_plan")
    cost = cdist(u, v, "sqeuclidean")
    if n == m:
        rows, cols = linear_sum_assignment(cost)
        plan = np.zeros((n, m))
        plan[rows, cols] = 1.0 / n
        return plan
    row = sparse.kron(sparse.eye(n), np.ones((1, m)))
    col = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A = sparse.vstack([row, col]).tocsc()
    b = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    res = linprog(cost.ravel(), A_eq=A, b_eq=b, bounds=(0.0, None),
                  method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return res.x.reshape(n, m)


@dataclass(frozen=True)
class Spectrum:
    """Shell-summed energy of a square field under the unnormalized DFT.

    `q` records the grid size so spectra from different resolutions can
    be compared on a physical footing (the raw energies scale as q^4).
    """

    k: np.ndarray
    energy: np.ndarray
    length: float
    q: int

    @property
    def k_max(self) -> int:
        return int(self.k[-1])


def energy_spectrum(field, length: float = 2.0 * np.pi) -> Spectrum:
    """Isotropic energy spectrum with integer shells by rounding |k|."""
    f = np.asarray(field, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError("energy_spectrum expects a square 2-D field")
    q = f.shape[0]
    power = np.abs(np.fft.fft2(f)) ** 2
    kx = np.fft.fftfreq(q, d=1.0 / q)
    shell = np.rint(np.hypot(kx[:, None], kx[None, :])).astype(int)
    k_max = int(shell.max())
    energy = np.bincount(shell.ravel(), weights=power.ravel(),
                         minlength=k_max + 1)
    return Spectrum(np.arange(k_max + 1), energy, float(length), q)


def mean_spectrum(field_set, length: float = 2.0 * np.pi) -> Spectrum:
    """Set-averaged energy spectrum."""
    fields = np.asarray(field_set, dtype=np.float64)
    if fields.ndim != 3:
        raise ValueError("expected a stacked set of 2-D fields")
    spectra = [energy_spectrum(f, length) for f in fields]
    energy = np.mean([s.energy for s in spectra], axis=0)
    return Spectrum(spectra[0].k, energy, float(length), spectra[0].q)


def melr_from_spectra(su: Spectrum, sv: Spectrum, weighted: bool,
                      return_excluded: bool = False):
    """Weighted mean absolute log shell-energy ratio of two spectra.

    Cross-resolution comparisons keep only shells up to the Nyquist shell
    of the smaller grid and put both spectra on the per-grid q^4 footing
    (a no-op for equal grids since the factor cancels in every ratio);
    zero-energy shells are excluded and reported.
    """
    k_hi = min(su.k_max, sv.k_max)
    if su.q != sv.q:
        k_hi = min(k_hi, min(su.q, sv.q) // 2)
    eu = su.energy[: k_hi + 1] / float(su.q) ** 4
    ev = sv.energy[: k_hi + 1] / float(sv.q) ** 4
    good = (eu > 0.0) & (ev > 0.0)
    excluded = np.arange(k_hi + 1)[~good]
    if excluded.size:
        warnings.warn(f"melr: excluded zero-energy shells {excluded.tolist()}")
    if not np.any(good):
        raise ValueError("no shells with positive energy in both spectra")
    ratios = np.abs(np.log(eu[good] / ev[good]))
    if weighted:
        wts = ev[good] / ev[good].sum()
        value = float((wts * ratios).sum())
    else:
        value = float(ratios.sum())
    if return_excluded:
        return value, excluded.tolist()
    return value


def melr(u, v, weighted: bool = False, length: float = 2.0 * np.pi,
         return_excluded: bool = False):
    """MELR between the set-averaged spectra of two field sets."""
    return melr_from_spectra(mean_spectrum(u, length), mean_spectrum(v, length),
                             weighted, return_excluded)


def kl_knn(u, v, k: int = 5) -> float:
    """k-nearest-neighbor estimate of KL(u || v) from samples.

    Finite-sample estimates can be negative; they are reported as-is.
    """
    u, v = _as_set(u), _as_set(v)
    if u.shape[1] != v.shape[1]:
        raise ValueError("sets have different dimensionality")
    n, m, d = u.shape[0], v.shape[0], u.shape[1]
    if k >= n or k >= m:
        raise ValueError("need more than k samples in each set")
    rho = cKDTree(u).query(u, k=k + 1)[0][:, k]  # k+1 skips the self match
    nu = cKDTree(v).query(u, k=k)[0]
    nu = nu[:, k - 1] if k > 1 else nu.ravel()
    if np.any(rho == 0.0) or np.any(nu == 0.0):
        warnings.warn("kl_knn: zero nearest-neighbor distance, jittering")
        rho = np.maximum(rho, 1e-12)
        nu = np.maximum(nu, 1e-12)
    return float(d * np.mean(np.log(nu / rho)) + np.log(m / (n - 1.0)))
