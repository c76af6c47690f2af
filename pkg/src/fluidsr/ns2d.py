"""Pseudo-spectral 2-D Navier-Stokes in vorticity form on [0, 2pi)^2.

The stream function solves -lap(psi) = w in the zero-mean gauge, the
velocity is (psi_y, -psi_x), the nonlinear term is dealiased with the
2/3 rule, and diffusion is applied through an exact integrating factor
around an RK4 step for advection and forcing.  The dealias mask touches
only the advection product, so vorticity modes above the cutoff still
decay viscously instead of being zeroed each step.

The forcing sin(k0 x1) is sampled on the grid.  On a grid whose Nyquist
wavenumber equals k0 the samples are identically zero, so a coarse
solver is structurally blind to the forcing; this is the main source of
the low-resolution fidelity gap the rest of the package corrects.
"""

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .fldio import read_field, sha256_file, write_field, write_manifest
from .resample import restrict

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FlowConfig:
    """Solver settings for one resolution."""

    q: int
    viscosity: float = 1e-3
    forcing_wavenumber: int = 4
    forcing: bool = True
    dt: float = 5e-3
    horizon: float = 1.0
    dealias: bool = True
    cfl_max: float = 1.0

    def __post_init__(self):
        if self.q < 4 or self.q & (self.q - 1):
            raise ValueError("resolution must be a power of two, at least 4")
        if self.viscosity <= 0.0:
            raise ValueError("viscosity must be positive")
        if self.dt <= 0.0 or self.horizon <= 0.0:
            raise ValueError("dt and horizon must be positive")
        if self.forcing_wavenumber < 1:
            raise ValueError("forcing wavenumber must be at least 1")
        if self.cfl_max <= 0.0:
            raise ValueError("cfl_max must be positive")


@dataclass(frozen=True)
class IcParams:
    """Random initial-condition shape: exponentiated power-law field."""

    slope: float = 2.5
    sigma: float = 0.5
    amplitude: float = 1.0

    def __post_init__(self):
        if self.slope <= 0.0 or self.sigma <= 0.0:
            raise ValueError("slope and sigma must be positive")


def _wavenumbers(q: int):
    k1 = np.fft.fftfreq(q, d=1.0 / q)[:, None]
    k2 = np.fft.rfftfreq(q, d=1.0 / q)[None, :]
    ksq = k1 * k1 + k2 * k2
    inv_ksq = np.zeros_like(ksq)
    inv_ksq[ksq > 0.0] = 1.0 / ksq[ksq > 0.0]
    return k1, k2, ksq, inv_ksq


def _grid(q: int):
    x = TWO_PI * np.arange(q) / q
    return np.meshgrid(x, x, indexing="ij")


def ns_solve(w0, cfg: FlowConfig, snapshot_times=None):
    """Integrate the vorticity field to the horizon.

    Returns the final field, or the stack of fields at `snapshot_times`
    (each must be a multiple of cfg.dt inside (0, horizon]).
    """
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (cfg.q, cfg.q):
        raise ValueError(f"initial state must be {cfg.q}x{cfg.q}")
    n_steps = int(round(cfg.horizon / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.horizon) > 1e-9 * max(1.0, cfg.horizon):
        raise ValueError("horizon must be a multiple of dt")
    snap_steps = None
    if snapshot_times is not None:
        snap_steps = []
        for t in snapshot_times:
            step = int(round(t / cfg.dt))
            if abs(step * cfg.dt - t) > 1e-9 * max(1.0, cfg.horizon) \
                    or not 1 <= step <= n_steps:
                raise ValueError(f"snapshot time {t} is not a dt multiple "
                                 "inside (0, horizon]")
            snap_steps.append(step)
        if sorted(snap_steps) != snap_steps:
            raise ValueError("snapshot times must be increasing")

    q, nu, dt = cfg.q, cfg.viscosity, cfg.dt
    k1, k2, ksq, inv_ksq = _wavenumbers(q)
    cutoff = q // 3
    mask = (np.abs(k1) <= cutoff) & (np.abs(k2) <= cutoff)
    if cfg.forcing:
        x1, _ = _grid(q)
        fh = np.fft.rfft2(np.sin(cfg.forcing_wavenumber * x1))
    else:
        fh = np.zeros_like(ksq, dtype=complex)
    e_half = np.exp(-nu * ksq * (0.5 * dt))
    e_full = e_half * e_half
    dx = TWO_PI / q

    def rhs(wh, check_cfl=False):
        psih = wh * inv_ksq
        u = np.fft.irfft2(1j * k2 * psih, s=(q, q))
        v = np.fft.irfft2(-1j * k1 * psih, s=(q, q))
        wx = np.fft.irfft2(1j * k1 * wh, s=(q, q))
        wy = np.fft.irfft2(1j * k2 * wh, s=(q, q))
        advh = np.fft.rfft2(u * wx + v * wy)
        if cfg.dealias:
            advh = advh * mask
        out = fh - advh
        if check_cfl:
            return out, max(np.max(np.abs(u)), np.max(np.abs(v)))
        return out

    wh = np.fft.rfft2(w0)
    snaps = []
    t = 0.0
    for step in range(1, n_steps + 1):
        a, speed = rhs(wh, check_cfl=True)
        cfl = speed * dt / dx
        if cfl > cfg.cfl_max:
            raise RuntimeError(f"CFL violation at t={t:.6g}: "
                               f"{cfl:.3g} > {cfg.cfl_max}")
        b = rhs(e_half * (wh + 0.5 * dt * a))
        c = rhs(e_half * wh + 0.5 * dt * b)
        d = rhs(e_full * wh + dt * e_half * c)
        wh = (e_full * wh + (dt / 6.0)
              * (e_full * a + 2.0 * e_half * (b + c) + d))
        t = step * dt
        if not np.all(np.isfinite(wh)):
            raise RuntimeError(f"non-finite vorticity at t={t:.6g}")
        if snap_steps is not None and step in snap_steps:
            snaps.append(np.fft.irfft2(wh, s=(q, q)))
    if snap_steps is not None:
        return np.stack(snaps)
    return np.fft.irfft2(wh, s=(q, q))


def kinetic_energy(w) -> float:
    """Mean kinetic energy (1/2)<|u|^2> of the flow with vorticity w."""
    w = np.asarray(w, dtype=np.float64)
    q = w.shape[0]
    k1, k2, ksq, inv_ksq = _wavenumbers(q)
    psih = np.fft.rfft2(w) * inv_ksq
    u = np.fft.irfft2(1j * k2 * psih, s=(q, q))
    v = np.fft.irfft2(-1j * k1 * psih, s=(q, q))
    return float(0.5 * np.mean(u * u + v * v))


def sample_initial_condition(rng, q: int, params: IcParams = IcParams()):
    """Random vorticity field: exponentiated correlated Gaussian.

    A white field is shaped so each Fourier mode has standard deviation
    proportional to |k|^(-slope/2), i.e. per-mode energy follows the
    k^(-slope) envelope; the field is scaled to standard deviation
    `sigma`, exponentiated pointwise, mean-removed, and scaled by
    `amplitude`.
    """
    if q < 4 or q & (q - 1):
        raise ValueError("resolution must be a power of two, at least 4")
    k1, k2, ksq, _ = _wavenumbers(q)
    envelope = np.zeros_like(ksq)
    envelope[ksq > 0.0] = np.sqrt(ksq[ksq > 0.0]) ** (-params.slope / 2.0)
    white = rng.standard_normal((q, q))
    g = np.fft.irfft2(np.fft.rfft2(white) * envelope, s=(q, q))
    g *= params.sigma / g.std()
    field = np.exp(g)
    field -= field.mean()
    return params.amplitude * field


_KINDS = ("lflr_train", "hfhr_train", "lflr_test", "hfhr_test")
_GROUP = {"lflr_train": 0, "hfhr_train": 1, "lflr_test": 2, "hfhr_test": 2}


@dataclass(frozen=True)
class DatasetBundle:
    """On-disk dataset: unpaired training sets plus a paired test set."""

    root: Path
    manifest: dict

    @classmethod
    def load(cls, root):
        root = Path(root)
        from .fldio import read_manifest

        return cls(root, read_manifest(root / "manifest.json"))

    def fields(self, kind: str) -> np.ndarray:
        if kind not in _KINDS:
            raise ValueError(f"unknown dataset kind {kind!r}")
        count = self.manifest["counts"][kind]
        return np.stack([read_field(self.root / f"{kind}_{i:04d}.fld")
                         for i in range(count)])


def _ic_rng(seed: int, group: int, index: int):
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(group, index)))


def generate_datasets(out_dir, hr_cfg: FlowConfig, lr_cfg: FlowConfig,
                      n_lflr: int, n_hfhr: int, n_test: int, seed: int = 0,
                      snapshot_times=None,
                      ic: IcParams = IcParams()) -> DatasetBundle:
    """Solve out the three dataset groups and write them with a manifest.

    Training groups draw disjoint initial-condition streams, so they are
    unpaired by construction; each test pair shares one initial
    condition.  Low-resolution runs start from the restriction of the
    high-resolution initial state.  Every file's SHA-256 goes into the
    manifest, and reruns with the same arguments are bitwise identical.
    """
    if hr_cfg.q % lr_cfg.q:
        raise ValueError("high resolution must be a multiple of the low one")
    factor = hr_cfg.q // lr_cfg.q
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def solve_from(kind, index, w0_hr, cfg):
        w0 = restrict(w0_hr, factor) if cfg.q != hr_cfg.q else w0_hr
        try:
            return ns_solve(w0, cfg, snapshot_times)
        except RuntimeError as exc:
            raise RuntimeError(f"{kind} sample {index}: {exc}") from exc

    def item(w0, solved):
        if snapshot_times is None:
            return solved
        return np.concatenate([w0[None], solved])

    files = {}
    ancestors = {kind: [] for kind in _KINDS}

    def emit(kind, index, field):
        name = f"{kind}_{index:04d}.fld"
        write_field(out_dir / name, field)
        files[name] = sha256_file(out_dir / name)
        ancestors[kind].append([_GROUP[kind], index])

    for i in range(n_lflr):
        w0 = sample_initial_condition(_ic_rng(seed, 0, i), hr_cfg.q, ic)
        emit("lflr_train", i,
             item(restrict(w0, factor), solve_from("lflr_train", i, w0, lr_cfg)))
    for i in range(n_hfhr):
        w0 = sample_initial_condition(_ic_rng(seed, 1, i), hr_cfg.q, ic)
        emit("hfhr_train", i, item(w0, solve_from("hfhr_train", i, w0, hr_cfg)))
    for i in range(n_test):
        w0 = sample_initial_condition(_ic_rng(seed, 2, i), hr_cfg.q, ic)
        emit("lflr_test", i,
             item(restrict(w0, factor), solve_from("lflr_test", i, w0, lr_cfg)))
        emit("hfhr_test", i, item(w0, solve_from("hfhr_test", i, w0, hr_cfg)))

    manifest = {
        "counts": {"lflr_train": n_lflr, "hfhr_train": n_hfhr,
                   "lflr_test": n_test, "hfhr_test": n_test},
        "seed": seed,
        "hr": asdict(hr_cfg),
        "lr": asdict(lr_cfg),
        "ic": asdict(ic),
        "snapshot_times": (None if snapshot_times is None
                           else list(snapshot_times)),
        "restrict_factor": factor,
        "ancestors": ancestors,
        "files": files,
    }
    write_manifest(out_dir / "manifest.json", manifest)
    return DatasetBundle(out_dir, manifest)
