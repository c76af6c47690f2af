"""Fourier neural operator that maps an initial field to a short trajectory.

The operator predicts all n snapshots at once as output channels; there
is no autoregressive rollout.  Layers follow the standard recipe: a
pointwise lifting, a stack of spectral-convolution blocks (per-mode
complex channel mixing on a truncated corner spectrum plus a pointwise
linear path), and a linear projection head.  Spectra live as
(real, imaginary) array pairs so the whole model runs on the real-valued
reverse-mode engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import autodiff as ad
from .fldio import load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step


@dataclass(frozen=True)
class Trajectory:
    """Uniformly spaced snapshots starting at t0."""

    fields: np.ndarray
    dt: float
    t0: float

    def __post_init__(self):
        arr = np.asarray(self.fields, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] != arr.shape[2]:
            raise ValueError("trajectory needs n >= 1 square snapshots")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "fields", arr)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.fields.shape[0])


@dataclass(frozen=True)
class FnoConfig:
    """Architecture and training hyperparameters."""

    layers: int = 4
    modes: int = 4
    width: int = 32
    batch_size: int = 16
    lr: float = 1e-3
    epochs: int = 60
    seed: int = 0
    include_grid: bool = True
    linear: bool = False

    def __post_init__(self):
        if self.layers < 1 or self.modes < 1 or self.width < 1:
            raise ValueError("layers, modes, and width must be positive")


def _he(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _gelu_np(h):
    cdf = 0.5 * (1.0 + erf(h / np.sqrt(2.0)))
    return h * cdf


class FnoModel:
    """Resolution-transferable spectral operator with n output channels.

    Weights act per retained Fourier mode, so a trained model evaluates
    on any grid whose Nyquist covers the retained modes; the training
    resolution is kept for provenance.  `linear=True` drops the
    pointwise nonlinearity (used to check translation equivariance),
    `include_grid=False` drops the two coordinate input channels.
    """

    def __init__(self, n_out: int, layers: int, modes: int, width: int,
                 q: int, dt: float, rng: np.random.Generator,
                 include_grid: bool = True, linear: bool = False):
        if n_out < 1:
            raise ValueError("need at least one output snapshot")
        if 2 * modes > q:
            raise ValueError(f"{modes} retained modes exceed the Nyquist "
                             f"range of a {q}x{q} grid")
        self.n_out = n_out
        self.layers = layers
        self.modes = modes
        self.width = width
        self.q = q
        self.dt = float(dt)
        self.include_grid = include_grid
        self.linear = linear
        self.loss_trace: list = []
        self.params = []

        def par(arr, name):
            p = ad.parameter(arr, name=name)
            self.params.append(p)
            return p

        c_in = 3 if include_grid else 1
        m2 = 2 * modes
        self.w_lift = par(_he(rng, (c_in, width), c_in), "w_lift")
        self.b_lift = par(np.zeros(width), "b_lift")
        self.blocks = []
        for i in range(layers):
            self.blocks.append((
                par(rng.normal(0.0, 1.0 / width, (m2, m2, width, width)),
                    f"wr{i}"),
                par(rng.normal(0.0, 1.0 / width, (m2, m2, width, width)),
                    f"wi{i}"),
                par(_he(rng, (width, width), width), f"wp{i}"),
                par(np.zeros(width), f"bp{i}"),
            ))
        self.w_proj = par(_he(rng, (width, n_out), width), "w_proj")
        self.b_proj = par(np.zeros(n_out), "b_proj")

    # ------------------------------------------------------------- plumbing

    def _check_resolution(self, q: int):
        if 2 * self.modes > q:
            raise ValueError(f"{self.modes} retained modes exceed the "
                             f"Nyquist range of a {q}x{q} grid")

    def _input_channels(self, x: np.ndarray) -> np.ndarray:
        # channels-last stack: field value plus optional unit coordinates
        if not self.include_grid:
            return x[..., None]
        q = x.shape[-1]
        coords = np.arange(q) / q
        gx = np.broadcast_to(coords[:, None], (q, q))
        gy = np.broadcast_to(coords[None, :], (q, q))
        b = x.shape[0]
        return np.stack([x, np.broadcast_to(gx, (b, q, q)),
                         np.broadcast_to(gy, (b, q, q))], axis=-1)

    # ------------------------------------------------------------ graph path

    def forward_graph(self, x: np.ndarray) -> ad.Tensor:
        x = np.asarray(x, dtype=np.float64)
        b, q = x.shape[0], x.shape[-1]
        self._check_resolution(q)
        m, w = self.modes, self.width
        m2 = 2 * m
        h = ad.add(ad.matmul(ad.constant(self._input_channels(x)),
                             self.w_lift), self.b_lift)
        h = ad.transpose(h, (0, 3, 1, 2))
        for i, (wr, wi, wp, bp) in enumerate(self.blocks):
            re, im = ad.fft2(h)
            # modes-leading layout (2m, 2m, b, w) keeps the weight
            # gradient a plain batched contraction
            rc = ad.transpose(ad.corner_crop(re, m), (2, 3, 0, 1))
            ic = ad.transpose(ad.corner_crop(im, m), (2, 3, 0, 1))
            out_re = ad.add(ad.matmul(rc, wr),
                            ad.mul(ad.matmul(ic, wi), -1.0))
            out_im = ad.add(ad.matmul(rc, wi), ad.matmul(ic, wr))
            out_re = ad.transpose(out_re, (2, 3, 0, 1))
            out_im = ad.transpose(out_im, (2, 3, 0, 1))
            spec, _ = ad.ifft2(ad.corner_pad(out_re, m, q, q),
                               ad.corner_pad(out_im, m, q, q))
            point = ad.transpose(
                ad.add(ad.matmul(ad.transpose(h, (0, 2, 3, 1)), wp), bp),
                (0, 3, 1, 2))
            h = ad.add(spec, point)
            if not self.linear and i < self.layers - 1:
                h = ad.gelu(h)
        out = ad.add(ad.matmul(ad.transpose(h, (0, 2, 3, 1)), self.w_proj),
                     self.b_proj)
        return ad.transpose(out, (0, 3, 1, 2))

    # ------------------------------------------------------------- fast path

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        b, q = x.shape[0], x.shape[-1]
        self._check_resolution(q)
        m, w = self.modes, self.width
        m2 = 2 * m
        h = self._input_channels(x) @ self.w_lift.data + self.b_lift.data
        h = np.transpose(h, (0, 3, 1, 2))
        for i, (wr, wi, wp, bp) in enumerate(self.blocks):
            z = np.fft.fft2(h)
            zc = np.roll(z, (m, m), axis=(-2, -1))[..., :m2, :m2]
            zc = np.transpose(zc, (2, 3, 0, 1))
            mixed = ((zc.real @ wr.data - zc.imag @ wi.data)
                     + 1j * (zc.real @ wi.data + zc.imag @ wr.data))
            mixed = np.transpose(mixed, (2, 3, 0, 1))
            full = np.zeros((b, w, q, q), dtype=complex)
            full[..., :m2, :m2] = mixed
            spec = np.fft.ifft2(np.roll(full, (-m, -m), axis=(-2, -1))).real
            point = np.transpose(
                np.transpose(h, (0, 2, 3, 1)) @ wp.data + bp.data,
                (0, 3, 1, 2))
            h = spec + point
            if not self.linear and i < self.layers - 1:
                h = _gelu_np(h)
        out = np.transpose(h, (0, 2, 3, 1)) @ self.w_proj.data + \
            self.b_proj.data
        return np.transpose(out, (0, 3, 1, 2))

    # ------------------------------------------------------------ state i/o

    def state(self) -> dict:
        return {f"p{i}": p.data for i, p in enumerate(self.params)}

    def load_state(self, state: dict):
        for i, p in enumerate(self.params):
            p.data = np.asarray(state[f"p{i}"], dtype=np.float64)

    config = property(lambda self: {
        "kind": "fno", "layers": self.layers, "modes": self.modes,
        "width": self.width, "n": self.n_out, "dt": self.dt, "q": self.q,
        "include_grid": self.include_grid, "linear": self.linear})


def fno_forward(model: FnoModel, u0: np.ndarray) -> Trajectory:
    """Predict the n-snapshot trajectory of one initial field."""
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.ndim != 2 or u0.shape[0] != u0.shape[1]:
        raise ValueError("initial condition must be a square field")
    fields = model.forward(u0[None])[0]
    return Trajectory(fields, model.dt, model.dt)


def _stack_trajectories(trajectories) -> np.ndarray:
    if isinstance(trajectories, np.ndarray):
        arr = np.asarray(trajectories, dtype=np.float64)
        if arr.ndim != 4:
            raise ValueError("expected (samples, snapshots, q, q) data")
        return arr
    shapes = {np.shape(t) for t in trajectories}
    if len(shapes) != 1:
        raise ValueError("trajectories disagree on snapshot count or "
                         "resolution")
    return np.asarray([np.asarray(t, dtype=np.float64)
                       for t in trajectories])


def train_fno(trajectories, dt: float, cfg: FnoConfig = FnoConfig()) \
        -> FnoModel:
    """Fit the operator to (initial field, later snapshots) pairs.

    Each trajectory holds the initial condition at index 0 followed by
    the n target snapshots.  Per-step squared-error losses are kept on
    the model's loss trace; everything is deterministic in cfg.seed.
    """
    data = _stack_trajectories(trajectories)
    n = data.shape[0]
    if data.shape[1] < 2:
        raise ValueError("each trajectory needs an initial condition and "
                         "at least one target snapshot")
    if n == 0 or cfg.batch_size > n:
        raise ValueError("batch size exceeds dataset size")
    u0, targets = data[:, 0], data[:, 1:]
    q = data.shape[-1]
    rng_init = np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                            spawn_key=(0,)))
    model = FnoModel(targets.shape[1], cfg.layers, cfg.modes, cfg.width,
                     q, dt, rng_init, include_grid=cfg.include_grid,
                     linear=cfg.linear)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                       spawn_key=(1,)))
    state = AdamState()
    batches = n // cfg.batch_size
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for b in range(batches):
            idx = perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            out = model.forward_graph(u0[idx])
            diff = ad.add(out, ad.constant(-targets[idx]))
            loss = ad.mul(ad.tsum(ad.square(diff)), 1.0 / cfg.batch_size)
            value = loss.item()
            if not np.isfinite(value):
                raise RuntimeError(f"training diverged: loss={value} at "
                                   f"step {len(model.loss_trace)}")
            grads, _ = ad.backprop(ad.Graph(loss, model.params))
            adam_step(model.params, grads, state, cfg.lr)
            model.loss_trace.append(value)
    return model


def save_fno(path, model: FnoModel) -> None:
    """Checkpoint the operator: JSON hyperparameters plus weights."""
    arrays = dict(model.state())
    arrays["loss_trace"] = np.asarray(model.loss_trace, dtype=np.float64)
    save_checkpoint(path, model.config, arrays)


def load_fno(path) -> FnoModel:
    config, arrays = load_checkpoint(path)
    if config.get("kind") != "fno":
        raise ValueError(f"{path}: not an operator checkpoint")
    trace = arrays.pop("loss_trace", np.empty(0))
    model = FnoModel(int(config["n"]), int(config["layers"]),
                     int(config["modes"]), int(config["width"]),
                     int(config["q"]), float(config["dt"]),
                     np.random.default_rng(0),
                     include_grid=bool(config["include_grid"]),
                     linear=bool(config["linear"]))
    model.load_state(arrays)
    model.loss_trace = [float(v) for v in np.atleast_1d(trace)]
    return model
