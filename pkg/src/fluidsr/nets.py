"""Small trainable networks for noise prediction.

Both architectures run in two modes: a graph mode that builds the
autodiff computation for training, and a plain-numpy mode for cheap
evaluation inside samplers and integrators.  A unit test pins the two
modes to each other.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


class TimeEmbedding:
    """Gaussian random-feature embedding [sin(t f), cos(t f)].

    Frequencies are drawn once at construction and never trained.
    """

    def __init__(self, dim: int, scale: float, rng: np.random.Generator):
        if dim % 2 != 0:
            raise ValueError("embedding dimension must be even")
        self.dim = dim
        self.scale = scale
        self.freqs = rng.normal(0.0, scale, size=dim // 2)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        phase = t[:, None] * self.freqs[None, :]
        return np.concatenate([np.sin(phase), np.cos(phase)], axis=1)

    def state(self) -> dict:
        return {"dim": self.dim, "scale": self.scale, "freqs": self.freqs}

    @classmethod
    def from_state(cls, state: dict) -> "TimeEmbedding":
        emb = cls.__new__(cls)
        emb.dim = int(state["dim"])
        emb.scale = float(state["scale"])
        emb.freqs = np.asarray(state["freqs"], dtype=np.float64)
        return emb


def _he(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class ConvNet:
    """Periodic convolutional residual tower with time conditioning.

    Layout: lifting conv, (depth - 2) residual conv blocks, output conv.
    The projected time embedding is added as a per-channel bias before
    each activation.
    """

    def __init__(self, in_channels: int, out_channels: int, width: int,
                 depth: int, embed_dim: int, rng: np.random.Generator):
        if depth < 3 or depth > 5:
            raise ValueError("depth must be between 3 and 5 conv layers")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.width = width
        self.depth = depth
        self.params = []

        def par(arr, name):
            p = ad.parameter(arr, name=name)
            self.params.append(p)
            return p

        k = 3
        self.w_in = par(_he(rng, (width, in_channels, k, k), in_channels * k * k),
                        "w_in")
        self.b_in = par(np.zeros(width), "b_in")
        self.t_in = par(_he(rng, (embed_dim, width), embed_dim), "t_in")
        self.blocks = []
        for i in range(depth - 2):
            self.blocks.append((
                par(_he(rng, (width, width, k, k), width * k * k), f"w{i}"),
                par(np.zeros(width), f"b{i}"),
                par(_he(rng, (embed_dim, width), embed_dim), f"t{i}"),
            ))
        self.w_out = par(_he(rng, (out_channels, width, k, k), width * k * k),
                         "w_out")
        self.b_out = par(np.zeros(out_channels), "b_out")

    def forward_graph(self, x: np.ndarray, temb: np.ndarray) -> ad.Tensor:
        xt = ad.constant(x)
        bias = ad.reshape(ad.matmul(ad.constant(temb), self.t_in),
                          (x.shape[0], self.width, 1, 1))
        h = ad.silu(ad.add(ad.conv2d(xt, self.w_in, self.b_in), bias))
        for w, b, tp in self.blocks:
            bias = ad.reshape(ad.matmul(ad.constant(temb), tp),
                              (x.shape[0], self.width, 1, 1))
            h = ad.add(h, ad.silu(ad.add(ad.conv2d(h, w, b), bias)))
        return ad.conv2d(h, self.w_out, self.b_out)

    def forward(self, x: np.ndarray, temb: np.ndarray) -> np.ndarray:
        def conv(h, w, b):
            return ad._conv2d_raw(h, w.data) + b.data[None, :, None, None]

        def act(h):
            # stable silu: h * sigmoid(h) without overflow for large |h|
            s = np.where(h >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(h))),
                         np.exp(-np.abs(h)) / (1.0 + np.exp(-np.abs(h))))
            return h * s

        bias = (temb @ self.t_in.data)[:, :, None, None]
        h = act(conv(x, self.w_in, self.b_in) + bias)
        for w, b, tp in self.blocks:
            bias = (temb @ tp.data)[:, :, None, None]
            h = h + act(conv(h, w, b) + bias)
        return conv(h, self.w_out, self.b_out)

    def state(self) -> dict:
        return {f"p{i}": p.data for i, p in enumerate(self.params)}

    def load_state(self, state: dict):
        for i, p in enumerate(self.params):
            p.data = np.asarray(state[f"p{i}"], dtype=np.float64)

    config = property(lambda self: {
        "arch": "conv", "in_channels": self.in_channels,
        "out_channels": self.out_channels, "width": self.width,
        "depth": self.depth})


class MlpNet:
    """Two-hidden-layer residual MLP for low-dimensional vector data."""

    def __init__(self, in_dim: int, out_dim: int, width: int, embed_dim: int,
                 rng: np.random.Generator):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.width = width
        self.params = []

        def par(arr, name):
            p = ad.parameter(arr, name=name)
            self.params.append(p)
            return p

        self.w0 = par(_he(rng, (in_dim, width), in_dim), "w0")
        self.b0 = par(np.zeros(width), "b0")
        self.t0 = par(_he(rng, (embed_dim, width), embed_dim), "t0")
        self.w1 = par(_he(rng, (width, width), width), "w1")
        self.b1 = par(np.zeros(width), "b1")
        self.t1 = par(_he(rng, (embed_dim, width), embed_dim), "t1")
        self.w2 = par(_he(rng, (width, out_dim), width), "w2")
        self.b2 = par(np.zeros(out_dim), "b2")

    def forward_graph(self, x: np.ndarray, temb: np.ndarray) -> ad.Tensor:
        xt, et = ad.constant(x), ad.constant(temb)
        h = ad.silu(ad.add(ad.add(ad.matmul(xt, self.w0), self.b0),
                           ad.matmul(et, self.t0)))
        h = ad.add(h, ad.silu(ad.add(ad.add(ad.matmul(h, self.w1), self.b1),
                                     ad.matmul(et, self.t1))))
        return ad.add(ad.matmul(h, self.w2), self.b2)

    def forward(self, x: np.ndarray, temb: np.ndarray) -> np.ndarray:
        def act(h):
            # stable silu: h * sigmoid(h) without overflow for large |h|
            s = np.where(h >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(h))),
                         np.exp(-np.abs(h)) / (1.0 + np.exp(-np.abs(h))))
            return h * s

        h = act(x @ self.w0.data + self.b0.data + temb @ self.t0.data)
        h = h + act(h @ self.w1.data + self.b1.data + temb @ self.t1.data)
        return h @ self.w2.data + self.b2.data

    def state(self) -> dict:
        return {f"p{i}": p.data for i, p in enumerate(self.params)}

    def load_state(self, state: dict):
        for i, p in enumerate(self.params):
            p.data = np.asarray(state[f"p{i}"], dtype=np.float64)

    config = property(lambda self: {
        "arch": "mlp", "in_dim": self.in_dim, "out_dim": self.out_dim,
        "width": self.width})
