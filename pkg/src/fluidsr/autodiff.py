"""Minimal reverse-mode autodiff on dense float64 arrays.

Every operation builds a node holding a closure that maps the output
gradient to parent-gradient contributions.  `backprop` walks the graph in
reverse topological order and accumulates gradients into the leaves.
"""

from __future__ import annotations

import numpy as np


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


class Tensor:
    """Dense float64 array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "parents", "backward_fn", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None,
                 name=None):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # operator sugar; everything routes through the module-level ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def item(self) -> float:
        return float(self.data)


def constant(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=False, name=name)


def parameter(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_graph(*tensors) -> bool:
    return any(t.requires_grad or t.parents for t in tensors)


def _node(data, parents, backward_fn) -> Tensor:
    if _needs_graph(*parents):
        return Tensor(data, parents=parents, backward_fn=backward_fn)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise and linear-algebra ops

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(out, (a, b), bw)


def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch semantics on leading axes."""
    a, b = _wrap(a), _wrap(b)
    out = a.data @ b.data

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(out, (a, b), bw)


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0.0  # subgradient at 0 is taken to be 0
    out = np.where(mask, a.data, 0.0)

    def bw(g):
        return (np.where(mask, g, 0.0),)

    return _node(out, (a,), bw)


def silu(a) -> Tensor:
    a = _wrap(a)
    sig = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * sig

    def bw(g):
        return (g * (sig + a.data * sig * (1.0 - sig)),)

    return _node(out, (a,), bw)


def gelu(a) -> Tensor:
    """Exact Gaussian-error-linear unit, x * Phi(x)."""
    from scipy.special import erf

    a = _wrap(a)
    phi_cdf = 0.5 * (1.0 + erf(a.data / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * a.data ** 2) / np.sqrt(2.0 * np.pi)
    out = a.data * phi_cdf

    def bw(g):
        return (g * (phi_cdf + a.data * pdf),)

    return _node(out, (a,), bw)


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.data)

    def bw(g):
        return (g * (1.0 - out ** 2),)

    return _node(out, (a,), bw)


def square(a) -> Tensor:
    a = _wrap(a)
    out = a.data ** 2

    def bw(g):
        return (2.0 * g * a.data,)

    return _node(out, (a,), bw)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(out, (a,), bw)


def tmean(a) -> Tensor:
    a = _wrap(a)
    n = a.size
    out = a.data.mean()

    def bw(g):
        return (np.full(a.shape, float(g) / n),)

    return _node(out, (a,), bw)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out = a.data.reshape(shape)

    def bw(g):
        return (g.reshape(a.shape),)

    return _node(out, (a,), bw)


def transpose(a, axes) -> Tensor:
    a = _wrap(a)
    out = np.transpose(a.data, axes)
    inv = np.argsort(axes)

    def bw(g):
        return (np.transpose(g, inv),)

    return _node(out, (a,), bw)


def concat(tensors, axis) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(out, tuple(tensors), bw)


# ---------------------------------------------------------------------------
# periodic convolution

def _im2col_periodic(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Patch matrix [B, H*W, C*kh*kw] of a wrap-padded [B, C, H, W] input."""
    B, C, H, W = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode="wrap")
    s = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (B, C, H, W, kh, kw), (s[0], s[1], s[2], s[3], s[2], s[3]))
    return view.transpose(0, 2, 3, 1, 4, 5).reshape(B, H * W, C * kh * kw)


def _conv2d_raw(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    B, C, H, W = x.shape
    co = w.shape[0]
    cols = _im2col_periodic(x, w.shape[2], w.shape[3])
    y = cols @ w.reshape(co, -1).T
    return y.transpose(0, 2, 1).reshape(B, co, H, W)


def conv2d(x, w, b=None) -> Tensor:
    """Stride-1 periodic (circular padding) 2-D convolution.

    x: [B, C_in, H, W], w: [C_out, C_in, kh, kw] with odd kh, kw,
    optional bias b: [C_out].
    """
    x, w = _wrap(x), _wrap(w)
    kh, kw = w.shape[2], w.shape[3]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("conv2d requires odd kernel sizes")
    out = _conv2d_raw(x.data, w.data)
    if b is not None:
        b = _wrap(b)
        out = out + b.data[None, :, None, None]

    def bw(g):
        B, co, H, W = g.shape
        # input grad: correlate with the flipped, channel-swapped kernel
        wf = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).copy()
        gx = _conv2d_raw(g, wf)
        cols = _im2col_periodic(x.data, kh, kw)
        gmat = g.reshape(B, co, H * W)
        gw = np.einsum("bop,bpk->ok", gmat, cols, optimize=True)
        gw = gw.reshape(w.shape)
        if b is not None:
            return gx, gw, g.sum(axis=(0, 2, 3))
        return gx, gw

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, bw)


# ---------------------------------------------------------------------------
# 2-D FFT primitives (complex values carried as a real/imaginary pair)

def fft2(a):
    """Unnormalized 2-D DFT over the last two axes of a real tensor.

    Returns the (real, imaginary) parts as two tensors.
    """
    a = _wrap(a)
    z = np.fft.fft2(a.data)
    n = a.shape[-1] * a.shape[-2]

    def bw_re(g):
        return (n * np.fft.ifft2(g).real,)

    def bw_im(g):
        return (n * np.fft.ifft2(1j * g).real,)

    re = _node(np.ascontiguousarray(z.real), (a,), bw_re)
    im = _node(np.ascontiguousarray(z.imag), (a,), bw_im)
    return re, im


def ifft2(re, im):
    """Unnormalized inverse of fft2; returns the (real, imaginary) pair."""
    re, im = _wrap(re), _wrap(im)
    z = np.fft.ifft2(re.data + 1j * im.data)
    n = re.shape[-1] * re.shape[-2]

    def bw_out_re(g):
        w = np.fft.fft2(g) / n
        return np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag)

    def bw_out_im(g):
        w = np.fft.fft2(1j * g) / n
        return np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag)

    out_re = _node(np.ascontiguousarray(z.real), (re, im), bw_out_re)
    out_im = _node(np.ascontiguousarray(z.imag), (re, im), bw_out_im)
    return out_re, out_im


def corner_crop(a, m) -> Tensor:
    """Gather the four low-frequency corner blocks into a [..., 2m, 2m] array.

    Rolling by m along both spectral axes places the corners contiguously.
    """
    a = _wrap(a)
    rolled = np.roll(a.data, (m, m), axis=(-2, -1))
    out = rolled[..., : 2 * m, : 2 * m].copy()

    def bw(g):
        full = np.zeros(a.shape)
        full[..., : 2 * m, : 2 * m] = g
        return (np.roll(full, (-m, -m), axis=(-2, -1)),)

    return _node(out, (a,), bw)


def corner_pad(a, m, H, W) -> Tensor:
    """Adjoint of corner_crop: scatter a [..., 2m, 2m] block into [..., H, W]."""
    a = _wrap(a)
    full = np.zeros(a.shape[:-2] + (H, W))
    full[..., : 2 * m, : 2 * m] = a.data
    out = np.roll(full, (-m, -m), axis=(-2, -1))

    def bw(g):
        rolled = np.roll(g, (m, m), axis=(-2, -1))
        return (rolled[..., : 2 * m, : 2 * m].copy(),)

    return _node(out, (a,), bw)


# ---------------------------------------------------------------------------
# graph and backprop

class Graph:
    """A scalar loss node together with the leaf parameters it depends on."""

    def __init__(self, loss: Tensor, params):
        if loss.data.ndim != 0:
            raise ValueError("graph loss must be a scalar")
        self.loss = loss
        self.params = list(params)
        self.nodes = self._toposort()

    def _toposort(self):
        order, seen = [], set()
        stack = [(self.loss, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return order  # already in topological order (parents first)


def backprop(graph: Graph):
    """Reverse-mode sweep; returns ({param: grad}, [disconnected params]).

    Parameters not reachable from the loss get a zero gradient and are
    reported so silent wiring bugs surface early.
    """
    for node in graph.nodes:
        node.grad = None
    graph.loss.grad = np.ones(())
    for node in reversed(graph.nodes):
        if node.grad is None or node.backward_fn is None:
            continue
        contribs = node.backward_fn(node.grad)
        for parent, contrib in zip(node.parents, contribs):
            if contrib is None:
                continue
            if parent.grad is None:
                parent.grad = np.asarray(contrib, dtype=np.float64)
            else:
                parent.grad = parent.grad + contrib
    reached = {id(n) for n in graph.nodes}
    grads, disconnected = {}, []
    for p in graph.params:
        if id(p) in reached and p.grad is not None:
            grads[p] = p.grad
        else:
            grads[p] = np.zeros(p.shape)
            disconnected.append(p)
    return grads, disconnected
