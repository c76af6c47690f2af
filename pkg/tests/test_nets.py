"""Network building blocks: dual forward paths and state round-trips."""

import numpy as np

from fluidsr.nets import ConvNet, MlpNet, TimeEmbedding


def test_time_embedding_shape_and_determinism():
    rng = np.random.default_rng(0)
    emb = TimeEmbedding(32, 4.0, rng)
    out = emb(np.array([0.1, 0.9]))
    assert out.shape == (2, 32)
    emb2 = TimeEmbedding.from_state(emb.state())
    assert np.array_equal(out, emb2(np.array([0.1, 0.9])))


def test_convnet_fast_path_matches_graph():
    rng = np.random.default_rng(1)
    net = ConvNet(2, 1, 16, 4, 32, rng)
    emb = TimeEmbedding(32, 4.0, rng)
    x = rng.standard_normal((3, 2, 8, 8))
    temb = emb(np.array([0.2, 0.5, 0.8]))
    fast = net.forward(x, temb)
    graph = net.forward_graph(x, temb).data
    assert np.max(np.abs(fast - graph)) < 1e-12


def test_mlpnet_fast_path_matches_graph():
    rng = np.random.default_rng(2)
    net = MlpNet(3, 3, 24, 16, rng)
    emb = TimeEmbedding(16, 4.0, rng)
    x = rng.standard_normal((5, 3))
    temb = emb(np.full(5, 0.4))
    fast = net.forward(x, temb)
    graph = net.forward_graph(x, temb).data
    assert np.max(np.abs(fast - graph)) < 1e-12


def test_convnet_state_round_trip():
    rng = np.random.default_rng(3)
    net = ConvNet(1, 1, 8, 3, 16, rng)
    emb = TimeEmbedding(16, 4.0, rng)
    x = rng.standard_normal((2, 1, 8, 8))
    temb = emb(np.array([0.3, 0.7]))
    clone = ConvNet(1, 1, 8, 3, 16, np.random.default_rng(99))
    clone.load_state(net.state())
    assert np.array_equal(net.forward(x, temb), clone.forward(x, temb))


def test_convnet_silu_is_overflow_safe():
    rng = np.random.default_rng(4)
    net = ConvNet(1, 1, 8, 3, 16, rng)
    emb = TimeEmbedding(16, 4.0, rng)
    x = 1e3 * np.ones((1, 1, 8, 8))
    with np.errstate(over="raise"):
        out = net.forward(x, emb(np.array([0.5])))
    assert np.all(np.isfinite(out))
