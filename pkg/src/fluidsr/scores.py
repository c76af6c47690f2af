"""Score models: closed-form Gaussian references and trainable networks."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .fldio import load_checkpoint, save_checkpoint
from .nets import ConvNet, MlpNet, TimeEmbedding
from .optim import AdamState, adam_step
from .resample import upsample
from .schedule import NoiseSchedule


def _check_t(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("diffusion time must lie in [0, 1]")
    return t


class AnalyticGaussianScore:
    """Exact marginal score for data N(mean, std^2 I)."""

    kind = "analytic-gaussian"
    conditional = False

    def __init__(self, schedule: NoiseSchedule, mean, std: float,
                 field_shape=(1,)):
        if std <= 0.0:
            raise ValueError("component std must be positive")
        self.schedule = schedule
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = float(std)
        self.field_shape = tuple(np.shape(mean)) or tuple(field_shape)

    def score(self, x, t):
        t = _check_t(t)
        x = np.asarray(x, dtype=np.float64)
        a = self.schedule.alpha(t)
        v = a * a * self.std ** 2 + self.schedule.sigma2(t)
        return -(x - a * self.mean) / v


class AnalyticMixtureScore:
    """Marginal score of an isotropic Gaussian mixture.

    Component responsibilities are evaluated jointly over each sample's
    trailing axes (a leading axis, if present, indexes samples).
    """

    kind = "analytic-mixture"
    conditional = False

    def __init__(self, schedule: NoiseSchedule, weights, means, stds,
                 field_shape=(1,)):
        self.schedule = schedule
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.stds = np.asarray(stds, dtype=np.float64)
        self.field_shape = tuple(field_shape)
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.stds <= 0.0):
            raise ValueError("component std must be positive")
        if not (len(self.weights) == len(self.means) == len(self.stds)):
            raise ValueError("component lists must have equal length")

    def score(self, x, t):
        t = float(_check_t(t))
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 0
        pts = np.atleast_1d(x)
        flat = pts.reshape(pts.shape[0], -1) if pts.ndim > 1 else pts[:, None]
        d = flat.shape[1]
        a = self.schedule.alpha(t)
        s2 = self.schedule.sigma2(t)
        logp = np.empty((flat.shape[0], len(self.weights)))
        comp_score = np.empty((flat.shape[0], d, len(self.weights)))
        for i, (w, mu, sd) in enumerate(zip(self.weights, self.means,
                                            self.stds)):
            v = a * a * sd * sd + s2
            diff = flat - a * mu
            logp[:, i] = (np.log(w) - 0.5 * (diff ** 2).sum(axis=1) / v
                          - 0.5 * d * np.log(2.0 * np.pi * v))
            comp_score[:, :, i] = -diff / v
        logp -= logp.max(axis=1, keepdims=True)
        resp = np.exp(logp)
        resp /= resp.sum(axis=1, keepdims=True)
        out = (comp_score * resp[:, None, :]).sum(axis=2).reshape(pts.shape)
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; the seed fixes the whole trajectory."""

    batch_size: int = 64
    lr: float = 1e-3
    epochs: int = 20
    seed: int = 0
    width: int = 32
    depth: int = 4  # conv layers for field data; the MLP has a fixed layout
    embed_dim: int = 64
    embed_scale: float = 4.0

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.width, self.depth,
               self.embed_dim) <= 0 or self.lr <= 0.0 or self.embed_scale <= 0.0:
            raise ValueError("training hyperparameters must be positive")


class NeuralScore:
    """Trained score model S(x, t) = -net(x, t) / sigma(t).

    The network predicts the perturbation noise; dividing by sigma turns
    the prediction into a score.  Evaluation floors t at the schedule's
    t_min, where the model was never trained and sigma vanishes.
    """

    def __init__(self, schedule: NoiseSchedule, net, embedding: TimeEmbedding,
                 field_shape, conditional: bool = False, cond_factor: int = 1,
                 loss_trace=None, train_config: TrainConfig | None = None):
        self.schedule = schedule
        self.net = net
        self.embedding = embedding
        self.field_shape = tuple(field_shape)
        self.conditional = conditional
        self.cond_factor = cond_factor
        self.loss_trace = list(loss_trace or [])
        self.train_config = train_config

    @property
    def kind(self):
        return "neural-conditional" if self.conditional else "neural-unconditional"

    def _net_input(self, x: np.ndarray, condition):
        if len(self.field_shape) == 1:
            if self.conditional:
                cond = np.asarray(condition, dtype=np.float64)
                cond = np.broadcast_to(cond, x.shape)
                return np.concatenate([x, cond], axis=1)
            return x
        xin = x[:, None, :, :]
        if self.conditional:
            cond = np.asarray(condition, dtype=np.float64)
            if cond.ndim == len(self.field_shape):
                cond = cond[None]
            if self.cond_factor != 1:
                cond = upsample(cond, self.cond_factor)
            if cond.shape[-2:] != x.shape[-2:]:
                raise ValueError("condition does not match target resolution "
                                 "after upsampling")
            cond = np.broadcast_to(cond[:, None, :, :],
                                   (x.shape[0], 1) + x.shape[1:])
            return np.concatenate([xin, cond], axis=1)
        return xin

    def score(self, x, t, condition=None):
        if self.conditional and condition is None:
            raise ValueError("conditional model needs a condition")
        t = _check_t(t)
        x = np.asarray(x, dtype=np.float64)
        single = x.shape == self.field_shape
        xb = x[None] if single else x
        tb = np.broadcast_to(np.atleast_1d(np.maximum(t, self.schedule.t_min)),
                             (xb.shape[0],))
        eps_hat = self.net.forward(self._net_input(xb, condition),
                                   self.embedding(tb))
        if len(self.field_shape) != 1:
            eps_hat = eps_hat[:, 0, :, :]
        sig = self.schedule.sigma(tb).reshape((-1,) + (1,) * (xb.ndim - 1))
        out = -eps_hat / sig
        return out[0] if single else out

    def state(self) -> dict:
        return {
            "kind": self.kind,
            "schedule": {"beta0": self.schedule.beta0,
                         "beta1": self.schedule.beta1,
                         "t_min": self.schedule.t_min},
            "net_config": self.net.config,
            "net_state": self.net.state(),
            "embedding": self.embedding.state(),
            "field_shape": list(self.field_shape),
            "cond_factor": self.cond_factor,
            "loss_trace": list(self.loss_trace),
        }

    @classmethod
    def from_state(cls, state: dict) -> "NeuralScore":
        schedule = NoiseSchedule(**state["schedule"])
        nc = dict(state["net_config"])
        arch = nc.pop("arch")
        rng = np.random.default_rng(0)
        if arch == "conv":
            net = ConvNet(nc["in_channels"], nc["out_channels"], nc["width"],
                          nc["depth"],
                          int(np.asarray(state["embedding"]["dim"])), rng)
        else:
            net = MlpNet(nc["in_dim"], nc["out_dim"], nc["width"],
                         int(np.asarray(state["embedding"]["dim"])), rng)
        net.load_state(state["net_state"])
        return cls(schedule, net, TimeEmbedding.from_state(state["embedding"]),
                   tuple(state["field_shape"]),
                   conditional=state["kind"] == "neural-conditional",
                   cond_factor=int(state["cond_factor"]),
                   loss_trace=state.get("loss_trace"))


def _make_net(field_shape, in_mult: int, cfg: TrainConfig,
              rng: np.random.Generator):
    if len(field_shape) == 1:
        d = field_shape[0]
        return MlpNet(in_mult * d, d, cfg.width, cfg.embed_dim, rng)
    return ConvNet(in_mult, 1, cfg.width, cfg.depth, cfg.embed_dim, rng)


def _train(dataset, conditions, schedule, cfg: TrainConfig):
    data = np.asarray(dataset, dtype=np.float64)
    n = data.shape[0]
    if n == 0:
        raise ValueError("empty training dataset")
    if cfg.batch_size > n:
        raise ValueError("batch size exceeds dataset size")
    field_shape = data.shape[1:]
    conditional = conditions is not None
    rng_init = np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                            spawn_key=(0,)))
    embedding = TimeEmbedding(cfg.embed_dim, cfg.embed_scale, rng_init)
    net = _make_net(field_shape, 2 if conditional else 1, cfg, rng_init)
    model = NeuralScore(schedule, net, embedding, field_shape,
                        conditional=conditional,
                        cond_factor=1, train_config=cfg)
    if conditional:
        cond = np.asarray(conditions, dtype=np.float64)
        if cond.shape[0] != n:
            raise ValueError("conditions and targets must pair one-to-one")
        if len(field_shape) == 2:
            factor = field_shape[-1] // cond.shape[-1]
            if cond.shape[-1] * factor != field_shape[-1]:
                raise ValueError("condition resolution must divide target "
                                 "resolution")
            model.cond_factor = factor
            cond_up = upsample(cond, factor) if factor != 1 else cond
            if cond_up.shape[-2:] != field_shape:
                raise ValueError("condition does not match target resolution "
                                 "after upsampling")
        else:
            if cond.shape != data.shape:
                raise ValueError("vector conditions must match target shape")
            cond_up = cond

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                       spawn_key=(1,)))
    state = AdamState()
    batches = n // cfg.batch_size
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for b in range(batches):
            idx = perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            x0 = data[idx]
            t = rng.uniform(schedule.t_min, 1.0, size=cfg.batch_size)
            eps = rng.standard_normal(x0.shape)
            bshape = (-1,) + (1,) * (x0.ndim - 1)
            xt = (schedule.alpha(t).reshape(bshape) * x0
                  + schedule.sigma(t).reshape(bshape) * eps)
            if conditional:
                if len(field_shape) == 2:
                    xin = np.stack([xt, cond_up[idx]], axis=1)
                else:
                    xin = np.concatenate([xt, cond_up[idx]], axis=1)
            else:
                xin = xt[:, None, :, :] if len(field_shape) == 2 else xt
            out = net.forward_graph(xin, embedding(t))
            diff = ad.add(out, ad.constant(-(eps[:, None, :, :]
                                             if len(field_shape) == 2 else eps)))
            loss = ad.mul(ad.tsum(ad.square(diff)), 1.0 / cfg.batch_size)
            value = loss.item()
            if not np.isfinite(value):
                raise RuntimeError(
                    f"training diverged: loss={value} at step "
                    f"{len(model.loss_trace)}")
            grads, _ = ad.backprop(ad.Graph(loss, net.params))
            adam_step(net.params, grads, state, cfg.lr)
            model.loss_trace.append(value)
    return model


def train_unconditional(dataset, schedule: NoiseSchedule,
                        cfg: TrainConfig) -> NeuralScore:
    """Fit a noise-prediction network to a set of fields (or vectors)."""
    return _train(dataset, None, schedule, cfg)


def train_conditional(conditions, targets, schedule: NoiseSchedule,
                      cfg: TrainConfig) -> NeuralScore:
    """Fit a conditional model of targets given (upsampled) conditions."""
    return _train(targets, conditions, schedule, cfg)


def save_score(path, model: NeuralScore) -> None:
    """Checkpoint a trained model: JSON header plus parameter tensors."""
    state = model.state()
    config = {
        "kind": state["kind"],
        "schedule": state["schedule"],
        "net_config": state["net_config"],
        "field_shape": state["field_shape"],
        "cond_factor": state["cond_factor"],
        "embedding": {"dim": model.embedding.dim,
                      "scale": model.embedding.scale},
        "train_config": asdict(model.train_config)
        if model.train_config is not None else None,
    }
    arrays = dict(state["net_state"])
    arrays["freqs"] = model.embedding.freqs
    arrays["loss_trace"] = np.asarray(state["loss_trace"], dtype=np.float64)
    save_checkpoint(path, config, arrays)


def load_score(path) -> NeuralScore:
    config, arrays = load_checkpoint(path)
    if config.get("kind") not in ("neural-unconditional",
                                  "neural-conditional"):
        raise ValueError(f"{path}: not a score-model checkpoint")
    trace = arrays.pop("loss_trace", np.empty(0))
    embedding = dict(config["embedding"])
    embedding["freqs"] = arrays.pop("freqs")
    state = {
        "kind": config["kind"],
        "schedule": config["schedule"],
        "net_config": config["net_config"],
        "net_state": arrays,
        "embedding": embedding,
        "field_shape": config["field_shape"],
        "cond_factor": config["cond_factor"],
        "loss_trace": [float(v) for v in np.atleast_1d(trace)],
    }
    model = NeuralScore.from_state(state)
    if config.get("train_config") is not None:
        model.train_config = TrainConfig(**config["train_config"])
    return model
