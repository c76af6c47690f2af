"""Cascaded super-resolution: a chain of conditional doubling stages.

One hard super-resolution problem is split into resolution-doubling
steps.  Each stage is a conditional diffusion model trained on pairs
restriction-generated from the same high-resolution set, and inference
chains predictor-corrector samples stage by stage, so a factor-2^S
magnification costs S cheap samplers instead of one expensive one.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .fldio import read_manifest, write_manifest
from .resample import restrict
from .schedule import NoiseSchedule
from .scores import NeuralScore, TrainConfig, load_score, save_score, \
    train_conditional
from .transport import SamplerOptions, pc_denoise_set, sample_rng


class Cascade:
    """Ordered conditional models whose resolutions chain exactly."""

    def __init__(self, models):
        models = list(models)
        if not models:
            raise ValueError("cascade needs at least one stage")
        for i, m in enumerate(models):
            if not getattr(m, "conditional", False):
                raise ValueError(f"stage {i} model is not conditional")
            if len(m.field_shape) != 2 or m.cond_factor != 2:
                raise ValueError(f"stage {i} must double a 2-D resolution")
        for i in range(len(models) - 1):
            if models[i].field_shape[0] * 2 != models[i + 1].field_shape[0]:
                raise ValueError(
                    f"stage {i} emits {models[i].field_shape[0]} but stage "
                    f"{i + 1} expects {models[i + 1].field_shape[0] // 2}")
        self.models = models

    def __len__(self) -> int:
        return len(self.models)

    @property
    def input_resolution(self) -> int:
        return self.models[0].field_shape[0] // 2

    @property
    def output_resolution(self) -> int:
        return self.models[-1].field_shape[0]

    @property
    def factor(self) -> int:
        return 2 ** len(self.models)

    @property
    def stage_resolutions(self):
        return [(m.field_shape[0] // 2, m.field_shape[0])
                for m in self.models]


def stage_pairs(hfhr, s: int):
    """Conditions and targets for fine-to-coarse stage index s >= 1.

    Both sides restrict the original set directly (factors 2^s and
    2^(s-1)), so every stage trains on single-restriction conditions of
    the kind it will see at inference; stage 1 targets the original
    resolution.
    """
    if s < 1:
        raise ValueError("stage index starts at 1")
    hfhr = np.asarray(hfhr, dtype=np.float64)
    targets = hfhr.copy() if s == 1 else restrict(hfhr, 2 ** (s - 1))
    return restrict(hfhr, 2 ** s), targets


def train_cascade(hfhr, stages: int, schedule: NoiseSchedule,
                  cfg: TrainConfig) -> Cascade:
    """Train the doubling chain from one high-resolution set.

    Stages are independent; each trains on its own restriction pairs
    with a seed spawned from cfg.seed and the stage index, coarsest
    stage first.
    """
    hfhr = np.asarray(hfhr, dtype=np.float64)
    if stages < 1:
        raise ValueError("need at least one stage")
    if hfhr.ndim != 3 or hfhr.shape[-1] != hfhr.shape[-2]:
        raise ValueError("expected a set of square fields")
    q = hfhr.shape[-1]
    if q % (2 ** stages) != 0:
        raise ValueError(f"resolution {q} is not divisible by 2^{stages}")
    models = []
    for i in range(stages):
        s = stages - i
        conditions, targets = stage_pairs(hfhr, s)
        seed = int(np.random.SeedSequence(cfg.seed,
                                          spawn_key=(i,)).generate_state(1)[0])
        try:
            models.append(train_conditional(conditions, targets, schedule,
                                            replace(cfg, seed=seed)))
        except Exception as exc:
            raise RuntimeError(
                f"cascade stage {i} ({conditions.shape[-1]}->"
                f"{targets.shape[-1]}): {exc}") from exc
    return Cascade(models)


def super_resolve_set(fields, cascade: Cascade,
                      opts: SamplerOptions = SamplerOptions(steps=250),
                      start_index: int = 0) -> np.ndarray:
    """Chain conditional samples over a whole set, coarsest stage first.

    Each sample keeps one rng stream through all stages, so stage noise
    is decorrelated across stages yet fully reproducible per
    (seed, start_index + i).
    """
    x = np.asarray(fields, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError("expected a stacked set of square fields")
    if x.shape[-1] != cascade.input_resolution:
        raise ValueError(f"input resolution {x.shape[-1]} does not match "
                         f"the first stage ({cascade.input_resolution})")
    rngs = [sample_rng(opts.seed, start_index + i) for i in range(x.shape[0])]
    for model in cascade.models:
        prior = np.stack([r.standard_normal(model.field_shape)
                          for r in rngs])
        x = pc_denoise_set(model, model.schedule, opts, prior, 1.0,
                           conditions=x, rngs=rngs)
    return x


def super_resolve(lr, cascade: Cascade,
                  opts: SamplerOptions = SamplerOptions(steps=250),
                  sample_index: int = 0) -> np.ndarray:
    """Super-resolve one field; `sample_index` selects its noise stream."""
    lr = np.asarray(lr, dtype=np.float64)
    if lr.ndim != 2:
        raise ValueError("expected a single square field")
    return super_resolve_set(lr[None], cascade, opts,
                             start_index=sample_index)[0]


def save_cascade(directory, cascade: Cascade) -> None:
    """One score checkpoint per stage plus a chain manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, model in enumerate(cascade.models):
        name = f"stage_{i}.fld"
        save_score(directory / name, model)
        files.append(name)
    write_manifest(directory / "chain.json", {
        "stages": len(cascade),
        "files": files,
        "resolutions": [list(r) for r in cascade.stage_resolutions],
    })


def load_cascade(directory) -> Cascade:
    directory = Path(directory)
    manifest = read_manifest(directory / "chain.json")
    models = [load_score(directory / name) for name in manifest["files"]]
    cascade = Cascade(models)
    expected = [list(r) for r in cascade.stage_resolutions]
    if manifest["resolutions"] != expected:
        raise ValueError(f"{directory}: chain manifest disagrees with the "
                         "stored stages")
    return cascade
