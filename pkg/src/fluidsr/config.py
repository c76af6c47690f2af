"""Experiment configuration: one JSON document with per-stage sections.

Every default that shapes a run appears as an explicit field, so the
resolved document written next to the artifacts is a complete record of
what was computed.  Stage seeds live in their own section; any seed not
given is derived deterministically from the master seed, and the
resolved values are what the config hash covers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .fno import FnoConfig
from .ns2d import FlowConfig, IcParams
from .schedule import NoiseSchedule
from .scores import TrainConfig
from .transport import OdeOptions, SamplerOptions


class ConfigError(ValueError):
    """Invalid configuration; the command line maps this to exit code 2."""


@dataclass(frozen=True)
class DataSpec:
    """Dataset bundle source: a path to reuse, or a generation spec."""

    path: str | None = None
    hr_resolution: int = 64
    lr_resolution: int = 8
    n_lflr: int = 256
    n_hfhr: int = 256
    n_test: int = 32
    viscosity: float = 1e-3
    forcing_wavenumber: int = 4
    hr_dt: float = 5e-3
    lr_dt: float = 5e-3
    horizon: float = 1.0
    snapshots: int = 0
    snapshot_dt: float = 0.2
    ic_slope: float = 2.5
    ic_sigma: float = 0.5
    ic_amplitude: float = 1.0

    def __post_init__(self):
        for q in (self.hr_resolution, self.lr_resolution):
            if q < 4 or q & (q - 1):
                raise ValueError("resolutions must be powers of two, >= 4")
        if self.hr_resolution % self.lr_resolution:
            raise ValueError("low resolution must divide the high one")
        if self.factor not in (2, 4, 8):
            raise ValueError("resolution ratio must be 2, 4 or 8")
        if min(self.n_lflr, self.n_hfhr, self.n_test) < 1:
            raise ValueError("sample counts must be positive")
        if self.snapshots < 0 or self.snapshots == 1:
            raise ValueError("snapshots must be 0 (final time only) or >= 2")
        if self.snapshots and self.snapshot_dt <= 0.0:
            raise ValueError("snapshot_dt must be positive")

    @property
    def factor(self) -> int:
        return self.hr_resolution // self.lr_resolution

    @property
    def stages(self) -> int:
        return self.factor.bit_length() - 1

    @property
    def trajectory(self) -> bool:
        return self.snapshots >= 2

    @property
    def snapshot_times(self) -> list | None:
        if not self.trajectory:
            return None
        return [(k + 1) * self.snapshot_dt for k in range(self.snapshots)]

    def _horizon(self) -> float:
        if self.trajectory:
            return self.snapshots * self.snapshot_dt
        return self.horizon

    def hr_config(self) -> FlowConfig:
        return FlowConfig(q=self.hr_resolution, viscosity=self.viscosity,
                          forcing_wavenumber=self.forcing_wavenumber,
                          dt=self.hr_dt, horizon=self._horizon())

    def lr_config(self) -> FlowConfig:
        return FlowConfig(q=self.lr_resolution, viscosity=self.viscosity,
                          forcing_wavenumber=self.forcing_wavenumber,
                          dt=self.lr_dt, horizon=self._horizon())

    def ic_params(self) -> IcParams:
        return IcParams(slope=self.ic_slope, sigma=self.ic_sigma,
                        amplitude=self.ic_amplitude)


@dataclass(frozen=True)
class SearchSpec:
    """Grid-search settings for the translation time pair."""

    n_t1: int = 10
    n_t2: int = 10
    metric: str = "melrw"

    def __post_init__(self):
        if min(self.n_t1, self.n_t2) < 2:
            raise ValueError("need at least two grid points per axis")


@dataclass(frozen=True)
class StageSeeds:
    """One explicit seed per stochastic stage."""

    data: int
    score_lflr: int
    score_hflr: int
    cascade: int
    fno: int
    sampler: int
    sdedit: int


_SEED_NAMES = tuple(f.name for f in fields(StageSeeds))


def _derive_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence(master,
                                      spawn_key=(index,)).generate_state(1)[0])


def derive_seeds(master: int, explicit: dict | None = None) -> StageSeeds:
    """Fill every stage seed, keeping any explicitly given value."""
    explicit = dict(explicit or {})
    unknown = set(explicit) - set(_SEED_NAMES)
    if unknown:
        raise ConfigError(f"unknown seed entries {sorted(unknown)}")
    return StageSeeds(**{name: int(explicit.get(name,
                                                _derive_seed(master, i)))
                         for i, name in enumerate(_SEED_NAMES)})


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one pipeline run needs, with resolved stage seeds."""

    data: DataSpec = field(default_factory=DataSpec)
    schedule: NoiseSchedule = field(default_factory=NoiseSchedule)
    score_train: TrainConfig = field(default_factory=TrainConfig)
    cascade_train: TrainConfig = field(default_factory=TrainConfig)
    fno: FnoConfig = field(default_factory=FnoConfig)
    search: SearchSpec = field(default_factory=SearchSpec)
    sampler: SamplerOptions = field(default_factory=SamplerOptions)
    ode: OdeOptions = field(default_factory=OdeOptions)
    seeds: StageSeeds | None = None
    out_dir: str | None = None
    seed: int = 0
    baselines: bool = False
    sdedit_t0: float = 0.5
    mmd_bandwidth: float = 0.01

    def __post_init__(self):
        if self.seeds is None:
            object.__setattr__(self, "seeds", derive_seeds(self.seed))
        if not 0.0 < self.sdedit_t0 <= 1.0:
            raise ValueError("sdedit_t0 must lie in (0, 1]")
        if self.mmd_bandwidth <= 0.0:
            raise ValueError("mmd_bandwidth must be positive")


_SECTIONS = {
    "data": DataSpec,
    "schedule": NoiseSchedule,
    "score_train": TrainConfig,
    "cascade_train": TrainConfig,
    "fno": FnoConfig,
    "search": SearchSpec,
    "sampler": SamplerOptions,
    "ode": OdeOptions,
}
# stage seeds are centralized; a stray per-section seed would silently
# lose to the seeds section, so reject it outright
_SEEDED_SECTIONS = ("score_train", "cascade_train", "fno", "sampler")
_SCALARS = ("out_dir", "seed", "baselines", "sdedit_t0", "mmd_bandwidth")


def _build_section(name: str, cls, payload):
    if not isinstance(payload, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in section {name!r}")
    if name in _SEEDED_SECTIONS and "seed" in payload:
        raise ConfigError(f"set seeds in the 'seeds' section, not in {name!r}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def from_dict(doc: dict, seed: int | None = None,
              out_dir=None) -> ExperimentConfig:
    """Build a fully resolved config; overrides win over document values."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - set(_SECTIONS) - set(_SCALARS) - {"seeds"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    master = doc.get("seed", 0) if seed is None else seed
    if not isinstance(master, int) or master < 0:
        raise ConfigError("seed must be a non-negative integer")
    sections = {name: _build_section(name, cls, doc.get(name, {}))
                for name, cls in _SECTIONS.items()}
    seeds_doc = doc.get("seeds", {})
    if not isinstance(seeds_doc, dict):
        raise ConfigError("section 'seeds' must be a JSON object")
    out = out_dir if out_dir is not None else doc.get("out_dir")
    try:
        return ExperimentConfig(
            seeds=derive_seeds(master, seeds_doc),
            out_dir=None if out is None else str(out),
            seed=master,
            baselines=bool(doc.get("baselines", False)),
            sdedit_t0=float(doc.get("sdedit_t0", 0.5)),
            mmd_bandwidth=float(doc.get("mmd_bandwidth", 0.01)),
            **sections)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, seed: int | None = None,
                out_dir=None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return from_dict(doc, seed=seed, out_dir=out_dir)


def to_dict(cfg: ExperimentConfig) -> dict:
    """Fully explicit document; round-trips through from_dict."""
    doc = {name: asdict(getattr(cfg, name)) for name in _SECTIONS}
    for name in _SEEDED_SECTIONS:
        doc[name].pop("seed", None)
    doc["seeds"] = asdict(cfg.seeds)
    for name in _SCALARS:
        doc[name] = getattr(cfg, name)
    return doc


def config_hash(cfg: ExperimentConfig) -> str:
    """Identity of the computation; where it lands (out_dir) is excluded."""
    doc = to_dict(cfg)
    doc.pop("out_dir")
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def validate_run(cfg: ExperimentConfig) -> None:
    """Checks deferred to run start: paths and cross-section coupling."""
    if cfg.out_dir is None:
        raise ConfigError("no output directory configured (out_dir/--out)")
    if cfg.data.path is not None:
        manifest = Path(cfg.data.path) / "manifest.json"
        if not manifest.is_file():
            raise ConfigError(f"dataset bundle {cfg.data.path} has no "
                              "manifest.json")
    if cfg.data.trajectory:
        for dt in (cfg.data.hr_dt, cfg.data.lr_dt):
            ratio = cfg.data.snapshot_dt / dt
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError("snapshot_dt must be a multiple of both "
                                  "solver time steps")
    if cfg.data.trajectory and 2 * cfg.fno.modes > cfg.data.lr_resolution:
        raise ConfigError("fno modes exceed the Nyquist range of the "
                          "low-resolution grid")
