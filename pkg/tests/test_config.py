"""Experiment-config parsing, seed resolution, hashing, validation."""

import json

import pytest

from fluidsr.config import (ConfigError, DataSpec, ExperimentConfig,
                            config_hash, derive_seeds, from_dict, load_config,
                            to_dict, validate_run)


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    doc = to_dict(cfg)
    again = from_dict(doc)
    assert config_hash(again) == config_hash(cfg)
    assert to_dict(again) == doc


def test_document_records_every_default():
    doc = to_dict(ExperimentConfig())
    assert doc["schedule"] == {"beta0": 0.1, "beta1": 20.0, "t_min": 1e-3}
    assert doc["search"] == {"n_t1": 10, "n_t2": 10, "metric": "melrw"}
    assert doc["ode"]["rtol"] == 1e-5 and doc["ode"]["atol"] == 1e-5
    assert doc["mmd_bandwidth"] == 0.01
    assert doc["sdedit_t0"] == 0.5
    assert doc["data"]["forcing_wavenumber"] == 4
    assert doc["data"]["viscosity"] == 1e-3
    assert "seed" not in doc["score_train"]
    assert set(doc["seeds"]) == {"data", "score_lflr", "score_hflr",
                                 "cascade", "fno", "sampler", "sdedit"}


def test_seed_resolution():
    a = derive_seeds(0)
    b = derive_seeds(0)
    c = derive_seeds(1)
    assert a == b
    assert a.data != c.data
    assert len({a.data, a.score_lflr, a.score_hflr, a.cascade, a.fno,
                a.sampler, a.sdedit}) == 7
    explicit = derive_seeds(0, {"cascade": 99})
    assert explicit.cascade == 99 and explicit.data == a.data
    with pytest.raises(ConfigError, match="unknown seed"):
        derive_seeds(0, {"turbo": 1})


def test_overrides_beat_document():
    doc = {"seed": 7, "out_dir": "a"}
    cfg = from_dict(doc, seed=9, out_dir="b")
    assert cfg.seed == 9 and cfg.out_dir == "b"
    assert cfg.seeds == derive_seeds(9)


def test_rejections():
    cases = [
        ({"bogus": 1}, "top-level"),
        ({"data": {"warp": 2}}, "unknown keys"),
        ({"data": {"hr_resolution": 48}}, "powers of two"),
        ({"data": {"hr_resolution": 64, "lr_resolution": 4}}, "2, 4 or 8"),
        ({"data": {"snapshots": 1}}, "snapshots"),
        ({"data": {"n_test": 0}}, "positive"),
        ({"score_train": {"seed": 1}}, "seeds"),
        ({"score_train": {"epochs": 0}}, "positive"),
        ({"search": {"metric": 3, "n_t1": 1}}, "grid"),
        ({"sdedit_t0": 1.5}, "sdedit_t0"),
        ({"mmd_bandwidth": 0.0}, "bandwidth"),
        ({"seed": -1}, "seed"),
        ({"seeds": 3}, "seeds"),
        ({"data": 4}, "object"),
    ]
    for doc, match in cases:
        with pytest.raises(ConfigError, match=match):
            from_dict(doc)
    with pytest.raises(ConfigError):
        from_dict([1, 2])


def test_data_spec_derived_views():
    spec = DataSpec(hr_resolution=64, lr_resolution=8)
    assert spec.factor == 8 and spec.stages == 3
    assert not spec.trajectory and spec.snapshot_times is None
    traj = DataSpec(hr_resolution=16, lr_resolution=8, snapshots=5,
                    snapshot_dt=0.2)
    assert traj.trajectory
    assert traj.snapshot_times == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])
    hr = traj.hr_config()
    assert hr.q == 16 and hr.horizon == pytest.approx(1.0)
    lr = traj.lr_config()
    assert lr.q == 8 and lr.viscosity == 1e-3 and lr.forcing_wavenumber == 4


def test_validate_run():
    with pytest.raises(ConfigError, match="output"):
        validate_run(ExperimentConfig())
    with pytest.raises(ConfigError, match="manifest"):
        validate_run(from_dict({"out_dir": "x",
                                "data": {"path": "/does/not/exist"}}))
    bad_dt = from_dict({"out_dir": "x",
                        "data": {"hr_resolution": 16, "lr_resolution": 8,
                                 "snapshots": 2, "snapshot_dt": 0.01,
                                 "hr_dt": 0.004, "lr_dt": 0.005}})
    with pytest.raises(ConfigError, match="snapshot_dt"):
        validate_run(bad_dt)
    bad_fno = from_dict({"out_dir": "x",
                         "data": {"hr_resolution": 16, "lr_resolution": 8,
                                  "snapshots": 2, "snapshot_dt": 0.5},
                         "fno": {"modes": 8}})
    with pytest.raises(ConfigError, match="[Nn]yquist"):
        validate_run(bad_fno)
    validate_run(from_dict({"out_dir": "x"}))


def test_hash_ignores_location_only():
    base = {"out_dir": "a", "seed": 3}
    assert config_hash(from_dict(base)) \
        == config_hash(from_dict(dict(base, out_dir="b")))
    assert config_hash(from_dict(base)) \
        != config_hash(from_dict(dict(base, seed=4)))
    assert config_hash(from_dict(base)) \
        != config_hash(from_dict(dict(base, baselines=True)))


def test_load_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 11, "out_dir": "runs/x"}))
    cfg = load_config(path)
    assert cfg.seed == 11 and cfg.out_dir == "runs/x"
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(arr)
