"""Staged experiment pipelines: data, training, translation, reports.

A pipeline is an ordered list of stages writing artifacts under one
output directory.  Each completed stage leaves a marker carrying the
config hash, so a killed run restarts where it stopped (resume) and a
changed config is refused instead of silently mixing intermediates.
Reports keep metric values and wall-clock timings in separate files:
the former reproduce bit-for-bit under a fixed config and seeds, the
latter are provenance only.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import (ConfigError, ExperimentConfig, config_hash, to_dict,
                     validate_run)
from .debias import TranslationPlan, search_t1t2, translate_ddib, \
    translate_eddib, translate_ot_baseline, translate_sdedit
from .fldio import read_field, read_manifest, write_field, write_manifest
from .fno import fno_forward, load_fno, save_fno, train_fno
from .metrics import kl_knn, mean_spectrum, melr, mmd, rmse, tvd, w2
from .ns2d import DatasetBundle, generate_datasets
from .resample import restrict, upsample
from .scores import load_score, save_score, train_unconditional
from .srcascade import load_cascade, save_cascade, super_resolve_set, \
    train_cascade
from .transport import VelocityField

_METRIC_NAMES = ("rmse", "tvd", "melru", "melrw", "mmd", "w2", "kl")


class StageError(RuntimeError):
    """A pipeline stage failed; completed stages keep their markers."""

    def __init__(self, stage: str, message: str, sample_index=None):
        self.stage = stage
        self.sample_index = sample_index
        where = stage if sample_index is None else f"{stage}, sample {sample_index}"
        super().__init__(f"stage {where}: {message}")


def _clean(value):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats to None."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_clean(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return ""
    return repr(float(value))


@dataclass(frozen=True)
class EvaluationReport:
    """Metric tables plus the artifacts a figure would be drawn from.

    `tables` maps method name to a row of set-level metrics against the
    named reference; `per_sample` holds the paired per-sample values
    behind boxplot-style summaries; `spectra` holds shell-wise energy
    log-ratio curves log(E_pred(k) / E_ref(k)).  Trajectory reports add
    `per_snapshot` curves; the headline table is then the final time.
    """

    tables: dict
    per_sample: dict
    spectra: dict
    per_snapshot: dict | None = None
    search: dict | None = None
    decomposition: dict | None = None
    config_hash: str | None = None
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean({
            "tables": self.tables,
            "per_sample": self.per_sample,
            "spectra": self.spectra,
            "per_snapshot": self.per_snapshot,
            "search": self.search,
            "decomposition": self.decomposition,
            "config_hash": self.config_hash,
        })

    @classmethod
    def from_dict(cls, doc: dict, timings=None) -> "EvaluationReport":
        return cls(tables=doc["tables"], per_sample=doc["per_sample"],
                   spectra=doc["spectra"],
                   per_snapshot=doc.get("per_snapshot"),
                   search=doc.get("search"),
                   decomposition=doc.get("decomposition"),
                   config_hash=doc.get("config_hash"),
                   timings=dict(timings or {}))

    def write(self, out_dir) -> None:
        """Emit report.json and the CSV views; timings stay elsewhere."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(out / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "reference"] + list(_METRIC_NAMES))
            for method in sorted(self.tables):
                row = self.tables[method]
                writer.writerow([method, row.get("reference", "")]
                                + [_fmt(row.get(m)) for m in _METRIC_NAMES])
        with open(out / "per_sample.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "sample", "rmse", "tvd"])
            for method in sorted(self.per_sample):
                vals = self.per_sample[method]
                for i, (a, b) in enumerate(zip(vals["rmse"], vals["tvd"])):
                    writer.writerow([method, i, _fmt(a), _fmt(b)])
        for method in sorted(self.spectra):
            curve = self.spectra[method]
            with open(out / f"spectrum_{method}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["k", "log_ratio"])
                for k, v in zip(curve["k"], curve["log_ratio"]):
                    writer.writerow([int(k), _fmt(v)])
        if self.per_snapshot is not None:
            with open(out / "per_snapshot.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["method", "snapshot"] + list(_METRIC_NAMES))
                for method in sorted(self.per_snapshot):
                    curves = self.per_snapshot[method]
                    count = len(curves[_METRIC_NAMES[0]])
                    for s in range(count):
                        writer.writerow(
                            [method, s]
                            + [_fmt(curves[m][s]) for m in _METRIC_NAMES])


def _per_sample_metrics(pred, ref) -> dict:
    p = pred.reshape(pred.shape[0], -1)
    r = ref.reshape(ref.shape[0], -1)
    l2 = np.linalg.norm(r, axis=1)
    l1 = np.abs(r).sum(axis=1)
    return {"rmse": (np.linalg.norm(p - r, axis=1) / l2).tolist(),
            "tvd": (np.abs(p - r).sum(axis=1) / l1).tolist()}


def _set_table(pred, ref, bandwidth: float) -> dict:
    pf = pred.reshape(pred.shape[0], -1)
    rf = ref.reshape(ref.shape[0], -1)
    table = {
        "rmse": rmse(pred, ref),
        "tvd": tvd(pred, ref),
        "melru": melr(pred, ref, weighted=False),
        "melrw": melr(pred, ref, weighted=True),
        "mmd": mmd(pf, rf, bandwidth=bandwidth),
        "w2": w2(pf, rf),
    }
    k = min(5, pf.shape[0] - 1, rf.shape[0] - 1)
    table["kl"] = kl_knn(pf, rf, k=k) if k >= 1 else None
    return table


def _spectrum_log_ratio(pred, ref) -> dict:
    sp, sr = mean_spectrum(pred), mean_spectrum(ref)
    k_hi = min(sp.k_max, sr.k_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(sp.energy[:k_hi + 1] / sr.energy[:k_hi + 1])
    return {"k": list(range(k_hi + 1)), "log_ratio": ratio.tolist()}


def _eval_pair(pred, ref, bandwidth: float, label: str):
    """(tables, per_sample, spectra, per_snapshot) for one method."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError("paired evaluation needs equal counts and shapes")
    if pred.ndim == 3:
        return ({label: _set_table(pred, ref, bandwidth)},
                {label: _per_sample_metrics(pred, ref)},
                {label: _spectrum_log_ratio(pred, ref)}, None)
    if pred.ndim != 4:
        raise ValueError("expected a set of fields or of trajectories")
    curves = {m: [] for m in _METRIC_NAMES}
    for s in range(pred.shape[1]):
        snap = _set_table(pred[:, s], ref[:, s], bandwidth)
        for m in _METRIC_NAMES:
            curves[m].append(snap[m])
    return ({label: _set_table(pred[:, -1], ref[:, -1], bandwidth)},
            {label: _per_sample_metrics(pred[:, -1], ref[:, -1])},
            {label: _spectrum_log_ratio(pred[:, -1], ref[:, -1])},
            {label: curves})


def evaluate(pred, ref, mmd_bandwidth: float = 0.01, label: str = "pred",
             out_dir=None) -> EvaluationReport:
    """Full metric suite for one prediction set against its references.

    3-d inputs compare as snapshot sets; 4-d inputs compare trajectory
    snapshot-wise, with the final snapshot as the headline table.  With
    `out_dir` the JSON and CSV views are written there.
    """
    tables, per_sample, spectra, per_snapshot = _eval_pair(
        pred, ref, mmd_bandwidth, label)
    report = EvaluationReport(tables, per_sample, spectra, per_snapshot)
    if out_dir is not None:
        report.write(out_dir)
    return report


@dataclass(frozen=True)
class _Stage:
    name: str
    description: str
    run: object


def _marker(out: Path, name: str) -> Path:
    return out / "markers" / f"{name}.json"


def _execute(stages, out: Path, chash: str, resume: bool, dry_run: bool):
    if dry_run:
        plan = []
        for st in stages:
            done = False
            path = _marker(out, st.name)
            if path.exists():
                done = read_manifest(path).get("config_hash") == chash
            status = "done" if done else "pending"
            plan.append({"stage": st.name, "status": status,
                         "description": st.description})
            print(f"stage {st.name:<14} [{status:7}] {st.description}")
        return plan
    (out / "markers").mkdir(parents=True, exist_ok=True)
    timings = {}
    for st in stages:
        path = _marker(out, st.name)
        if path.exists():
            info = read_manifest(path)
            if info.get("config_hash") != chash:
                if resume:
                    raise ConfigError(
                        f"stage '{st.name}' was computed under a different "
                        "config; use a fresh output directory")
                path.unlink()
            elif resume:
                timings[st.name] = info.get("seconds")
                continue
            else:
                path.unlink()
        start = time.perf_counter()
        try:
            st.run()
        except (ConfigError, StageError) as exc:
            _note_failure(out, st.name, chash, exc)
            raise
        except Exception as exc:
            _note_failure(out, st.name, chash, exc)
            raise StageError(st.name, str(exc)) from exc
        timings[st.name] = time.perf_counter() - start
        write_manifest(path, {"stage": st.name, "config_hash": chash,
                              "seconds": timings[st.name]})
    (out / "failure.json").unlink(missing_ok=True)
    return timings


def _note_failure(out: Path, stage: str, chash: str, exc) -> None:
    write_manifest(out / "failure.json",
                   {"stage": stage, "config_hash": chash, "error": str(exc)})


class _Run:
    """Shared state of one pipeline execution: config, paths, artifacts."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.cache = {}

    # ---- artifact access with disk fallback (stages may be resumed) ----

    def bundle(self) -> DatasetBundle:
        if "bundle" not in self.cache:
            root = self.cfg.data.path or self.out / "data"
            self.cache["bundle"] = DatasetBundle.load(root)
        return self.cache["bundle"]

    def score(self, which: str):
        key = f"score_{which}"
        if key not in self.cache:
            self.cache[key] = load_score(self.out / "models" / f"{key}.fld")
        return self.cache[key]

    def cascade(self):
        if "cascade" not in self.cache:
            self.cache["cascade"] = load_cascade(self.out / "models" / "cascade")
        return self.cache["cascade"]

    def fno(self):
        if "fno" not in self.cache:
            self.cache["fno"] = load_fno(self.out / "models" / "fno.fld")
        return self.cache["fno"]

    def plan(self) -> TranslationPlan:
        summary = read_manifest(self.out / "search" / "summary.json")
        return TranslationPlan(summary["t1_star"], summary["t2_star"])

    def array(self, rel: str) -> np.ndarray:
        key = f"array:{rel}"
        if key not in self.cache:
            self.cache[key] = read_field(self.out / rel)
        return self.cache[key]

    def put_array(self, rel: str, value: np.ndarray) -> None:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        write_field(path, value)
        self.cache[f"array:{rel}"] = value

    # ---- dataset views ----

    def _maybe_decompose(self, items: np.ndarray) -> np.ndarray:
        # trajectory items carry the initial state first; training and
        # search operate on the evolved snapshots only
        if not self.cfg.data.trajectory:
            return items
        return items[:, 1:].reshape((-1,) + items.shape[-2:])

    def lflr_train(self) -> np.ndarray:
        return self._maybe_decompose(self.bundle().fields("lflr_train"))

    def hfhr_train(self) -> np.ndarray:
        return self._maybe_decompose(self.bundle().fields("hfhr_train"))

    def hflr_train(self) -> np.ndarray:
        return restrict(self.hfhr_train(), self.cfg.data.factor)

    def test_source(self) -> np.ndarray:
        items = self.bundle().fields("lflr_test")
        return items[:, 1] if self.cfg.data.trajectory else items


def _stage_data(run: _Run):
    cfg = run.cfg
    if cfg.data.path is not None:
        bundle = DatasetBundle.load(cfg.data.path)
        missing = [k for k in ("lflr_train", "hfhr_train", "lflr_test",
                               "hfhr_test")
                   if k not in bundle.manifest.get("counts", {})]
        if missing:
            raise ConfigError(f"bundle {cfg.data.path} lacks counts for "
                              f"{missing}")
    else:
        spec = cfg.data
        bundle = generate_datasets(run.out / "data", spec.hr_config(),
                                   spec.lr_config(), spec.n_lflr,
                                   spec.n_hfhr, spec.n_test,
                                   seed=cfg.seeds.data,
                                   snapshot_times=spec.snapshot_times,
                                   ic=spec.ic_params())
    run.cache["bundle"] = bundle
    if cfg.data.trajectory:
        counts = bundle.manifest["counts"]
        n = cfg.data.snapshots
        write_manifest(run.out / "decomposition.json", {
            "snapshots_per_trajectory": n,
            "trajectories": dict(counts),
            "snapshots": {k: v * n for k, v in counts.items()},
        })


def _stage_score(run: _Run, which: str):
    cfg = run.cfg
    fields = run.lflr_train() if which == "lflr" else run.hflr_train()
    seed = getattr(cfg.seeds, f"score_{which}")
    model = train_unconditional(fields, cfg.schedule,
                                replace(cfg.score_train, seed=seed))
    path = run.out / "models" / f"score_{which}.fld"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_score(path, model)
    run.cache[f"score_{which}"] = model


def _stage_cascade(run: _Run):
    cfg = run.cfg
    cascade = train_cascade(run.hfhr_train(), cfg.data.stages, cfg.schedule,
                            replace(cfg.cascade_train, seed=cfg.seeds.cascade))
    save_cascade(run.out / "models" / "cascade", cascade)
    run.cache["cascade"] = cascade


def _stage_fno(run: _Run):
    cfg = run.cfg
    hf = run.bundle().fields("hfhr_train")[:, 1:]
    flat = restrict(hf.reshape((-1,) + hf.shape[-2:]), cfg.data.factor)
    lr_traj = flat.reshape(hf.shape[:2] + flat.shape[-2:])
    model = train_fno(lr_traj, dt=cfg.data.snapshot_dt,
                      cfg=replace(cfg.fno, seed=cfg.seeds.fno))
    path = run.out / "models" / "fno.fld"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_fno(path, model)
    run.cache["fno"] = model


def _stage_search(run: _Run):
    cfg = run.cfg
    opts = {"bandwidth": cfg.mmd_bandwidth} if cfg.search.metric == "mmd" \
        else None
    grid = search_t1t2(run.lflr_train(), run.hflr_train(),
                       VelocityField(run.score("lflr")),
                       VelocityField(run.score("hflr")),
                       n_t1=cfg.search.n_t1, n_t2=cfg.search.n_t2,
                       metric=cfg.search.metric, ode_options=cfg.ode,
                       metric_options=opts)
    (run.out / "search").mkdir(parents=True, exist_ok=True)
    grid.write_csv(run.out / "search" / "grid.csv")
    write_manifest(run.out / "search" / "summary.json", _clean(grid.summary()))


def _stage_translate(run: _Run):
    cfg = run.cfg
    source = run.test_source()
    v_src = VelocityField(run.score("lflr"))
    v_tgt = VelocityField(run.score("hflr"))
    run.put_array("translate/eddib.fld",
                  translate_eddib(source, v_src, v_tgt, run.plan(), cfg.ode))
    if not cfg.baselines:
        return
    run.put_array("translate/ddib.fld",
                  translate_ddib(source, v_src, v_tgt, cfg.ode))
    sd_opts = replace(cfg.sampler, corrector_steps=0, seed=cfg.seeds.sdedit)
    run.put_array("translate/sdedit.fld",
                  translate_sdedit(source, run.score("hflr"), cfg.schedule,
                                   t0=cfg.sdedit_t0, opts=sd_opts))
    run.put_array("translate/ot.fld",
                  translate_ot_baseline(source, run.hflr_train()))


def _stage_rollout(run: _Run):
    translated = run.array("translate/eddib.fld")
    model = run.fno()
    rows = []
    for i, first in enumerate(translated):
        try:
            later = fno_forward(model, first).fields
        except Exception as exc:
            raise StageError("rollout", str(exc), sample_index=i) from exc
        rows.append(np.concatenate([first[None], later]))
    run.put_array("rollout/trajectories.fld", np.stack(rows))


def _stage_super_resolve(run: _Run):
    cfg = run.cfg
    opts = replace(cfg.sampler, seed=cfg.seeds.sampler)
    if cfg.data.trajectory:
        lr = run.array("rollout/trajectories.fld")
        flat = lr.reshape((-1,) + lr.shape[-2:])
        sr = super_resolve_set(flat, run.cascade(), opts)
        run.put_array("sr/trajectories.fld",
                      sr.reshape(lr.shape[:2] + sr.shape[-2:]))
    else:
        sr = super_resolve_set(run.array("translate/eddib.fld"),
                               run.cascade(), opts)
        run.put_array("sr/fields.fld", sr)


def _merge(parts, run: _Run, chash: str):
    tables, per_sample, spectra, per_snapshot = {}, {}, {}, {}
    for method, reference, item in parts:
        t, ps, sp, snap = item
        tables[method] = {"reference": reference, **t[method]}
        per_sample[method] = ps[method]
        spectra[method] = sp[method]
        if snap is not None:
            per_snapshot[method] = snap[method]
    search = None
    summary_path = run.out / "search" / "summary.json"
    if summary_path.exists():
        search = dict(read_manifest(summary_path))
        search["grid_csv"] = "search/grid.csv"
    decomposition = None
    decomp_path = run.out / "decomposition.json"
    if decomp_path.exists():
        decomposition = read_manifest(decomp_path)
    report = EvaluationReport(tables, per_sample, spectra,
                              per_snapshot or None, search, decomposition,
                              chash)
    report.write(run.out / "report")
    run.cache["report"] = report


def _stage_evaluate_snapshot(run: _Run, chash: str):
    cfg = run.cfg
    bw = cfg.mmd_bandwidth
    hfhr_ref = run.bundle().fields("hfhr_test")
    hflr_ref = restrict(hfhr_ref, cfg.data.factor)
    lflr = run.bundle().fields("lflr_test")
    parts = [
        ("lflr", "hflr_test", _eval_pair(lflr, hflr_ref, bw, "lflr")),
        ("eddib", "hflr_test",
         _eval_pair(run.array("translate/eddib.fld"), hflr_ref, bw, "eddib")),
        ("sr", "hfhr_test",
         _eval_pair(run.array("sr/fields.fld"), hfhr_ref, bw, "sr")),
        ("bicubic", "hfhr_test",
         _eval_pair(upsample(lflr, cfg.data.factor), hfhr_ref, bw,
                    "bicubic")),
    ]
    if cfg.baselines:
        for name in ("ddib", "sdedit", "ot"):
            parts.append((name, "hflr_test",
                          _eval_pair(run.array(f"translate/{name}.fld"),
                                     hflr_ref, bw, name)))
    _merge(parts, run, chash)


def _stage_evaluate_trajectory(run: _Run, chash: str):
    cfg = run.cfg
    bw = cfg.mmd_bandwidth
    ref = run.bundle().fields("hfhr_test")[:, 1:]
    predicted = run.array("sr/trajectories.fld")
    lflr = run.bundle().fields("lflr_test")[:, 1:]
    flat = upsample(lflr.reshape((-1,) + lflr.shape[-2:]), cfg.data.factor)
    bicubic = flat.reshape(lflr.shape[:2] + flat.shape[-2:])
    parts = [
        ("predicted", "hfhr_test",
         _eval_pair(predicted, ref, bw, "predicted")),
        ("bicubic", "hfhr_test", _eval_pair(bicubic, ref, bw, "bicubic")),
    ]
    _merge(parts, run, chash)


def _stages_for(run: _Run, chash: str) -> list:
    cfg = run.cfg
    traj = cfg.data.trajectory
    stages = [
        _Stage("data", "generate or load the dataset bundle",
               lambda: _stage_data(run)),
        _Stage("score-lflr", "train the low-fidelity score model",
               lambda: _stage_score(run, "lflr")),
        _Stage("score-hflr", "train the restricted high-fidelity score model",
               lambda: _stage_score(run, "hflr")),
        _Stage("cascade", "train the super-resolution chain",
               lambda: _stage_cascade(run)),
    ]
    if traj:
        stages.append(_Stage("fno", "train the trajectory operator",
                             lambda: _stage_fno(run)))
    stages += [
        _Stage("search", "grid-search the translation times",
               lambda: _stage_search(run)),
        _Stage("translate", "translate the test set toward high fidelity",
               lambda: _stage_translate(run)),
    ]
    if traj:
        stages.append(_Stage("rollout", "roll trajectories out from the "
                             "translated snapshots",
                             lambda: _stage_rollout(run)))
    stages.append(_Stage("super-resolve", "upsample through the cascade",
                         lambda: _stage_super_resolve(run)))
    evaluate_fn = _stage_evaluate_trajectory if traj \
        else _stage_evaluate_snapshot
    stages.append(_Stage("evaluate", "compute the metric report",
                         lambda: evaluate_fn(run, chash)))
    return stages


def stage_names(cfg: ExperimentConfig) -> list:
    """Ordered stage names for this config's pipeline."""
    run = _Run(cfg) if cfg.out_dir else None
    if run is None:
        cfg = replace(cfg, out_dir=".")
        run = _Run(cfg)
    return [st.name for st in _stages_for(run, "")]


def _run_pipeline(cfg: ExperimentConfig, resume: bool, dry_run: bool,
                  upto: str | None):
    validate_run(cfg)
    run = _Run(cfg)
    chash = config_hash(cfg)
    stages = _stages_for(run, chash)
    if upto is not None:
        names = [st.name for st in stages]
        if upto not in names:
            raise ConfigError(f"stage '{upto}' is not part of this "
                              f"pipeline (stages: {', '.join(names)})")
        stages = stages[:names.index(upto) + 1]
    if not dry_run:
        run.out.mkdir(parents=True, exist_ok=True)
        write_manifest(run.out / "config.json", to_dict(cfg))
    result = _execute(stages, run.out, chash, resume, dry_run)
    if dry_run:
        return result
    if upto is not None and upto != "evaluate":
        write_manifest(run.out / "timings.json", _clean(result))
        return None
    if "report" not in run.cache:
        doc = json.loads((run.out / "report" / "report.json").read_text())
        run.cache["report"] = EvaluationReport.from_dict(doc)
    report = replace(run.cache["report"], timings=dict(result))
    write_manifest(run.out / "timings.json", _clean(result))
    return report


def run_snapshot_pipeline(cfg: ExperimentConfig, resume: bool = False,
                          dry_run: bool = False):
    """Prepare data, train, search, translate, super-resolve, evaluate.

    Returns the EvaluationReport, or the printed stage plan in dry-run
    mode.  Rerunning with identical config and seeds reproduces every
    report value bit-for-bit; `resume` additionally reuses completed
    stages recorded under the same config hash.
    """
    if cfg.data.trajectory:
        raise ConfigError("snapshot pipeline requires snapshots == 0; "
                          "use run_trajectory_pipeline")
    return _run_pipeline(cfg, resume, dry_run, None)


def run_trajectory_pipeline(cfg: ExperimentConfig, resume: bool = False,
                            dry_run: bool = False):
    """Snapshot pipeline plus operator training and rollout.

    Trajectories decompose to evolved snapshots for all set-level
    training; inference translates each test item's first snapshot,
    rolls the operator forward at low resolution and super-resolves
    every snapshot through the cascade.
    """
    if not cfg.data.trajectory:
        raise ConfigError("trajectory pipeline requires snapshots >= 2")
    return _run_pipeline(cfg, resume, dry_run, None)


def run_until(cfg: ExperimentConfig, stage: str, resume: bool = True,
              dry_run: bool = False):
    """Execute the pipeline prefix ending at `stage` (inclusive)."""
    return _run_pipeline(cfg, resume, dry_run, stage)
