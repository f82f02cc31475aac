"""Experiment configuration, benchmark runner and report emission."""

from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy

from . import __version__
from .baselines import KernelConfig, kriging_fit, kriging_predict, pod_fit, pod_predict
from .data import ObservableLift, ParameterPoint, SnapshotSet
from .dmd import RankPolicy, resolve_shared_rank, thin_svd, train_ensemble
from .errors import ConfigError, FormatError, NumericalError, PromkitError
from .io import read_snapshot_file
from .manifold import InterpolationConfig, interpolate_entrywise
from .metrics import relative_l2_series, total_relative_l2
from .reconstruct import predict_qoi_trajectory
from .solvers import (
    derive_diffusion_qois,
    simulate_adv_diff,
    simulate_burgers,
    simulate_masked_diffusion,
)

log = logging.getLogger(__name__)

PROBLEMS = ("adv_diff", "masked_diffusion", "burgers", "external")
METHODS = ("dmd", "pod", "kriging")
THREADS_ENV = "PROMKIT_THREADS"


def thread_cap() -> int:
    """Worker count: ``PROMKIT_THREADS`` if set, else the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


# -- configuration ----------------------------------------------------------------


def _points(spec, name: str) -> tuple[tuple[float, ...], ...]:
    """Parameter list from explicit values or ``{"linspace": [lo, hi, n]}``."""
    if isinstance(spec, dict):
        if set(spec) - {"linspace", "interior"}:
            raise ConfigError(f"{name}: unknown keys {sorted(set(spec) - {'linspace', 'interior'})}")
        lo, hi, n = spec["linspace"]
        vals = np.linspace(float(lo), float(hi), int(n))
        if spec.get("interior", False):
            vals = vals[1:-1]
        return tuple((float(v),) for v in vals)
    if not isinstance(spec, (list, tuple)):
        raise ConfigError(f"{name} must be a list or a linspace spec")
    return tuple(tuple(float(x) for x in np.atleast_1d(v)) for v in spec)


def _rank_policies(spec) -> tuple[RankPolicy, ...]:
    if isinstance(spec, bool):
        raise ConfigError("rank must be an integer, a list or a policy object")
    if isinstance(spec, int):
        return (RankPolicy.fixed(spec),)
    if isinstance(spec, dict):
        return (RankPolicy.from_dict(spec),)
    if isinstance(spec, (list, tuple)) and spec:
        return tuple(p for item in spec for p in _rank_policies(item))
    raise ConfigError(f"cannot read rank specification {spec!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    train: tuple[tuple[float, ...], ...]
    test: tuple[tuple[float, ...], ...]
    horizon: int
    lift: dict = field(default_factory=lambda: {"kind": "affine"})
    rank: tuple[RankPolicy, ...] = (RankPolicy.fixed(10),)
    n_snap: tuple[int, ...] = ()
    interpolation: InterpolationConfig = field(default_factory=InterpolationConfig)
    methods: tuple[str, ...] = ("dmd",)
    qoi: str = "state"
    initial: str = "reference"
    problem_options: dict = field(default_factory=dict)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    external: dict | None = None
    allow_training_targets: bool = False
    output_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if self.problem != "external" and len(self.train) < 2:
            raise ConfigError("need at least two training parameters")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; expected a subset of {METHODS}")
        if self.initial not in ("reference", "interpolate"):
            raise ConfigError("initial must be 'reference' or 'interpolate'")
        if any(n < 1 for n in self.n_snap):
            raise ConfigError("n_snap entries must be positive")
        if not self.allow_training_targets and set(self.train) & set(self.test):
            raise ConfigError("training and test parameter sets must be disjoint")
        if self.problem == "external" and not self.external:
            raise ConfigError("problem 'external' needs an 'external' section with snapshot files")

    @property
    def n_snaps(self) -> tuple[int, ...]:
        return self.n_snap or (self.horizon,)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            problem = d.pop("problem")
            horizon = int(d.pop("horizon"))
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None
        kw = {}
        if "n_snap" in d:
            ns = d.pop("n_snap")
            kw["n_snap"] = tuple(int(n) for n in np.atleast_1d(ns))
        if "rank" in d:
            kw["rank"] = _rank_policies(d.pop("rank"))
        if "interpolation" in d:
            kw["interpolation"] = InterpolationConfig.from_dict(d.pop("interpolation"))
        if "kernel" in d:
            kw["kernel"] = KernelConfig.from_dict(d.pop("kernel"))
        if "methods" in d:
            m = d.pop("methods")
            kw["methods"] = tuple(m.split(",") if isinstance(m, str) else m)
        train = _points(d.pop("train", []), "train")
        test = _points(d.pop("test", []), "test")
        return cls(problem=problem, train=train, test=test, horizon=horizon, **kw, **d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "train": [list(p) for p in self.train],
            "test": [list(p) for p in self.test],
            "horizon": self.horizon,
            "lift": dict(self.lift),
            "rank": [p.to_dict() for p in self.rank],
            "n_snap": list(self.n_snap),
            "interpolation": self.interpolation.to_dict(),
            "methods": list(self.methods),
            "qoi": self.qoi,
            "initial": self.initial,
            "problem_options": dict(self.problem_options),
            "kernel": asdict(self.kernel),
            "external": self.external,
            "allow_training_targets": self.allow_training_targets,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# -- problems -----------------------------------------------------------------------


def make_simulator(cfg: ExperimentConfig) -> Callable[[tuple[float, ...], int, bool], tuple[SnapshotSet, object]]:
    """Return ``sim(param, n_steps, export_operator) -> (QoI snapshots, operator or None)``."""
    opts = dict(cfg.problem_options)
    if cfg.problem == "adv_diff":
        if cfg.qoi != "state":
            raise ConfigError("adv_diff only provides the 'state' QoI")

        def sim(p, n, export):
            return simulate_adv_diff(p[0], n, export_operator=export, **opts)

    elif cfg.problem == "masked_diffusion":
        if cfg.qoi not in ("state", "flux", "heat_rate"):
            raise ConfigError(f"unknown masked_diffusion QoI {cfg.qoi!r}")

        def sim(p, n, export):
            s, op = simulate_masked_diffusion(p[0], n, export_operator=export and cfg.qoi == "state", **opts)
            return (s, op) if cfg.qoi == "state" else (derive_diffusion_qois(s, cfg.qoi), None)

    elif cfg.problem == "burgers":
        if "pod" in cfg.methods:
            raise ConfigError("POD needs an exported linear operator; Burgers is nonlinear")

        def sim(p, n, export):
            return simulate_burgers(p[0], n, **opts), None

    else:
        raise ConfigError("external problems are loaded from files, not simulated")
    return sim


def make_lift(spec: dict, training: Sequence[SnapshotSet]) -> ObservableLift:
    spec = dict(spec)
    kind = spec.pop("kind", "affine")
    n = training[0].qoi_dim
    if kind == "identity":
        return ObservableLift.identity(n)
    if kind == "affine":
        return ObservableLift.affine(n)
    if kind == "stack":
        parts = spec.get("parts")
        if parts is None:
            names = training[0].qoi_names or ("q",)
            if n % len(names):
                raise ConfigError("cannot split QoI evenly across its names; give 'parts'")
            parts = [n // len(names)] * len(names)
        return ObservableLift.stack(parts)
    if kind == "hermite":
        if "mean" in spec or "scale" in spec:
            return ObservableLift.hermite(spec["order"], spec.get("mean", 0.0), spec.get("scale", 1.0))
        pooled = np.concatenate([s.data.ravel() for s in training])
        return ObservableLift.hermite_from_data(spec["order"], pooled)
    raise ConfigError(f"unknown lift kind {kind!r}")


# -- report types -------------------------------------------------------------------


@dataclass
class ErrorRecord:
    method: str
    n_snap: int
    rank: int | None
    param: tuple[float, ...]
    total: float
    series: list[float]
    absolute: list[bool]
    ref_norms: list[float]
    t0: float
    dt: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["param"] = list(self.param)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorRecord":
        d = dict(d)
        d["param"] = tuple(d["param"])
        return cls(**d)


@dataclass
class TimingRecord:
    method: str
    n_snap: int
    rank: int | None
    datagen: float
    offline: float
    online: float
    hfm: float | None
    storage_count: int | None

    @property
    def online_speedup(self) -> float | None:
        return None if self.hfm is None else self.hfm / self.online

    @property
    def total_speedup(self) -> float | None:
        return None if self.hfm is None else self.hfm / (self.datagen + self.offline + self.online)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(online_speedup=self.online_speedup, total_speedup=self.total_speedup)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TimingRecord":
        d = {k: v for k, v in d.items() if k not in ("online_speedup", "total_speedup")}
        return cls(**d)


@dataclass
class BenchReport:
    config: dict
    provenance: dict
    errors: list[ErrorRecord] = field(default_factory=list)
    timings: list[TimingRecord] = field(default_factory=list)

    def select(self, method: str | None = None, n_snap: int | None = None, rank: int | None = None) -> list[ErrorRecord]:
        return [
            e
            for e in self.errors
            if (method is None or e.method == method)
            and (n_snap is None or e.n_snap == n_snap)
            and (rank is None or e.rank == rank)
        ]

    def timing(self, method: str, n_snap: int | None = None, rank: int | None = None) -> TimingRecord:
        for t in self.timings:
            if t.method == method and (n_snap is None or t.n_snap == n_snap) and (rank is None or t.rank == rank):
                return t
        raise KeyError((method, n_snap, rank))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "provenance": self.provenance,
            "errors": [e.to_dict() for e in self.errors],
            "timings": [t.to_dict() for t in self.timings],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        return cls(
            d["config"],
            d["provenance"],
            [ErrorRecord.from_dict(e) for e in d["errors"]],
            [TimingRecord.from_dict(t) for t in d["timings"]],
        )


# -- benchmark --------------------------------------------------------------------


@contextlib.contextmanager
def stage(name: str):
    """Re-raise failures with the pipeline stage in the message."""
    try:
        yield
    except PromkitError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalError(f"[{name}] {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def _pmap(fn, items, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def load_external(cfg: ExperimentConfig) -> tuple[list[SnapshotSet], list[SnapshotSet]]:
    ext = cfg.external or {}
    base = Path(ext.get("root", "."))
    train = [read_snapshot_file(base / f) for f in ext.get("train", [])]
    test = [read_snapshot_file(base / f) for f in ext.get("test", [])]
    if len(train) < 2:
        raise ConfigError("external problem needs at least two training snapshot files")
    return train, test


def _provenance(cfg: ExperimentConfig) -> dict:
    return {
        "config_sha256": cfg.digest(),
        "promkit": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "threads": thread_cap(),
        "seed": cfg.seed,
    }


def _record(method, n_snap, rank, target, pred_qoi, ref: SnapshotSet, include_initial, diag) -> ErrorRecord:
    series, absolute = relative_l2_series(pred_qoi, ref.data)
    return ErrorRecord(
        method=method,
        n_snap=n_snap,
        rank=rank,
        param=tuple(target.values),
        total=total_relative_l2(pred_qoi, ref.data, include_initial=include_initial),
        series=[float(x) for x in series],
        absolute=[bool(x) for x in absolute],
        ref_norms=[float(x) for x in np.linalg.norm(ref.data, axis=0)],
        t0=float(ref.t0),
        dt=float(ref.dt),
        diagnostics={k: v for k, v in diag.items() if isinstance(v, (int, float, str, bool))},
    )


def run_benchmark(cfg: ExperimentConfig, include_initial: bool = False) -> BenchReport:
    """Generate data, train every requested method, sweep the test points and time it all.

    Timings use ``time.perf_counter``. Data generation covers the training
    trajectories; ``hfm`` is the cost of re-simulating every test point,
    which is what the reduced models replace. Online time excludes one
    discarded warm-up prediction.
    """
    workers = thread_cap()
    report = BenchReport(cfg.to_dict(), _provenance(cfg))
    n_steps = max(cfg.horizon, *cfg.n_snaps)
    needs_ops = "pod" in cfg.methods

    if cfg.problem == "external":
        with stage("datagen"):
            t = time.perf_counter()
            train_full, refs = load_external(cfg)
            t_datagen = time.perf_counter() - t
        ops = [None] * len(train_full)
        t_hfm = None
        if needs_ops:
            raise ConfigError("[train:pod] external problems carry no HFM operator")
    else:
        sim = make_simulator(cfg)
        with stage("datagen"):
            t = time.perf_counter()
            out = _pmap(lambda p: sim(p, n_steps, needs_ops), cfg.train, workers)
            t_datagen = time.perf_counter() - t
        train_full = [s for s, _ in out]
        ops = [op for _, op in out]
        with stage("reference"):
            t = time.perf_counter()
            refs = [s for s, _ in _pmap(lambda p: sim(p, cfg.horizon, False), cfg.test, workers)]
            t_hfm = time.perf_counter() - t
    for r in refs:
        if r.n_snap != cfg.horizon:
            raise ConfigError(f"[reference] test trajectory has {r.n_snap} steps, horizon is {cfg.horizon}")
    targets = [r.parameter for r in refs]

    def initial(sets: Sequence[SnapshotSet], target: ParameterPoint, ref: SnapshotSet) -> np.ndarray:
        if cfg.initial == "reference":
            return ref.data[:, 0]
        return interpolate_entrywise([(s.parameter, s.data[:, 0]) for s in sets], target, cfg.interpolation)

    def sweep(method, n_snap, rank, predict, offline, storage):
        with stage(f"predict:{method}"):
            predict(targets[0], refs[0]) if targets else None  # warm-up, discarded
            t = time.perf_counter()
            preds = _pmap(lambda tr: predict(*tr), list(zip(targets, refs)), workers)
            online = time.perf_counter() - t
        for target, ref, (qoi, diag) in zip(targets, refs, preds):
            report.errors.append(_record(method, n_snap, rank, target, qoi, ref, include_initial, diag))
        report.timings.append(TimingRecord(method, n_snap, rank, t_datagen, offline, max(online, 1e-12), t_hfm, storage))

    for method in cfg.methods:
        for n_snap in cfg.n_snaps:
            sets = [s.head(n_snap) for s in train_full]
            if method == "kriging":
                if n_snap < cfg.horizon:
                    log.info("kriging skipped at n_snap=%d: it cannot forecast past its training window", n_snap)
                    continue
                with stage("train:kriging"):
                    t = time.perf_counter()
                    model = kriging_fit([s.head(cfg.horizon) for s in sets], cfg.kernel)
                    offline = time.perf_counter() - t

                def predict(target, ref, model=model):
                    return kriging_predict(model, target).qoi, {}

                sweep(method, n_snap, None, predict, offline, None)
                continue

            for policy in cfg.rank:
                if method == "dmd":
                    with stage("train:dmd"):
                        t = time.perf_counter()
                        lift = make_lift(cfg.lift, sets)
                        ens = train_ensemble(sets, lift, policy, max_workers=workers)
                        offline = time.perf_counter() - t

                    def predict(target, ref, ens=ens, sets=sets):
                        p = predict_qoi_trajectory(ens, target, initial(sets, target, ref), cfg.horizon, cfg.interpolation)
                        return p.qoi, p.diagnostics

                    sweep(method, n_snap, ens.rank, predict, offline, ens.storage_count())
                else:
                    with stage("train:pod"):
                        if any(op is None for op in ops):
                            raise ConfigError("POD needs exported HFM operators for every training point")
                        t = time.perf_counter()
                        r = resolve_shared_rank([thin_svd(s.data)[1] for s in sets], policy)
                        pod = pod_fit(sets, ops, r)
                        offline = time.perf_counter() - t

                    def predict(target, ref, pod=pod, sets=sets):
                        p = pod_predict(pod, target, initial(sets, target, ref), cfg.horizon, cfg.interpolation)
                        return p.qoi, p.diagnostics

                    sweep(method, n_snap, pod.rank, predict, offline, None)
    return report


# -- report emission --------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _param(p: Sequence[float]) -> str:
    return " ".join(repr(float(v)) for v in p)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _rank_key(r: int | None) -> int:
    return -1 if r is None else r


def emit_report(report: BenchReport, out_dir, formats: Sequence[str] = ("csv", "json")) -> list[Path]:
    """Write error and timing tables; returns the paths written.

    Error tables are deterministic for a fixed config. Timings go to their
    own files since they vary run to run.
    """
    bad = set(formats) - {"csv", "json"}
    if bad:
        raise ConfigError(f"unknown report formats {sorted(bad)}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create report directory {out}: {exc}") from exc
    written: list[Path] = []
    errs = sorted(report.errors, key=lambda e: (e.method, e.n_snap, _rank_key(e.rank), e.param))

    try:
        if "csv" in formats:
            rows = [
                (e.method, e.n_snap, e.rank, _param(e.param), k, e.t0 + k * e.dt, v, a, n)
                for e in errs
                for k, (v, a, n) in enumerate(zip(e.series, e.absolute, e.ref_norms))
            ]
            hdr = ("method", "n_snap", "rank", "param", "k", "t", "error", "absolute", "ref_norm")
            _write_csv(out / "errors_vs_time.csv", hdr, rows)
            rows = [(e.method, e.n_snap, e.rank, _param(e.param), e.total) for e in errs]
            _write_csv(out / "errors_vs_parameter.csv", ("method", "n_snap", "rank", "param", "total_error"), rows)
            by_rank = sorted(errs, key=lambda e: (e.method, e.n_snap, e.param, _rank_key(e.rank)))
            rows = [(e.method, e.n_snap, _param(e.param), e.rank, e.total) for e in by_rank]
            _write_csv(out / "errors_vs_rank.csv", ("method", "n_snap", "param", "rank", "total_error"), rows)
            by_ns = sorted(errs, key=lambda e: (e.method, _rank_key(e.rank), e.param, e.n_snap))
            rows = [(e.method, e.rank, _param(e.param), e.n_snap, e.total) for e in by_ns]
            _write_csv(out / "errors_vs_nsnap.csv", ("method", "rank", "param", "n_snap", "total_error"), rows)
            rows = [(t.method, t.n_snap, t.rank, t.storage_count) for t in report.timings]
            _write_csv(out / "storage.csv", ("method", "n_snap", "rank", "storage_count"), rows)
            rows = [
                (t.method, t.n_snap, t.rank, t.datagen, t.offline, t.online, t.hfm, t.online_speedup, t.total_speedup)
                for t in report.timings
            ]
            hdr = ("method", "n_snap", "rank", "datagen_s", "offline_s", "online_s", "hfm_s", "online_speedup", "total_speedup")
            _write_csv(out / "timing.csv", hdr, rows)
            written += [out / f for f in ("errors_vs_time.csv", "errors_vs_parameter.csv", "errors_vs_rank.csv",
                                          "errors_vs_nsnap.csv", "storage.csv", "timing.csv")]
        if "json" in formats:
            (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1))
            (out / "timing.json").write_text(json.dumps([t.to_dict() for t in report.timings], indent=1))
            written += [out / "report.json", out / "timing.json"]
    except OSError as exc:
        raise FormatError(f"cannot write report to {out}: {exc}") from exc
    return written


def load_report(path) -> BenchReport:
    return BenchReport.from_dict(json.loads(Path(path).read_text()))
