"""Command-line entry point: ``promkit {train,predict,bench,compare}``.

Exit codes: 0 success, 2 configuration or format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dmd import train_ensemble
from .errors import ConfigError, FormatError, NumericalError
from .harness import ExperimentConfig, emit_report, load_external, make_lift, make_simulator, run_benchmark, thread_cap
from .io import load_bundle, read_snapshot_file, save_bundle, write_snapshot_file
from .manifold import InterpolationConfig
from .reconstruct import predict_qoi_trajectory

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
INTERP_FILE = "interpolation.json"


def _parse_param(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse parameter {text!r}") from exc


def cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if cfg.problem == "external":
        sets, _ = load_external(cfg)
    else:
        sim = make_simulator(cfg)
        n = max(cfg.horizon, *cfg.n_snaps)
        sets = [sim(p, n, False)[0] for p in cfg.train]
    sets = [s.head(max(cfg.n_snaps)) for s in sets]
    lift = make_lift(cfg.lift, sets)
    ens = train_ensemble(sets, lift, cfg.rank[0], max_workers=thread_cap())
    out = Path(args.out)
    save_bundle(out, ens)
    (out / INTERP_FILE).write_text(json.dumps(cfg.interpolation.to_dict(), indent=2))
    if args.export_data:
        data_dir = Path(args.export_data)
        data_dir.mkdir(parents=True, exist_ok=True)
        for i, s in enumerate(sets):
            write_snapshot_file(data_dir / f"train_{i}.pmk", s)
    print(f"trained {len(ens)} local ROMs, rank {ens.rank}, {ens.storage_count()} stored numbers -> {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    ens = load_bundle(args.model)
    interp_path = Path(args.model) / INTERP_FILE
    cfg = InterpolationConfig.from_dict(json.loads(interp_path.read_text())) if interp_path.exists() else None
    init = read_snapshot_file(args.init)
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    pred = predict_qoi_trajectory(ens, _parse_param(args.param), init.data[:, 0], args.steps, cfg)
    snap = pred.to_snapshot(init.t0, init.dt, init.qoi_names)
    write_snapshot_file(args.out, snap)
    diag_path = Path(str(args.out) + ".diagnostics.json")
    diag_path.write_text(json.dumps(pred.diagnostics, indent=2))
    print(f"wrote {args.out} and {diag_path}")
    return EXIT_OK


def _summary(report) -> str:
    lines = [f"{'method':8s} {'n_snap':>6s} {'rank':>5s} {'param':>14s} {'E':>12s}"]
    for e in report.errors:
        p = " ".join(f"{v:.6g}" for v in e.param)
        rank = "-" if e.rank is None else str(e.rank)
        lines.append(f"{e.method:8s} {e.n_snap:6d} {rank:>5s} {p:>14s} {e.total:12.4e}")
    for t in report.timings:
        if t.hfm is not None:
            lines.append(
                f"timing {t.method} n_snap={t.n_snap} rank={t.rank}: "
                f"online speedup {t.online_speedup:.1f}, total speedup {t.total_speedup:.1f}"
            )
    return "\n".join(lines)


def cmd_bench(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    report = run_benchmark(cfg, include_initial=args.include_initial)
    out = args.out or cfg.output_dir
    if out is None:
        raise ConfigError("no output directory: pass --out or set output_dir in the config")
    for path in emit_report(report, out):
        print(path)
    return EXIT_OK


def cmd_compare(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    raw["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    cfg = ExperimentConfig.from_dict(raw)
    report = run_benchmark(cfg)
    print(_summary(report))
    if args.out:
        emit_report(report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="promkit", description="Parametric DMD reduced-order models")
    ap.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a DMD ensemble and save it as a bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="bundle directory")
    p.add_argument("--export-data", help="also write the training snapshots here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict a QoI trajectory at a new parameter")
    p.add_argument("--model", required=True, help="bundle directory")
    p.add_argument("--param", required=True, help="comma-separated parameter values")
    p.add_argument("--init", required=True, help="snapshot file; its first column is the initial QoI")
    p.add_argument("--steps", required=True, type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="run a benchmark and write CSV/JSON reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--include-initial", action="store_true", help="sum errors from k = 0")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="print total errors of several methods side by side")
    p.add_argument("--methods", default="dmd,pod,kriging")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
