"""Shared helpers for the experiment scripts."""

from __future__ import annotations

import argparse
import warnings
from pathlib import Path

from promkit.harness import ExperimentConfig, emit_report, run_benchmark

ROOT = Path(__file__).resolve().parents[1]


def run(config_name: str, out_root: Path):
    cfg = ExperimentConfig.load(ROOT / "configs" / f"{config_name}.json")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = run_benchmark(cfg)
    emit_report(report, out_root / config_name)
    return report


def parser(description: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--out", type=Path, default=ROOT / "results", help="report root directory")
    return ap
