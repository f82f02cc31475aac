"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary.

Tolerances and thresholds are the frozen acceptance values; nothing here is
tuned to make a run pass.
"""

import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from promkit.data import ObservableLift, ParameterPoint, SnapshotSet
from promkit.dmd import fit_local_rom, train_ensemble
from promkit.harness import ExperimentConfig, make_lift, make_simulator, run_benchmark
from promkit.manifold import (
    grassmann_exp,
    grassmann_log,
    interpolate_entrywise,
    InterpolationConfig,
    matrix_exp_map,
    matrix_log_map,
    principal_angles,
    procrustes_align,
)
from promkit.metrics import total_relative_l2
from promkit.reconstruct import iterate_observables, local_reconstruction, reconstruct_observables

from conftest import orthonormal, stable_matrix
from helpers import linear_trajectory

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def quiet_benchmark(cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_benchmark(cfg)


def spectra_match(a, b):
    """Largest distance under the best one-to-one eigenvalue pairing."""
    la, lb = np.linalg.eigvals(a), np.linalg.eigvals(b)
    d = np.abs(la[:, None] - lb[None, :])
    i, j = linear_sum_assignment(d)
    return float(d[i, j].max())


# -- 1 -------------------------------------------------------------------------------


def test_criterion_1_exact_linear_recovery(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(1)
    n, steps = 40, 100
    A = stable_matrix(rng, n, 0.95)
    b = rng.standard_normal(n)
    truth = linear_trajectory(A, b, rng.standard_normal(n), steps, ParameterPoint(0.0))
    rom = fit_local_rom(truth, ObservableLift.affine(n), n + 1)
    pred = local_reconstruction(rom, truth.data[:, 0], steps)
    err = total_relative_l2(pred.qoi, truth.data)
    elapsed = time.perf_counter() - t
    ok = err < 1e-8 and elapsed < 5
    verdict(1, ok, elapsed, f"E = {err:.3e} (need < 1e-8, r = {rom.rank})")
    assert ok


# -- 2 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_2_advection_diffusion_trends(verdict):
    t = time.perf_counter()
    report = quiet_benchmark(ExperimentConfig.load(CONFIGS / "adv_diff.json"))
    elapsed = time.perf_counter() - t

    def E(method, n_snap, rank):
        (rec,) = report.select(method, n_snap, rank)
        return rec.total

    dmd = [E("dmd", n, 10) for n in (25, 50, 100)]
    pod = [E("pod", n, 10) for n in (25, 50, 100)]
    a = all(x > y for x, y in zip(dmd, dmd[1:])) and all(x > y for x, y in zip(pod, pod[1:]))
    b = dmd[0] >= pod[0] and dmd[1] >= pod[1]
    c = dmd[2] <= 1.5 * pod[2]
    ranks = (2, 4, 6, 8, 10, 12)
    d_parts = {}
    for method in ("dmd", "pod"):
        curve = [E(method, 100, r) for r in ranks]
        jitter = all(y <= 1.05 * x for x, y in zip(curve, curve[1:]))
        saturated = abs(curve[-1] - curve[-2]) / curve[-2] < 0.10
        d_parts[method] = (jitter and saturated, curve)
    d = all(v[0] for v in d_parts.values())
    ok = a and b and c and d and elapsed < 120
    fmt = lambda xs: "/".join(f"{x:.3g}" for x in xs)
    detail = (
        f"(a) {'ok' if a else 'no'}: E_DMD {fmt(dmd)}, E_POD {fmt(pod)} at N_snap 25/50/100, r = 10; "
        f"(b) {'ok' if b else 'no'}; (c) {'ok' if c else 'no'}: {dmd[2]:.3g} vs 1.5 x {pod[2]:.3g}; "
        f"(d) {'ok' if d else 'no'}: E(r) DMD {fmt(d_parts['dmd'][1])}, POD {fmt(d_parts['pod'][1])}"
    )
    verdict(2, ok, elapsed, detail)
    assert ok


# -- 3 -------------------------------------------------------------------------------


def local_training_errors(cfg):
    sim = make_simulator(cfg)
    sets = [sim(p, cfg.horizon, False)[0] for p in cfg.train]
    ens = train_ensemble(sets, make_lift(cfg.lift, sets), cfg.rank[0])
    return {
        s.parameter.values: total_relative_l2(local_reconstruction(rom, s.data[:, 0], cfg.horizon).qoi, s.data)
        for s, rom in zip(sets, ens.roms)
    }


@pytest.mark.slow
def test_criterion_3_masked_diffusion_error_peak(verdict):
    t = time.perf_counter()
    results, ok = [], True
    for name in ("masked_state", "masked_flux", "masked_heat_rate"):
        cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
        report = quiet_benchmark(cfg)
        local = local_training_errors(cfg)
        totals = {e.param: e.total for e in report.select("dmd")}
        ends = [(1.0,), (2.0,)]
        end_ok = all(abs(totals[p] - local[p]) <= 1e-6 for p in ends)
        interior = max(v for p, v in totals.items() if p not in ends)
        peak_ok = all(interior > totals[p] for p in ends)
        ok &= end_ok and peak_ok
        results.append(
            f"{cfg.qoi}: ends {totals[ends[0]]:.2e}/{totals[ends[1]]:.2e} "
            f"(local {local[ends[0]]:.2e}/{local[ends[1]]:.2e}), interior max {interior:.2e}"
        )
    elapsed = time.perf_counter() - t
    ok &= elapsed < 180
    verdict(3, ok, elapsed, "; ".join(results))
    assert ok


# -- 4 and 5 share one Burgers run ---------------------------------------------------------


@pytest.fixture(scope="module")
def burgers_run():
    t = time.perf_counter()
    report = quiet_benchmark(ExperimentConfig.load(CONFIGS / "burgers.json"))
    return report, time.perf_counter() - t


@pytest.mark.slow
def test_criterion_4_dmd_beats_kriging(verdict, burgers_run):
    report, elapsed = burgers_run
    dmd = {e.param: e.total for e in report.select("dmd")}
    kr = {e.param: e.total for e in report.select("kriging")}
    wins = sum(dmd[p] <= kr[p] for p in dmd)
    ok = len(dmd) == 49 and wins >= 0.8 * len(dmd) and elapsed < 180
    verdict(4, ok, elapsed, f"DMD <= Kriging at {wins}/{len(dmd)} targets (need >= 80%)")
    assert ok


@pytest.mark.slow
def test_criterion_5_speedups(verdict, burgers_run):
    report, elapsed = burgers_run
    (tr,) = [t for t in report.timings if t.method == "dmd"]
    ok = tr.online_speedup >= 10 and tr.total_speedup >= 2
    verdict(
        5,
        ok,
        elapsed,
        f"online speedup {tr.online_speedup:.1f} (need >= 10), total speedup {tr.total_speedup:.1f} (need >= 2); "
        f"hfm {tr.hfm:.2f} s, datagen {tr.datagen:.2f} s, offline {tr.offline:.3f} s, online {tr.online:.3f} s",
    )
    assert ok


# -- 6 -------------------------------------------------------------------------------


def test_criterion_6_manifold_invariants(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = dict(angle=0.0, ortho=0.0, spectrum=0.0, euclidean=0.0, gl_nonsingular=0.0, spd=0.0)
    passthrough = True
    for _ in range(200):
        n, r = int(rng.integers(4, 30)), int(rng.integers(1, 6))
        r = min(r, n - 1)
        V0 = orthonormal(rng, n, r)
        Vi, _ = np.linalg.qr(V0 + 0.5 * rng.standard_normal((n, r)))
        out = grassmann_exp(V0, grassmann_log(V0, Vi))
        worst["angle"] = max(worst["angle"], float(np.max(principal_angles(out, Vi))))
        G = rng.standard_normal((n, r))
        G -= V0 @ (V0.T @ G)
        E = grassmann_exp(V0, G)
        worst["ortho"] = max(worst["ortho"], float(np.max(np.abs(E.T @ E - np.eye(r)))))

        bases = [V0, Vi, np.linalg.qr(V0 + 0.3 * rng.standard_normal((n, r)))[0]]
        gram = np.array([[a.T @ b for b in bases] for a in bases])
        ops = [rng.standard_normal((r, r)) for _ in bases]
        _, aligned = procrustes_align(ops, gram, int(rng.integers(0, 3)))
        for K, Kt in zip(ops, aligned):
            worst["spectrum"] = max(worst["spectrum"], spectra_match(K, Kt) / max(1.0, np.max(np.abs(np.linalg.eigvals(K)))))

        m = int(rng.integers(2, 7))
        for manifold in ("euclidean", "gl_nonsingular", "spd"):
            if manifold == "spd":
                a, c = rng.standard_normal((2, m, m))
                X0, Xi = a @ a.T + m * np.eye(m), c @ c.T + m * np.eye(m)
            else:
                X0 = np.eye(m) + 0.3 * rng.standard_normal((m, m))
                Xi = (np.eye(m) + 0.25 * rng.standard_normal((m, m)) / np.sqrt(m)) @ X0
            back = matrix_exp_map(X0, matrix_log_map(X0, Xi, manifold), manifold)
            worst[manifold] = max(worst[manifold], float(np.linalg.norm(back - Xi) / np.linalg.norm(Xi)))

        k = int(rng.integers(2, 6))
        xs = np.sort(rng.uniform(0, 10, k))
        while np.min(np.diff(xs)) < 1e-3:
            xs = np.sort(rng.uniform(0, 10, k))
        vals = rng.standard_normal((k, 3, 2))
        pts = [(ParameterPoint(x), v) for x, v in zip(xs, vals)]
        for scheme in ("piecewise_linear", "lagrange", "cubic_spline"):
            cfg = InterpolationConfig(scheme=scheme)
            for x, v in zip(xs, vals):
                passthrough &= bool(np.array_equal(interpolate_entrywise(pts, ParameterPoint(x), cfg), v))
    elapsed = time.perf_counter() - t
    ok = (
        worst["angle"] < 1e-8
        and worst["ortho"] < 1e-10
        and worst["spectrum"] < 1e-10
        and max(worst["euclidean"], worst["gl_nonsingular"], worst["spd"]) < 1e-9
        and passthrough
        and elapsed < 30
    )
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", pass-through exact: {passthrough}"
    verdict(6, ok, elapsed, "worst over 200 cases: " + detail)
    assert ok


# -- 7 -------------------------------------------------------------------------------


def test_criterion_7_route_agreement(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    routes = set()
    for _ in range(100):
        r = int(rng.integers(1, 12))
        n = int(rng.integers(r, 60))
        K = stable_matrix(rng, r, rng.uniform(0.3, 1.05))
        V = orthonormal(rng, n, r)
        y0 = rng.standard_normal(n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            _, Y, diag = reconstruct_observables(K, V, y0, 50)
        routes.add(diag["route"])
        ref = iterate_observables(K, V, y0, 50)
        worst = max(worst, float(np.max(np.abs(Y - ref)) / np.max(np.abs(ref))))
    elapsed = time.perf_counter() - t
    ok = worst < 1e-9 and elapsed < 10
    verdict(7, ok, elapsed, f"max relative deviation {worst:.2e} (need < 1e-9), routes used: {sorted(routes)}")
    assert ok


# -- 8 -------------------------------------------------------------------------------


def test_criterion_8_storage_formula(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(8)
    checks = []
    for n, r, m in ((50, 5, 2), (120, 8, 3), (30, 12, 5)):
        sets = [SnapshotSet(rng.standard_normal((n, 40)), 0, 1, ParameterPoint(float(i))) for i in range(m)]
        ens = train_ensemble(sets, ObservableLift.identity(n), r)
        expected = (n * r + r * r + r * r * (m + 1) / 2) * m
        checks.append((n, r, m, ens.storage_count(), expected))
    elapsed = time.perf_counter() - t
    ok = all(got == exp for *_, got, exp in checks) and elapsed < 1
    detail = "; ".join(f"(N={n}, r={r}, N_MC={m}) {got:g} vs {exp:g}" for n, r, m, got, exp in checks)
    verdict(8, ok, elapsed, detail)
    assert ok
