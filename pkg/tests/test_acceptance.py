"""Acceptance gate: one PASS/FAIL line per criterion, then the assertion."""

import hashlib
import math
import time

import numpy as np
import pytest

from srptlab.harness.cli import main
from srptlab.harness.config import ExperimentConfig
from srptlab.harness.stats import empirical_cdf_and_ks, reflected_bm_marginal_cdf
from srptlab.harness.study import limit_spec, run_convergence_study
from srptlab.harness.verify import (Budget, intqlc_family, karamata_family, parts_family,
                                    prop_comp_family, skorohod_family)
from srptlab.limitfield import LimitSpec, collapse_gap, sample_field, sample_marginal, tail_ratios
from srptlab.skorohod import (SampledPath, drift_perturbation_derivative, last_zero_derivative,
                              reflect)


@pytest.fixture
def verdict(capsys):
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


def rows_ok(rows):
    return all(r["status"] == "pass" for r in rows)


def test_criterion_01_parts_identity(verdict):
    t0 = time.perf_counter()
    rows = parts_family(0, Budget(parts_cases=1000))
    dt = time.perf_counter() - t0
    worst = rows[0]["detail"]["worst_rel_error"]
    verdict(1, rows_ok(rows) and dt < 5.0, f"1000 cases, worst rel error {worst:.2e}, {dt:.2f} s")


def test_criterion_02_sandwiches(verdict):
    t0 = time.perf_counter()
    rows = []
    for r in (25.0, 100.0):
        rows += prop_comp_family(0, Budget(r=r, comp_seeds=100))
    dt = time.perf_counter() - t0
    n = sum(r["detail"]["n_times"] for r in rows)
    verdict(2, rows_ok(rows) and dt < 120.0, f"r in {{25,100}}, 100 seeds, {n} checks, {dt:.1f} s")


def test_criterion_03_intertwined_queue_lengths(verdict):
    rows = intqlc_family(0, Budget(intqlc_seeds=100))
    d = rows[0]["detail"]
    verdict(3, rows_ok(rows), f"100 seeds, {d['n_times']} event times, {d['violations']} violations")


def brownian_grid(seed, dt=1e-3):
    rng = np.random.default_rng([77, seed])
    n = int(round(1.0 / dt))
    t = np.arange(n + 1) * dt
    return SampledPath(t, np.concatenate([[0.0], np.cumsum(rng.normal(0.0, math.sqrt(dt), n))]))


def test_criterion_04_skorohod(verdict):
    rows = skorohod_family(0, Budget(skorohod_pairs=1000))
    eps, dt = 1e-3, 1e-3
    worst, used = 0.0, 0
    for s in range(100):
        f = brownian_grid(s, dt)
        w = reflect(f)
        if abs(float(w(1.0))) <= 0.01:
            continue
        used += 1
        err = abs(drift_perturbation_derivative(f, 1.0, eps) - last_zero_derivative(w, 1.0))
        worst = max(worst, err)
    ok = rows_ok(rows) and worst <= 10 * eps + dt
    lip = [r for r in rows if r["check"] == "lipschitz_factor_le_2"][0]["detail"]["factor"]
    verdict(4, ok, f"Lipschitz factor {lip:.3f} on 1000 pairs; derivative worst error {worst:.2e} "
                   f"over {used} paths (bound {10 * eps + dt:.1e})")


def test_criterion_05_limit_marginal(verdict):
    t0 = time.perf_counter()
    spec = limit_spec(ExperimentConfig(arrivals={"kind": "exponential", "rate": 1.0}))
    assert spec.sigma ** 2 == pytest.approx(2.0)
    mu = float(spec.drift(2.0))
    x = sample_marginal(spec, 2.0, 1.0, 10_000, dt=1e-3, seed=0)
    ks = empirical_cdf_and_ks(x, lambda w: reflected_bm_marginal_cdf(w, 1.0, mu, spec.sigma))
    dt = time.perf_counter() - t0
    verdict(5, ks <= 0.05 and dt < 60.0, f"KS {ks:.4f} at a=2, t=1, {dt:.1f} s")


def test_criterion_06_prelimit_trend(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(r_list=[25.0, 50.0, 100.0], N=500, levels=[math.inf], field_draws=0,
                           out_dir=str(tmp_path))
    rep = run_convergence_study(cfg)
    ks = [rep.select(r=r, quantity="W")[0]["ks"] for r in cfg.r_list]
    dt = time.perf_counter() - t0
    rises = [b - a for a, b in zip(ks, ks[1:]) if b > a]
    ok = len(rises) <= 1 and all(x <= 0.02 for x in rises) and ks[-1] <= 0.15 and dt <= 900
    verdict(6, ok, "KS at r=25,50,100: " + ", ".join(f"{k:.4f}" for k in ks) + f"; {dt:.0f} s")


def test_criterion_07_tail_ratio_trend(verdict):
    spec = LimitSpec(0.0, 2.0 / 3.0, math.sqrt(2.0), 2.0)
    levels = (4.0, 8.0, 16.0)
    err = {a: ([], []) for a in levels}
    for k in range(200):
        fld = sample_field(spec, 1.0, 1e-3, seed=[7, k])
        for a in levels:
            work, mass, wp = tail_ratios(fld, 1.0, a)
            if wp > 0:
                err[a][0].append(abs(work - wp) / wp)
                err[a][1].append(abs(mass - wp) / wp)
    med = np.array([[np.median(err[a][0]), np.median(err[a][1])] for a in levels])
    decreasing = bool(np.all(np.diff(med, axis=0) < 0))
    small = bool(np.all(med[-1] <= 0.15))
    detail = "; ".join(f"a={a:g}: work {m[0]:.2e}, mass {m[1]:.2e}" for a, m in zip(levels, med))
    verdict(7, decreasing and small, f"median rel errors {detail}; decreasing={decreasing}, "
                                     f"<=0.15 at a=16: {small}")


def test_criterion_08_collapse_trend(verdict):
    p_list = [2, 4, 8, 16]
    gaps = np.array([list(collapse_gap(p_list, seed=[0, s]).values()) for s in range(100)])
    med = np.median(gaps, axis=0)
    verdict(8, bool(np.all(np.diff(med) < 0)),
            "median gaps " + ", ".join(f"p={p}: {m:.4f}" for p, m in zip(p_list, med)))


def test_criterion_09_karamata(verdict):
    rows = karamata_family()
    detail = ", ".join(f"{r['check']} {r['detail']['worst']:.1e}" for r in rows)
    verdict(9, rows_ok(rows), detail)


def test_criterion_10_determinism(verdict, tmp_path):
    codes = [main(["verify", "--seed", "0", "--out", str(tmp_path / d)]) for d in ("a", "b")]
    h = [hashlib.sha256((tmp_path / d / "ledger.json").read_bytes()).hexdigest() for d in ("a", "b")]
    verdict(10, codes == [0, 0] and h[0] == h[1], f"ledger sha256 {h[0][:16]} twice, exit codes {codes}")
