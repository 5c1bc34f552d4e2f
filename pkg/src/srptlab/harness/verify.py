"""Fixed-budget run of every exact pathwise invariant, collected as a ledger."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..dists import (Lomax, ParetoTypeI, heavy_traffic_arrival_rate, poisson_arrivals,
                     scale_parameter)
from ..scalemeas import (MeasureSnapshot, integration_by_parts, qlxy_violations,
                         sandwich_violations)
from ..skorohod import SampledPath, pushing_term, reflect
from ..srpt_core import (ArrivalStream, coupled_truncated_runs, draw_stream, intertwined_pair_sim,
                         run_srpt)

LEDGER_VERSION = 1


@dataclass(frozen=True)
class Budget:
    r: float = 25.0
    comp_seeds: int = 5
    levels: tuple = (0.25, 0.5, 1.0, 2.0, math.inf)
    intqlc_seeds: int = 10
    parts_cases: int = 200
    qlxy_seeds: int = 3
    skorohod_pairs: int = 200
    horizon_T: float = 1.0


def _row(family: str, check: str, ok: bool, **detail) -> dict:
    return {"family": family, "check": check, "status": "pass" if ok else "fail",
            "detail": {k: detail[k] for k in sorted(detail)}}


def _pareto_setup(b: Budget):
    dist = ParetoTypeI(1.0, 2.0)
    c_r = scale_parameter(dist, b.r)
    lam = heavy_traffic_arrival_rate(dist, b.r, 0.0)
    return dist, c_r, lam


def trivial_family() -> list[dict]:
    rows = []
    empty = run_srpt([], ArrivalStream.empty(), 10.0)
    rows.append(_row("trivial", "empty_run_has_no_events", len(empty) == 0, n_events=len(empty)))
    v = sandwich_violations(empty, empty, 1.0, 25.0, 1.0)
    rows.append(_row("trivial", "empty_sandwich", all(v[k] == 0 for k in
                                                      ("work_lower", "work_upper", "mass_lower", "mass_upper"))))
    lhs, rhs = integration_by_parts(MeasureSnapshot(0.0, np.zeros(0), np.zeros(0), 1.0, 1.0),
                                    lambda x: x * x, 0.5, 2.0)
    rows.append(_row("trivial", "empty_snapshot_parts", lhs == 0 and rhs == 0))
    z = reflect(SampledPath([0.0, 1.0], [0.0, 0.0]))
    rows.append(_row("trivial", "reflect_zero_path", bool(np.all(z.values == 0))))
    return rows


def prop_comp_family(seed: int, b: Budget, perturb: bool = False) -> list[dict]:
    dist, c_r, lam = _pareto_setup(b)
    horizon = b.r * b.r * b.horizon_T
    worst = {"work_lower": 0.0, "work_upper": 0.0, "mass_lower": 0.0, "mass_upper": 0.0}
    n_times = 0
    shift = c_r / b.r if perturb else 0.0
    for s in range(b.comp_seeds):
        ss = np.random.SeedSequence([seed, 10, s])
        stream = draw_stream(poisson_arrivals(), dist, lam, horizon, ss)
        finite = [a for a in b.levels if not math.isinf(a)]
        runs = coupled_truncated_runs([], stream, horizon, [a * c_r for a in finite] + [math.inf])
        full = runs[-1]
        for a, run in zip(b.levels, runs):
            v = sandwich_violations(full, run, a, b.r, c_r, perturb=shift)
            n_times += v.pop("n_times")
            for k in worst:
                worst[k] = max(worst[k], v[k])
    ok = all(x == 0 for x in worst.values())
    name = "sandwich_perturbed" if perturb else "sandwich"
    return [_row("prop_comp", name, ok, n_times=n_times, **worst)]


def intertwined_start(rng, scale: float) -> tuple[list, list]:
    """Random starts with system 2 intertwined in system 1 and one job more.

    With distinct sorted sizes ``s_1 < ... < s_n`` for system 2, system 1 gets
    ``s_2 .. s_n``; its partial sums then sit strictly between those of
    system 2. A shared prefix of smaller sizes is put in front of both.
    """
    n2 = int(rng.integers(1, 6))
    s = np.sort(rng.uniform(0.5, 5.0, n2)) * scale
    shared = list(np.sort(rng.uniform(0.0, 0.5, int(rng.integers(0, 3)))) * scale)
    return shared + list(s), shared + list(s[1:])


def intqlc_family(seed: int, b: Budget) -> list[dict]:
    dist, c_r, lam = _pareto_setup(b)
    horizon = b.r * b.r * b.horizon_T
    bad, n_times = 0, 0
    for s in range(b.intqlc_seeds):
        rng = np.random.default_rng([seed, 20, s])
        v2, v1 = intertwined_start(rng, c_r)
        ss = np.random.SeedSequence([seed, 21, s])
        pair = intertwined_pair_sim(poisson_arrivals(), dist, lam, v1, v2, horizon, ss)
        d = pair.q2 - pair.q1
        bad += int(np.sum((d < 0) | (d > 1)))
        n_times += len(pair.times)
    return [_row("intqlc", "queue_lengths_within_one", bad == 0, violations=bad, n_times=n_times)]


def parts_family(seed: int, b: Budget) -> list[dict]:
    rng = np.random.default_rng([seed, 30])
    worst = 0.0
    for _ in range(b.parts_cases):
        n = int(rng.integers(0, 30))
        snap = MeasureSnapshot(0.0, np.sort(rng.uniform(0.0, 5.0, n)), np.full(n, 0.1), 1.0, 1.0)
        coef = rng.normal(size=int(rng.integers(1, 5)))
        delta = float(rng.uniform(0.01, 2.0))
        M = delta + float(rng.uniform(0.1, 4.0))
        lhs, rhs = integration_by_parts(snap, np.polynomial.Polynomial(coef), delta, M)
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    return [_row("parts", "summation_identity", worst <= 1e-9, worst_rel_error=worst)]


def qlxy_family(seed: int, b: Budget) -> list[dict]:
    dist, c_r, lam = _pareto_setup(b)
    horizon = b.r * b.r * b.horizon_T
    worst_lo = worst_hi = 0.0
    pairs = [(0.25, 0.5), (0.5, 1.0), (1.0, 2.0), (0.5, math.inf)]
    for s in range(b.qlxy_seeds):
        ss = np.random.SeedSequence([seed, 40, s])
        stream = draw_stream(poisson_arrivals(), dist, lam, horizon, ss)
        for x, y in pairs:
            rx, ry = coupled_truncated_runs([], stream, horizon, [x * c_r, y * c_r])
            v = qlxy_violations(rx, ry, x, y, b.r, c_r)
            worst_lo, worst_hi = max(worst_lo, v["lower"]), max(worst_hi, v["upper"])
    return [_row("qlxy", "count_gap_bound", worst_lo == 0 and worst_hi == 0,
                 lower=worst_lo, upper=worst_hi)]


def _random_walk(rng, n: int) -> SampledPath:
    t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.01, 0.1, n - 1))])
    v = abs(rng.normal()) + np.concatenate([[0.0], np.cumsum(rng.normal(size=n - 1))])
    return SampledPath(t, v)


def skorohod_family(seed: int, b: Budget) -> list[dict]:
    rng = np.random.default_rng([seed, 50])
    nonneg = compl = mono = True
    lip = 0.0
    for _ in range(b.skorohod_pairs):
        f1 = _random_walk(rng, 60)
        w1 = reflect(f1)
        nonneg &= bool(np.all(w1.values >= 0))
        push = pushing_term(SampledPath(w1.times, f1(w1.times)))
        up = np.diff(push) > 0
        compl &= bool(np.all(w1.values[1:][up] <= 1e-12 * (1.0 + np.max(np.abs(f1.values)))))
        noise = 0.3 * rng.normal(size=60)
        noise[0] = abs(noise[0])
        f2 = SampledPath(f1.times, f1.values + noise)
        w2 = reflect(f2)
        grid = np.union1d(w1.times, w2.times)
        d_in = float(np.max(np.abs(f1(grid) - f2(grid))))
        d_out = float(np.max(np.abs(w1(grid) - w2(grid))))
        if d_in > 0:
            lip = max(lip, d_out / d_in)
        g = SampledPath(f1.times, 0.1 * np.cumsum(np.abs(rng.normal(size=60))))
        w3 = reflect(f1 + g)
        mono &= bool(np.all(w1(f1.times) <= w3(f1.times)))
    return [_row("skorohod", "nonnegative", nonneg),
            _row("skorohod", "complementarity", compl),
            _row("skorohod", "lipschitz_factor_le_2", lip <= 2.0, factor=lip),
            _row("skorohod", "monotone", mono)]


def karamata_family() -> list[dict]:
    dist = ParetoTypeI(1.0, 2.0)
    worst_ratio = 0.0
    worst_cr = 0.0
    for r in (2.0, 6.0, 25.0, 100.0, 1e4):
        c = scale_parameter(dist, r)
        worst_cr = max(worst_cr, abs(c - (dist.c_p * r) ** 0.5) / c)
        for a in (0.5, 1.0, 2.0, 8.0):
            if a * c < dist.m:
                continue
            ratio = dist.truncated_first_moment(a * c) / dist.truncated_first_moment(c)
            worst_ratio = max(worst_ratio, abs(ratio - a ** -dist.p))
    lom = Lomax(1.0, 3.0)
    worst_rt = max(abs(lom.S(scale_parameter(lom, r)) - r) / r for r in (2.0, 10.0, 100.0, 1e4))
    return [_row("karamata", "ratio_exact", worst_ratio <= 1e-12, worst=worst_ratio),
            _row("karamata", "pareto_closed_form", worst_cr <= 1e-12, worst=worst_cr),
            _row("karamata", "lomax_round_trip", worst_rt <= 1e-9, worst=worst_rt)]


def verify_suite(seed: int = 0, budget: Budget | None = None, inject_violation: bool = False) -> dict:
    b = budget or Budget()
    rows = trivial_family()
    rows += prop_comp_family(seed, b, perturb=inject_violation)
    rows += intqlc_family(seed, b)
    rows += parts_family(seed, b)
    rows += qlxy_family(seed, b)
    rows += skorohod_family(seed, b)
    rows += karamata_family()
    return {"ledger_version": LEDGER_VERSION, "seed": seed, "inject_violation": inject_violation,
            "rows": rows, "all_pass": all(r["status"] == "pass" for r in rows)}


def ledger_json(ledger: dict) -> str:
    return json.dumps(ledger, indent=2, sort_keys=True) + "\n"
