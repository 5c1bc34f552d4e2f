"""Monte Carlo comparison of prelimit SRPT marginals with the limit field."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dists import diffusion_variance, heavy_traffic_arrival_rate, scale_parameter
from ..limitfield import (DEFAULT_LEVELS, LimitInitialProfile, LimitSpec, exact_marginal_draws,
                          mass_below, sample_field)
from ..scalemeas import scaled_state, workload_and_mass
from ..srpt_core import generate_initial, iter_states, simulate_srpt
from .config import SCHEMA_VERSION, ExperimentConfig
from .stats import empirical_cdf_and_ks

log = logging.getLogger(__name__)

REPORT_COLUMNS = ["r", "t", "level", "quantity", "n", "mean", "std", "limit_mean", "ks", "pass"]


def fmt(x) -> str:
    """17 significant digits; integers and labels pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isinf(x):
            return "inf"
        return format(float(x), ".17g")
    return "" if x is None else str(x)


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def key(self, row) -> tuple:
        return (row["r"], row["t"], row["level"], row["quantity"])

    def add(self, row: dict) -> None:
        if row.get("ks") is not None and not 0.0 <= row["ks"] <= 1.0:
            raise ValueError("KS distance outside [0, 1]")
        k = self.key(row)
        if any(self.key(x) == k for x in self.rows):
            raise ValueError(f"duplicate report row {k}")
        self.rows.append(row)

    def select(self, **match) -> list[dict]:
        return [row for row in self.rows if all(row[k] == v for k, v in match.items())]

    @property
    def all_pass(self) -> bool:
        return bool(self.summary.get("all_pass", False))

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            csv_path, json_path = out / "report.csv", out / "summary.json"
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(REPORT_COLUMNS)
                for row in self.rows:
                    w.writerow([fmt(row.get(c)) for c in REPORT_COLUMNS])
            json_path.write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write report under {out}: {exc}") from exc
        return csv_path, json_path


def limit_profile(cfg: ExperimentConfig) -> LimitInitialProfile:
    init = cfg.initial_spec()
    if init.kind == "empty" or init.q_star == 0:
        return LimitInitialProfile()
    return LimitInitialProfile("scaled", q_star=init.q_star, size_law=init.size_law)


def limit_spec(cfg: ExperimentConfig) -> LimitSpec:
    dist = cfg.service_dist()
    lam = 1.0 / dist.mean
    sigma_A = cfg.arrival_spec().at_rate(lam).sigma_A
    p = getattr(dist, "p", 2.0)
    return LimitSpec(cfg.kappa, lam, math.sqrt(diffusion_variance(dist, sigma_A)), p, limit_profile(cfg))


def _replicate(args) -> np.ndarray:
    """Scaled (W_a, Z_a) at every snapshot and level for one replication."""
    cfg_dict, r, r_index, rep = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    dist = cfg.service_dist()
    c_r = scale_parameter(dist, r)
    lam_r = heavy_traffic_arrival_rate(dist, r, cfg.kappa)
    ss = np.random.SeedSequence([cfg.master_seed, r_index, rep])
    init_seed, run_seed = ss.spawn(2)
    initial = generate_initial(cfg.initial_spec(), r, c_r, init_seed)
    traj = simulate_srpt(cfg.arrival_spec(), dist, lam_r, initial, r * r * cfg.T, run_seed)
    out = np.zeros((len(cfg.snapshot_times), len(cfg.levels), 2))
    for i, state in enumerate(iter_states(traj, [r * r * t for t in cfg.snapshot_times])):
        snap = scaled_state(state, r, c_r)
        for j, a in enumerate(cfg.levels):
            out[i, j] = workload_and_mass(snap, a)
    return out


def prelimit_samples(cfg: ExperimentConfig, r: float, r_index: int, jobs: int = 1) -> np.ndarray:
    """Array of shape (N, n_times, n_levels, 2), replications in index order."""
    tasks = [(cfg.to_dict(), r, r_index, i) for i in range(cfg.N)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            res = list(ex.map(_replicate, tasks, chunksize=max(1, cfg.N // (4 * jobs))))
    else:
        res = [_replicate(t) for t in tasks]
    return np.stack(res)


def limit_samples(cfg: ExperimentConfig) -> dict:
    """Reference draws keyed by (t, level, quantity)."""
    spec = limit_spec(cfg)
    ref = {}
    finite = sorted({a for a in cfg.levels if 0 < a < math.inf})
    levels = np.union1d(DEFAULT_LEVELS, finite)
    fields = [sample_field(spec, cfg.T, cfg.limit_dt, levels, seed=[cfg.master_seed, 1, k])
              for k in range(cfg.field_draws)]
    for t in cfg.snapshot_times:
        for j, a in enumerate(cfg.levels):
            if a == 0:
                ref[(t, a, "W")] = np.zeros(1)
                ref[(t, a, "Z")] = np.zeros(1)
                continue
            if fields:
                k = fields[0].time_index(t)
                ref[(t, a, "Z")] = np.array([mass_below(f, a)[k] for f in fields])
            if spec.xi.kind == "zero" and t > 0:
                mu = float(spec.drift(a)) if not math.isinf(a) else spec.kappa
                ref[(t, a, "W")] = exact_marginal_draws(mu, spec.sigma, t, cfg.limit_draws,
                                                        seed=[cfg.master_seed, 2, j])
            elif fields:
                idx = len(levels) if math.isinf(a) else int(np.searchsorted(levels, a))
                ref[(t, a, "W")] = np.array([f.W[idx, f.time_index(t)] for f in fields])
    return ref


def run_convergence_study(cfg: ExperimentConfig, jobs: int = 1, write: bool = True) -> ComparisonReport:
    report = ComparisonReport()
    ref = limit_samples(cfg)
    largest = cfg.r_list[-1]
    ks_inf = {}
    for ri, r in enumerate(cfg.r_list):
        data = prelimit_samples(cfg, r, ri, jobs)
        log.info("r=%g: %d replications done", r, cfg.N)
        for i, t in enumerate(cfg.snapshot_times):
            for j, a in enumerate(cfg.levels):
                for q, name in ((0, "W"), (1, "Z")):
                    x = data[:, i, j, q]
                    lim = ref.get((t, a, name))
                    ks = empirical_cdf_and_ks(x, lim) if lim is not None else None
                    ok = None
                    if name == "W" and ks is not None:
                        ok = ks <= cfg.ks_tolerance
                        if math.isinf(a):
                            ks_inf[(t, r)] = ks
                    report.add({"r": r, "t": t, "level": a, "quantity": name, "n": len(x),
                                "mean": float(x.mean()), "std": float(x.std()),
                                "limit_mean": None if lim is None else float(np.mean(lim)),
                                "ks": ks, "pass": ok})
    final = [row["pass"] for row in report.select(r=largest, quantity="W") if row["pass"] is not None]
    report.summary = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "ks_level_inf": {f"t={fmt(t)},r={fmt(r)}": fmt(v) for (t, r), v in sorted(ks_inf.items())},
        "checks": {"ks_at_largest_r": all(final)},
        "all_pass": all(final),
    }
    if write:
        report.write(cfg.out_dir)
    return report
