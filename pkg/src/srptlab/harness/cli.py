"""Command-line entry point: ``python -m srptlab <command> [--config ...]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ..dists import (dist_from_dict, heavy_traffic_arrival_rate, ArrivalSpec, poisson_arrivals,
                     scale_parameter)
from ..limitfield import (LimitSpec, collapse_gap, geometric_levels, queue_length_bracket,
                          sample_field, tail_ratios)
from ..scalemeas import sandwich_violations
from ..srpt_core import (InitialConditionSpec, SizeLaw, coupled_truncated_runs, draw_stream,
                         generate_initial, intertwined_pair_sim, simulate_srpt)
from .config import ExperimentConfig
from .study import fmt, run_convergence_study
from .verify import ledger_json, verify_suite

log = logging.getLogger("srptlab")


def _load(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise SystemExit(f"cannot read config {path}: {exc}")


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model(cfg: dict):
    dist = dist_from_dict(cfg.get("service", {"kind": "pareto", "m": 1.0, "p": 2.0}))
    arrivals = ArrivalSpec.from_dict(cfg["arrivals"]) if "arrivals" in cfg else poisson_arrivals()
    r = float(cfg.get("r", 25.0))
    kappa = float(cfg.get("kappa", 0.0))
    return dist, arrivals, r, kappa, scale_parameter(dist, r), heavy_traffic_arrival_rate(dist, r, kappa)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def cmd_simulate(args, cfg) -> bool:
    dist, arrivals, r, kappa, c_r, lam = _model(cfg)
    init = dict(cfg.get("initial", {"kind": "empty"}))
    if "size_law" in init:
        init["size_law"] = SizeLaw(**init["size_law"])
    ss = np.random.SeedSequence(args.seed)
    init_seed, run_seed = ss.spawn(2)
    jobs = generate_initial(InitialConditionSpec(**init), r, c_r, init_seed)
    traj = simulate_srpt(arrivals, dist, lam, jobs, r * r * float(cfg.get("T", 1.0)), run_seed)
    path = _out(args) / "trajectory.csv"
    traj.to_csv(path)
    log.info("wrote %d events to %s", len(traj), path)
    return True


def cmd_couple(args, cfg) -> bool:
    dist, arrivals, r, kappa, c_r, lam = _model(cfg)
    levels = [math.inf if str(a) == "inf" else float(a) for a in cfg.get("levels", [0.25, 0.5, 1, 2, "inf"])]
    horizon = r * r * float(cfg.get("T", 1.0))
    rows, ok = [], True
    for s in range(int(cfg.get("n_seeds", 10))):
        stream = draw_stream(arrivals, dist, lam, horizon, np.random.SeedSequence([args.seed, s]))
        finite = sorted(a for a in levels if not math.isinf(a))
        runs = coupled_truncated_runs([], stream, horizon, [a * c_r for a in finite] + [math.inf])
        for a, run in zip(finite + [math.inf], runs):
            v = sandwich_violations(runs[-1], run, a, r, c_r)
            bad = any(v[k] > 0 for k in ("work_lower", "work_upper", "mass_lower", "mass_upper"))
            ok &= not bad
            rows.append([s, a, v["work_lower"], v["work_upper"], v["mass_lower"], v["mass_upper"],
                         v["n_times"], not bad])
    _write_csv(_out(args) / "couple.csv", ["seed", "level", "work_lower", "work_upper",
                                           "mass_lower", "mass_upper", "n_times", "pass"], rows)
    return ok


def cmd_intertwine(args, cfg) -> bool:
    dist, arrivals, r, kappa, c_r, lam = _model(cfg)
    init1 = [float(x) * c_r for x in cfg.get("init1", [1.0, 2.0])]
    init2 = [float(x) * c_r for x in cfg.get("init2", [0.5, 1.0, 2.0])]
    horizon = r * r * float(cfg.get("T", 1.0))
    rows, ok = [], True
    for s in range(int(cfg.get("n_seeds", 10))):
        pair = intertwined_pair_sim(arrivals, dist, lam, init1, init2, horizon,
                                    np.random.SeedSequence([args.seed, s]))
        d = pair.q2 - pair.q1
        bad = int(np.sum((d < 0) | (d > 1)))
        ok &= bad == 0
        rows.append([s, len(pair.times), bad, bad == 0])
    _write_csv(_out(args) / "intertwine.csv", ["seed", "n_times", "violations", "pass"], rows)
    return ok


def _limit_spec(cfg: dict, p: float | None = None) -> LimitSpec:
    return LimitSpec(float(cfg.get("kappa", 0.0)), float(cfg.get("lambda", 2.0 / 3.0)),
                     float(cfg.get("sigma", math.sqrt(2.0))), float(p or cfg.get("p", 2.0)))


def cmd_limit(args, cfg) -> bool:
    spec = _limit_spec(cfg)
    T, dt = float(cfg.get("T", 1.0)), float(cfg.get("dt", 1e-3))
    fld = sample_field(spec, T, dt, seed=args.seed)
    out = _out(args)
    fld.to_csv(out / "field.csv")
    q = queue_length_bracket(fld)
    _write_csv(out / "queue_length.csv", ["t", "estimate", "lower", "upper", "W_inf"],
               zip(fld.times, q.estimate, q.lower, q.upper, fld.W_inf))
    t = float(cfg.get("t", T))
    rows = [[a, *tail_ratios(fld, t, a)] for a in cfg.get("tail_levels", [4.0, 8.0, 16.0])]
    _write_csv(out / "tail_ratios.csv", ["a", "work_tail_ratio", "mass_tail_ratio", "w_prime"], rows)
    return bool(np.all(q.lower <= q.estimate) and np.all(q.estimate <= q.upper))


def cmd_collapse(args, cfg) -> bool:
    p_list = [float(p) for p in cfg.get("p_list", [2, 4, 8, 16])]
    n_seeds = int(cfg.get("n_seeds", 100))
    lam = float(cfg.get("lambda", 1.0))
    gaps = np.array([[g for g in collapse_gap(p_list, float(cfg.get("kappa", 0.0)), lam,
                                              T=float(cfg.get("T", 1.0)), dt=float(cfg.get("dt", 1e-3)),
                                              seed=[args.seed, s]).values()]
                     for s in range(n_seeds)])
    med = np.median(gaps, axis=0)
    _write_csv(_out(args) / "collapse.csv", ["p", "median_gap", "mean_gap"],
               zip(p_list, med, gaps.mean(axis=0)))
    return bool(np.all(np.diff(med) < 0))


def cmd_converge(args, cfg) -> bool:
    cfg = dict(cfg)
    cfg["out_dir"] = str(args.out)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    report = run_convergence_study(ExperimentConfig.from_dict(cfg), jobs=args.jobs)
    return report.all_pass


def cmd_verify(args, cfg) -> bool:
    ledger = verify_suite(args.seed)
    (_out(args) / "ledger.json").write_text(ledger_json(ledger))
    return ledger["all_pass"]


COMMANDS = {
    "simulate": (cmd_simulate, "simulate one trajectory and write its event log"),
    "couple": (cmd_couple, "check the truncated-queue sandwich inequalities"),
    "intertwine": (cmd_intertwine, "run intertwined pairs and check Q1 <= Q2 <= Q1 + 1"),
    "limit": (cmd_limit, "sample the limit field, queue length and tail ratios"),
    "collapse": (cmd_collapse, "sweep p for the queue-length/workload gap"),
    "converge": (cmd_converge, "prelimit versus limit convergence study"),
    "verify": (cmd_verify, "run the invariant ledger"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srptlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        print("--seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    func, _ = COMMANDS[args.command]
    ok = func(args, _load(args.config))
    print(f"{args.command}: {'pass' if ok else 'fail'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
