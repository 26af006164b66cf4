"""Experiment runner: reproduces the figure scenarios as CSV/JSON files.

Each scenario trains the schemes it compares, evaluates them, and writes
machine-readable outputs under the run directory:

  curves.csv        scheme,seed,episode,epsilon,mean_loss,throughput_bits
  rate_vs_time.csv  scheme,seed,t,sum_rate_bps,reclustered
  trajectory.csv    checkpoint,t,uav,x,y,h
  sweep.csv         v_max,p_max_dbm,seed,throughput_bits
  summary.json      scenario-level aggregates
  manifest.json     seeds, effective config, config hash

Outputs are byte-reproducible for a fixed (scenario, overrides, seeds) and
kernel backend. The plotting frontend consumes only these files.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import backend, training
from .agent import HyperParams
from .env import SimConfig
from .training import episodes_to_fraction_of_max, evaluate, final_level, train

EXIT_UNKNOWN_SCENARIO = 3
EXIT_BAD_OUTPUT_DIR = 4
EXIT_INFEASIBLE = 5

SCENARIOS = (
    "noma-vs-oma",
    "trajectory-snapshot",
    "reclustering",
    "speed-power-sweep",
    "scheme-comparison",
)

# Desk-scale experiment defaults: a quarter-size service area with UAVs
# launched near the control center so 100-episode training converges on a
# laptop. Everything is overridable with --set.
DESK_OVERRIDES = {
    "x_max": 500.0,
    "y_max": 500.0,
    "map_cells": 50,
    "uav_init_xy": "origin",
}
DESK_HYPER_OVERRIDES = {
    "replay_capacity": 6000,
}


class ScenarioError(RuntimeError):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _coerce(value: str, field_type):
    if field_type is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if field_type is float:
        return float(value)
    if field_type is int:
        return int(value)
    return value


def apply_overrides(overrides: dict[str, str]) -> tuple[SimConfig, HyperParams]:
    """Desk defaults plus --set key=value overrides, typed per field."""
    cfg_fields = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    hyp_fields = {f.name: f.type for f in dataclasses.fields(HyperParams)}
    cfg_kwargs: dict = dict(DESK_OVERRIDES)
    hyp_kwargs: dict = dict(DESK_HYPER_OVERRIDES)
    types = {"float": float, "int": int, "bool": bool, "str": str}
    for key, raw in overrides.items():
        if key in cfg_fields:
            cfg_kwargs[key] = _coerce(raw, types.get(str(cfg_fields[key]), str))
        elif key in hyp_fields:
            hyp_kwargs[key] = _coerce(raw, types.get(str(hyp_fields[key]), str))
        else:
            raise ScenarioError(f"unknown config key {key!r}", EXIT_INFEASIBLE)
    try:
        config = SimConfig(**cfg_kwargs)
        hyper = HyperParams(**hyp_kwargs)
    except ValueError as exc:
        raise ScenarioError(f"infeasible config: {exc}", EXIT_INFEASIBLE) from exc
    return config, hyper


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(canon.encode()).hexdigest()


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _train_task(args):
    scheme, config, hyper, seed, episodes, checkpoints = args
    return train(scheme, config, hyper, seed, episodes, checkpoint_at=checkpoints)


def _run_trainings(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_train_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_task, tasks))


def _curve_rows(results) -> list[tuple]:
    rows = []
    for res in results:
        for s in res.stats:
            rows.append((res.scheme, res.seed, s.episode, s.epsilon, s.mean_loss, s.throughput_bits))
    return rows


def _scheme_summary(results, schemes, seeds) -> dict:
    by_scheme = {}
    for scheme in schemes:
        finals, ep90s = [], []
        for res in results:
            if res.scheme != scheme:
                continue
            finals.append(final_level(res.throughputs))
            ep90s.append(episodes_to_fraction_of_max(res.throughputs))
        by_scheme[scheme] = {
            "final_throughput_bits_per_seed": finals,
            "final_throughput_bits_median": float(np.median(finals)),
            "episodes_to_90pct_per_seed": ep90s,
            "episodes_to_90pct_median": float(np.median(ep90s)),
        }
    return by_scheme


def scenario_noma_vs_oma(config, hyper, seeds, episodes, out, workers) -> dict:
    schemes = ["sdqn3d", "sdqn3d-oma"]
    tasks = [(sch, config, hyper, seed, episodes, ()) for sch in schemes for seed in seeds]
    results = _run_trainings(tasks, workers)
    _write_csv(out / "curves.csv",
               ["scheme", "seed", "episode", "epsilon", "mean_loss", "throughput_bits"],
               _curve_rows(results))
    summary = _scheme_summary(results, schemes, seeds)
    noma = summary["sdqn3d"]["final_throughput_bits_median"]
    oma = summary["sdqn3d-oma"]["final_throughput_bits_median"]
    summary["noma_over_oma_pct"] = 100.0 * (noma / oma - 1.0)
    return summary


def scenario_scheme_comparison(config, hyper, seeds, episodes, out, workers) -> dict:
    schemes = ["sdqn3d", "sdqn2d", "mutual", "private-dqn", "circular"]
    tasks = [(sch, config, hyper, seed, episodes, ()) for sch in schemes for seed in seeds]
    results = _run_trainings(tasks, workers)
    _write_csv(out / "curves.csv",
               ["scheme", "seed", "episode", "epsilon", "mean_loss", "throughput_bits"],
               _curve_rows(results))
    summary = _scheme_summary(results, schemes, seeds)
    sdqn = summary["sdqn3d"]["final_throughput_bits_median"]
    mutual = summary["mutual"]["final_throughput_bits_median"]
    private = summary["private-dqn"]["final_throughput_bits_median"]
    summary["sdqn_over_private_pct"] = 100.0 * (sdqn / private - 1.0)
    summary["sdqn_over_mutual_pct"] = 100.0 * (sdqn / mutual - 1.0)
    summary["mutual_over_private_pct"] = 100.0 * (mutual / private - 1.0)
    return summary


def scenario_reclustering(config, hyper, seeds, episodes, out, workers) -> dict:
    tasks = [("sdqn3d", config, hyper, seed, episodes, ()) for seed in seeds]
    results = _run_trainings(tasks, workers)
    rows, gaps, pre_gaps = [], [], []
    pre_slots = int(round(config.recluster_interval / config.dt))
    for res in results:
        on = evaluate(res, eval_seed=res.seed, recluster=True)
        off = evaluate(res, eval_seed=res.seed, recluster=False)
        for label, trace in (("recluster", on), ("static", off)):
            for i, t in enumerate(trace.times):
                rows.append((label, res.seed, t, float(trace.slot_sum_rates[i]),
                             int(trace.reclustered[i])))
        gaps.append(on.throughput_bits() / off.throughput_bits() - 1.0)
        pre_on = float(on.slot_sum_rates[:pre_slots].sum())
        pre_off = float(off.slot_sum_rates[:pre_slots].sum())
        pre_gaps.append(pre_on / pre_off - 1.0)
    _write_csv(out / "rate_vs_time.csv",
               ["scheme", "seed", "t", "sum_rate_bps", "reclustered"], rows)
    marker_rows = [r for r in rows if r[0] == "recluster" and r[1] == seeds[0] and r[4]]
    return {
        "throughput_gap_pct_per_seed": [100.0 * g for g in gaps],
        "throughput_gap_pct_median": float(np.median([100.0 * g for g in gaps])),
        "pre_interval_gap_pct_per_seed": [100.0 * g for g in pre_gaps],
        "pre_interval_gap_pct_max_abs": float(max(abs(100.0 * g) for g in pre_gaps)),
        "recluster_times": [float(r[2]) for r in marker_rows],
    }


def scenario_trajectory(config, hyper, seeds, episodes, out, workers) -> dict:
    seed = seeds[0]
    early = max(1, int(episodes * 0.4))
    res = train("sdqn3d", config, hyper, seed, episodes, checkpoint_at=(early, episodes))
    rows = []
    for label, model in sorted(res.checkpoints.items()):
        trace = evaluate(res, eval_seed=seed, model=model)
        for i, t in enumerate(trace.times):
            for u in range(config.n_uavs):
                x, y, h = trace.uav_xyz[i][u]
                rows.append((label, t, u, float(x), float(y), float(h)))
    _write_csv(out / "trajectory.csv", ["checkpoint", "t", "uav", "x", "y", "h"], rows)
    return {"checkpoints": sorted(res.checkpoints), "seed": seed}


def scenario_speed_power(config, hyper, seeds, episodes, out, workers) -> dict:
    speeds = (2.0, 6.0, 10.0, 14.0)
    powers = (23.0, 29.0)
    tasks = []
    for v in speeds:
        for p in powers:
            cfg = replace(config, user_v_max=v, p_max_dbm=p)
            for seed in seeds:
                tasks.append(("sdqn3d", cfg, hyper, seed, episodes, ()))
    results = _run_trainings(tasks, workers)
    rows, summary = [], {}
    for res in results:
        evals = [evaluate(res, eval_seed=s).throughput_bits() for s in (res.seed, res.seed + 100)]
        thr = float(np.median(evals))
        v, p = res.config.user_v_max, res.config.p_max_dbm
        rows.append((v, p, res.seed, thr))
        summary.setdefault(f"v{v:g}_p{p:g}", []).append(thr)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    _write_csv(out / "sweep.csv", ["v_max", "p_max_dbm", "seed", "throughput_bits"], rows)
    return {key: float(np.median(vals)) for key, vals in sorted(summary.items())}


_SCENARIO_FUNCS = {
    "noma-vs-oma": scenario_noma_vs_oma,
    "scheme-comparison": scenario_scheme_comparison,
    "reclustering": scenario_reclustering,
    "trajectory-snapshot": scenario_trajectory,
    "speed-power-sweep": scenario_speed_power,
}


def run_scenario(scenario, overrides, seeds, episodes, out_dir, workers=1) -> Path:
    """Execute one scenario end to end; returns the run directory."""
    if scenario not in _SCENARIO_FUNCS:
        raise ScenarioError(
            f"unknown scenario {scenario!r} (choose from {', '.join(SCENARIOS)})",
            EXIT_UNKNOWN_SCENARIO,
        )
    config, hyper = apply_overrides(overrides)
    out = Path(out_dir) / scenario
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ScenarioError(f"output directory not writable: {exc}", EXIT_BAD_OUTPUT_DIR) from exc

    summary = _SCENARIO_FUNCS[scenario](config, hyper, list(seeds), episodes, out, workers)
    payload = {
        "scenario": scenario,
        "overrides": dict(sorted(overrides.items())),
        "seeds": list(seeds),
        "episodes": episodes,
        "config": dataclasses.asdict(config),
        "hyper": dataclasses.asdict(hyper),
    }
    manifest = dict(payload)
    manifest["config_hash"] = config_hash(payload)
    manifest["backend"] = backend.ACTIVE.NAME
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="skynoma",
        description="UAV NOMA shared-DQN experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment scenario")
    run_p.add_argument("--scenario", required=True, help=f"one of: {', '.join(SCENARIOS)}")
    run_p.add_argument("--episodes", type=int, default=100)
    run_p.add_argument("--seeds", type=int, default=3, help="number of seeds")
    run_p.add_argument("--seed-base", type=int, default=1)
    run_p.add_argument("--out", default=os.environ.get("SKYNOMA_OUT", "runs"))
    run_p.add_argument("--workers", type=int, default=1)
    run_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="config override, repeatable")

    sub.add_parser("verify", help="run the oracle/property self-checks")

    args = parser.parse_args(argv)

    if args.command == "verify":
        from .verification import run_checks

        return 0 if run_checks() else 1

    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_INFEASIBLE
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    seeds = list(range(args.seed_base, args.seed_base + args.seeds))
    try:
        out = run_scenario(args.scenario, overrides, seeds, args.episodes, args.out, args.workers)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
