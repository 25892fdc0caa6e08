"""Command-line entry point: run experiments from a JSON config and write CSV tables.

Usage::

    crowdsense budget-sweep --config exp.json --out results/
    crowdsense selection-bench --parallel 4

Each command writes its CSV table(s), a ``<command>-summary.json`` with per-cell
means and standard deviations, and a ``<command>-manifest.json`` recording the
config hash, seeds and wall-clock time. Tables and summaries depend only on
the config and seeds.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .incentives import ReputationStore
from .model import ConfigurationError, ValidationError
from .selection import EXHAUSTIVE_MAX_CANDIDATES, select_exact_dp, select_exhaustive, select_fptas, select_greedy_baseline
from .simulator import (
    BUDGET_SWEEP_COLUMNS,
    REPUTATION_SURFACE_COLUMNS,
    REWARD_SURFACE_COLUMNS,
    USER_SWEEP_COLUMNS,
    PopulationModel,
    TaskTemplate,
    experiment_budget_sweep,
    experiment_reputation_surface,
    experiment_reward_surface,
    experiment_user_sweep,
    preset_weights,
    run_campaign,
    sample_selection_instance,
    summarize,
)

log = logging.getLogger(__name__)

COMMANDS = ("budget-sweep", "user-sweep", "reward-surface", "selection-bench", "single-campaign")

SELECTION_BENCH_COLUMNS = (
    "n_users", "instance", "seed", "budget", "n_candidates", "solver", "n_selected",
    "total_bid", "utility", "amplified_utility", "table_cells", "check",
)

CAMPAIGN_COLUMNS = (
    "solver", "seed", "task", "user_id", "bid_price", "expected_delay", "actual_delay", "bad_report",
    "veracity", "delay_score", "final_score", "valid", "reward", "reputation_delta", "reputation_after",
)


def fmt(value: Any) -> str:
    """Stable text form: floats to 9 significant digits, bools as 0/1."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _round(obj: Any) -> Any:
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(_round(obj), indent=2) + "\n")


def _pmap(fn: Callable, jobs: Sequence[tuple], parallel: int) -> list:
    if parallel <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _budget_job(cfg: ExperimentConfig, dist: str, seed: int) -> list[dict[str, Any]]:
    pop = replace(cfg.population, reputation_distribution=dist)
    sweep = cfg.budget_sweep
    return experiment_budget_sweep(
        pop, cfg.task, sweep.budgets, cfg.solvers, [seed], sweep.presets, cfg.reputation, cfg.simulation
    )


def budget_sweep(cfg: ExperimentConfig, out: Path, parallel: int) -> list[str]:
    sweep = cfg.budget_sweep
    jobs = [(cfg, dist, seed) for dist in sweep.reputation_distributions for seed in cfg.seeds]
    rows = [r for chunk in _pmap(_budget_job, jobs, parallel) for r in chunk]
    order = {
        "reputation_distribution": {v: i for i, v in enumerate(sweep.reputation_distributions)},
        "preset": {v: i for i, v in enumerate(sweep.presets)},
        "budget": {v: i for i, v in enumerate(sweep.budgets)},
        "solver": {v: i for i, v in enumerate(cfg.solvers)},
        "seed": {v: i for i, v in enumerate(cfg.seeds)},
    }
    rows.sort(key=lambda r: tuple(order[k][r[k]] for k in order))
    write_csv(out / "budget_sweep.csv", BUDGET_SWEEP_COLUMNS, rows)
    summary = summarize(
        rows,
        ("reputation_distribution", "preset", "budget", "solver"),
        ("utility", "total_actual_delay", "spend", "n_selected", "expected_utility"),
    )
    write_json(out / "budget-sweep-summary.json", summary)
    return ["budget_sweep.csv", "budget-sweep-summary.json"]


def _user_job(cfg: ExperimentConfig, seed: int) -> list[dict[str, Any]]:
    sweep = cfg.user_sweep
    tmpl = TaskTemplate(sweep.budget, cfg.task.delay_threshold, preset_weights(sweep.preset, cfg.task.weights), cfg.task.assessment)
    return experiment_user_sweep(cfg.population, tmpl, sweep.sizes, cfg.solvers, [seed], cfg.reputation, cfg.simulation)


def user_sweep(cfg: ExperimentConfig, out: Path, parallel: int) -> list[str]:
    rows = [r for chunk in _pmap(_user_job, [(cfg, s) for s in cfg.seeds], parallel) for r in chunk]
    sizes = {v: i for i, v in enumerate(cfg.user_sweep.sizes)}
    solvers = {v: i for i, v in enumerate(cfg.solvers)}
    seeds = {v: i for i, v in enumerate(cfg.seeds)}
    rows.sort(key=lambda r: (sizes[r["n_users"]], solvers[r["solver"]], seeds[r["seed"]]))
    write_csv(out / "user_sweep.csv", USER_SWEEP_COLUMNS, rows)
    summary = summarize(rows, ("n_users", "solver"), ("utility", "expected_utility", "n_selected"))
    write_json(out / "user-sweep-summary.json", summary)
    return ["user_sweep.csv", "user-sweep-summary.json"]


def reward_surface(cfg: ExperimentConfig, out: Path, parallel: int) -> list[str]:
    rs = cfg.reward_surface
    assessment = cfg.task.assessment
    rewards = experiment_reward_surface(
        rs.bid, rs.expected_delay, rs.delay_threshold, assessment, rs.veracity_grid, rs.delay_grid
    )
    reps = experiment_reputation_surface(
        cfg.reputation, rs.quality_grid, rs.bid_grid, rs.peers, rs.peer_quality, rs.peer_bid
    )
    write_csv(out / "reward_surface.csv", REWARD_SURFACE_COLUMNS, rewards)
    write_csv(out / "reputation_surface.csv", REPUTATION_SURFACE_COLUMNS, reps)
    summary = {
        "reward_points": len(rewards),
        "full_bid_points": sum(1 for r in rewards if r["reward"] == rs.bid),
        "zero_reward_points": sum(1 for r in rewards if r["reward"] == 0.0),
        "reputation_points": len(reps),
        "punished_points": sum(1 for r in reps if r["delta"] == -cfg.reputation.eta),
    }
    write_json(out / "reward-surface-summary.json", summary)
    return ["reward_surface.csv", "reputation_surface.csv", "reward-surface-summary.json"]


def _bench_job(cfg: ExperimentConfig, n: int, instance: int, seed: int) -> list[dict[str, Any]]:
    pop = PopulationModel(**{**cfg.population.to_dict(), "n_users": n})
    cands, budget = sample_selection_instance(
        pop, seed, cfg.task.weights, cfg.reputation, cfg.simulation.amplification, cfg.task.delay_threshold
    )
    base = {"n_users": n, "instance": instance, "seed": seed, "budget": budget, "n_candidates": len(cands)}
    dp = select_exact_dp(cands, budget)
    results = [(dp, 1)]
    if len(cands) <= EXHAUSTIVE_MAX_CANDIDATES:
        ex = select_exhaustive(cands, budget)
        results.append((ex, int(ex.amplified_utility == dp.amplified_utility)))
    for eps in cfg.selection_bench.epsilons:
        fp = select_fptas(cands, budget, eps)
        ok = fp.achieved_utility >= (1 - eps) * dp.achieved_utility - 1e-9 and fp.total_bid <= budget
        results.append((fp, int(ok)))
    results.append((select_greedy_baseline(cands, budget), int(True)))
    rows = []
    for res, check in results:
        rows.append({
            **base,
            "solver": res.solver,
            "n_selected": res.size,
            "total_bid": res.total_bid,
            "utility": res.achieved_utility,
            "amplified_utility": res.amplified_utility,
            "table_cells": res.table_cells,
            "check": int(check and res.total_bid <= budget),
        })
    return rows


def selection_bench(cfg: ExperimentConfig, out: Path, parallel: int) -> list[str]:
    bench = cfg.selection_bench
    base = cfg.seeds[0]
    jobs = [(cfg, n, k, base * 100_003 + n * 1_000 + k) for n in bench.sizes for k in range(bench.instances)]
    rows = [r for chunk in _pmap(_bench_job, jobs, parallel) for r in chunk]
    write_csv(out / "selection_bench.csv", SELECTION_BENCH_COLUMNS, rows)
    summary = summarize(rows, ("n_users", "solver"), ("utility", "amplified_utility", "check", "table_cells"))
    write_json(out / "selection-bench-summary.json", summary)
    return ["selection_bench.csv", "selection-bench-summary.json"]


def single_campaign(cfg: ExperimentConfig, out: Path, parallel: int) -> list[str]:
    seed = cfg.seeds[0]
    rows = []
    files = []
    summary = []
    for solver in cfg.solvers:
        res = run_campaign(cfg.population, cfg.task, solver, seed, cfg.reputation, cfg.simulation)
        name = f"reputation-{solver}.csv"
        ReputationStore(cfg.reputation, res.reputations).save(out / name)
        files.append(name)
        for t in res.tasks:
            for app, rep, bad, a, rw, d in zip(t.applications, t.reports, t.bad_reports, t.assessments, t.rewards, t.deltas):
                rows.append({
                    "solver": solver, "seed": seed, "task": t.task.id, "user_id": rep.user_id,
                    "bid_price": app.bid_price, "expected_delay": app.expected_delay,
                    "actual_delay": rep.actual_delay, "bad_report": bad,
                    "veracity": a.veracity, "delay_score": a.delay_score, "final_score": a.final_score,
                    "valid": a.valid, "reward": rw.reward, "reputation_delta": d.delta,
                    "reputation_after": t.reputation_after[rep.user_id],
                })
        summary.append({
            "solver": solver, "seed": seed, "tasks": len(res.tasks), "utility": res.utility,
            "expected_utility": res.expected_utility, "total_actual_delay": res.total_actual_delay,
            "spend": res.spend, "n_selected": res.n_selected,
        })
    write_csv(out / "campaign.csv", CAMPAIGN_COLUMNS, rows)
    write_json(out / "single-campaign-summary.json", summary)
    return ["campaign.csv", *files, "single-campaign-summary.json"]


_RUNNERS: dict[str, Callable[[ExperimentConfig, Path, int], list[str]]] = {
    "budget-sweep": budget_sweep,
    "user-sweep": user_sweep,
    "reward-surface": reward_surface,
    "selection-bench": selection_bench,
    "single-campaign": single_campaign,
}


def run(cfg: ExperimentConfig, command: str, out: str | Path | None = None, parallel: int = 1) -> int:
    """Run one command and write its outputs; returns a process exit status."""
    if command not in _RUNNERS:
        raise ValueError(f"unknown command {command!r}; expected one of {COMMANDS}")
    out_dir = Path(out if out is not None else cfg.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from None
    start = time.perf_counter()
    files = _RUNNERS[command](cfg, out_dir, parallel)
    elapsed = time.perf_counter() - start
    manifest = {
        "command": command,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "seeds": list(cfg.seeds),
        "wall_clock_seconds": elapsed,
        "files": files,
        "config": cfg.to_dict(),
    }
    (out_dir / f"{command}-manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    log.info("%s: wrote %s to %s in %.2fs", command, ", ".join(files), out_dir, elapsed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crowdsense", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment config (defaults are used when omitted)")
    p.add_argument("--out", help="output directory (overrides the config's 'output')")
    p.add_argument("--seed-offset", type=int, default=0, help="add this to every configured seed")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes for grid cells")
    p.add_argument("--solver", choices=("exact_dp", "fptas", "greedy", "exhaustive"), help="run only this solver")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(args.seed_offset, args.solver, args.out)
        if args.parallel < 1:
            raise ConfigError(f"--parallel must be >= 1, got {args.parallel}")
        return run(cfg, args.command, parallel=args.parallel)
    except (ConfigError, ConfigurationError, ValidationError) as exc:
        print(f"crowdsense: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"crowdsense: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
