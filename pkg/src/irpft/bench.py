"""Benchmark runner: runtime, speedup, and reward comparisons of the planners.

``run`` executes a (planner x particle-count) matrix of seeded Light Dark
episodes and writes line-delimited JSON records plus an aggregate block;
``summarize`` recomputes the aggregates from the records and prints a table.
Schemas for both files are documented in docs/formats.md. Configuration comes
from a single TOML file; environment-variable overrides are deliberately not
supported.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .experience import Dataset
from .lightdark import LightDarkConfig, LightDarkEnv, LightDarkModel, initial_belief
from .planners import solve_loop
from .tree import PlannerConfig

RESULTS_SCHEMA = "irpft-results/1"
CONFIG_SCHEMA = "irpft-bench-config/1"

_PLANNERS = ("pft", "irpft")


@dataclass
class ExperimentConfig:
    """One benchmark run: which planners, which particle counts, how many episodes."""

    planners: Tuple[str, ...] = ("pft", "irpft")
    particle_counts: Tuple[int, ...] = (5, 10, 15, 20)
    episodes: int = 20
    seed: int = 1
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    environment: LightDarkConfig = field(default_factory=LightDarkConfig)

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("episodes must be at least 1")
        if not self.particle_counts or any(m <= 0 for m in self.particle_counts):
            raise ConfigError("particle_counts must be positive")
        unknown = set(self.planners) - set(_PLANNERS)
        if not self.planners or unknown:
            raise ConfigError(f"planners must be a nonempty subset of {_PLANNERS}")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")


def _build_section(cls, section: dict, name: str, **fixed):
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - valid
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {sorted(unknown)}")
    if name == "planner" and "m" in section:
        raise ConfigError("planner.m is set per cell from experiment.particle_counts")
    data = dict(section)
    for key in ("goal", "start"):
        if key in data:
            data[key] = tuple(data[key])
    if "beacons" in data:
        data["beacons"] = tuple(tuple(b) for b in data["beacons"])
    if "bounds" in data:
        data["bounds"] = tuple(tuple(b) for b in data["bounds"])
    data.update(fixed)
    try:
        return cls(**data)
    except (TypeError, ConfigError) as exc:
        raise ConfigError(f"invalid [{name}] section: {exc}") from exc


def load_config(path: Optional[Path] = None) -> ExperimentConfig:
    """Parse a benchmark TOML file (packaged defaults when ``path`` is None)."""
    if path is None:
        from importlib import resources

        text = resources.files("irpft").joinpath("configs/lightdark_default.toml").read_text()
        source = "<packaged default>"
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        source = str(path)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:  # carries line/column diagnostics
        raise ConfigError(f"{source}: {exc}") from exc

    schema = raw.get("schema")
    if schema is not None and schema != CONFIG_SCHEMA:
        raise ConfigError(f"{source}: unsupported config schema {schema!r}")
    exp = dict(raw.get("experiment", {}))
    known = {"planners", "particle_counts", "episodes", "seed"}
    unknown = set(exp) - known
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) in [experiment]: {sorted(unknown)}")
    planner_cfg = _build_section(PlannerConfig, raw.get("planner", {}), "planner")
    env_cfg = _build_section(LightDarkConfig, raw.get("environment", {}), "environment")
    try:
        return ExperimentConfig(
            planners=tuple(exp.get("planners", ("pft", "irpft"))),
            particle_counts=tuple(exp.get("particle_counts", (5, 10, 15, 20))),
            episodes=int(exp.get("episodes", 20)),
            seed=int(exp.get("seed", 1)),
            planner=planner_cfg,
            environment=env_cfg,
        )
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def run_episode(
    planner_id: str,
    m: int,
    episode: int,
    cfg: ExperimentConfig,
) -> List[dict]:
    """Run one seeded episode; returns one session row per executed step.

    The environment stream (true state, observations, initial belief) and the
    planner stream derive from (seed, m, episode) only, so both planners face
    identical episodes: first sessions are exactly paired.
    """
    env_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(m, episode, 0)))
    plan_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(m, episode, 1)))
    model = LightDarkModel(cfg.environment)
    belief = initial_belief(model, m, env_rng)
    env = LightDarkEnv(model, env_rng)
    planner_cfg = dataclasses.replace(cfg.planner, m=m)
    dataset = Dataset() if planner_id == "irpft" else None

    steps = solve_loop(
        belief,
        dataset,
        planner_cfg,
        model,
        env,
        plan_rng,
        max_steps=cfg.environment.max_steps,
    )
    episode_reward = float(sum(s.reward for s in steps))
    rows = []
    for k, s in enumerate(steps):
        rows.append(
            {
                "type": "session",
                "planner": planner_id,
                "m": m,
                "episode": episode,
                "session": k,
                "plan_ms": s.plan_seconds * 1000.0,
                "reward_calls": s.plan_reward_calls,
                "simulate_calls": s.plan_simulate_calls,
                "budget_used": s.budget_used,
                "episode_reward": episode_reward,
                "steps": len(steps),
                "seed": cfg.seed,
            }
        )
    return rows


def _mean_std_ci(values: Sequence[float]) -> Tuple[float, float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    ci = 1.96 * std / math.sqrt(arr.size) if arr.size else 0.0
    return mean, std, ci


def aggregate_rows(rows: Sequence[dict]) -> dict:
    """Per-cell statistics plus the per-m speedup block, from session rows.

    Time and reward-call statistics run over sessions; reward statistics run
    over episodes (one accumulated reward per episode).
    """
    cells: List[dict] = []
    seen: Dict[Tuple[str, int], List[dict]] = {}
    for row in rows:
        seen.setdefault((row["planner"], row["m"]), []).append(row)
    for (planner, m) in sorted(seen, key=lambda k: (k[1], k[0])):
        group = seen[(planner, m)]
        times = [r["plan_ms"] for r in group]
        by_episode: Dict[int, float] = {}
        for r in group:
            by_episode[r["episode"]] = r["episode_reward"]
        rewards = [by_episode[e] for e in sorted(by_episode)]
        t_mean, t_std, t_ci = _mean_std_ci(times)
        r_mean, r_std, r_ci = _mean_std_ci(rewards)
        cells.append(
            {
                "planner": planner,
                "m": m,
                "episodes": len(rewards),
                "sessions": len(group),
                "time_ms_mean": t_mean,
                "time_ms_std": t_std,
                "time_ms_ci95": t_ci,
                "reward_mean": r_mean,
                "reward_std": r_std,
                "reward_ci95": r_ci,
                "reward_calls_mean": float(np.mean([r["reward_calls"] for r in group])),
                "steps_mean": float(np.mean([r["steps"] for r in group])),
            }
        )
    speedup = []
    by_key = {(c["planner"], c["m"]): c for c in cells}
    for m in sorted({c["m"] for c in cells}):
        pft = by_key.get(("pft", m))
        irpft = by_key.get(("irpft", m))
        if pft and irpft and irpft["time_ms_mean"] > 0:
            speedup.append({"m": m, "speedup": pft["time_ms_mean"] / irpft["time_ms_mean"]})
    return {"type": "aggregate", "cells": cells, "speedup": speedup}


def run_matrix(cfg: ExperimentConfig, out_path: Path, progress: bool = False) -> Path:
    """Run the full matrix and write the results file (records + aggregate)."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows: List[dict] = []
    header = {
        "schema": RESULTS_SCHEMA,
        "seed": cfg.seed,
        "planners": list(cfg.planners),
        "particle_counts": list(cfg.particle_counts),
        "episodes": cfg.episodes,
        "created_unix": int(time.time()),
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(_dump(header) + "\n")
        # planners innermost: paired episodes run adjacent in time, so slow
        # machine-speed drift cancels out of the per-cell time ratios
        for m in cfg.particle_counts:
            for episode in range(cfg.episodes):
                for planner in cfg.planners:
                    episode_rows = run_episode(planner, m, episode, cfg)
                    for row in episode_rows:
                        fh.write(_dump(row) + "\n")
                    rows.extend(episode_rows)
                    if progress:
                        print(
                            f"[{planner} m={m}] episode {episode + 1}/{cfg.episodes}: "
                            f"steps={episode_rows[0]['steps'] if episode_rows else 0} "
                            f"reward={episode_rows[0]['episode_reward'] if episode_rows else float('nan'):.2f}",
                            file=sys.stderr,
                            flush=True,
                        )
        fh.write(_dump(aggregate_rows(rows)) + "\n")
    return out_path


def read_results(path: Path) -> Tuple[dict, List[dict], Optional[dict]]:
    """Parse a results file into (header, session rows, stored aggregate)."""
    header, rows, stored = None, [], None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: malformed record: {exc}") from exc
            if lineno == 1:
                if obj.get("schema") != RESULTS_SCHEMA:
                    raise ValueError(
                        f"{path}: line 1: expected schema {RESULTS_SCHEMA!r}, got {obj.get('schema')!r}"
                    )
                header = obj
            elif obj.get("type") == "session":
                rows.append(obj)
            elif obj.get("type") == "aggregate":
                stored = obj
            else:
                raise ValueError(f"{path}: line {lineno}: unknown record type {obj.get('type')!r}")
    if header is None:
        raise ValueError(f"{path}: empty results file")
    return header, rows, stored


def summarize(path: Path, out=None) -> int:
    """Print the per-cell table and speedups; returns a process exit code."""
    if out is None:
        out = sys.stdout
    try:
        _, rows, _ = read_results(Path(path))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not rows:
        print("no data: results file holds no session records", file=sys.stderr)
        return 2
    agg = aggregate_rows(rows)
    print(
        f"{'planner':>7} {'m':>4} {'episodes':>8} {'sessions':>8} "
        f"{'time_ms':>18} {'reward':>18} {'reward_calls':>12}",
        file=out,
    )
    for c in agg["cells"]:
        print(
            f"{c['planner']:>7} {c['m']:>4} {c['episodes']:>8} {c['sessions']:>8} "
            f"{c['time_ms_mean']:>10.2f} ± {c['time_ms_ci95']:<6.2f}"
            f"{c['reward_mean']:>10.2f} ± {c['reward_ci95']:<6.2f}"
            f"{c['reward_calls_mean']:>12.1f}",
            file=out,
        )
    for entry in agg["speedup"]:
        print(f"speedup m={entry['m']}: {entry['speedup']:.3f}x", file=out)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="irpft-bench",
        description="Seeded planner benchmarks on the 2D Light Dark problem.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the benchmark matrix")
    run_p.add_argument("--config", type=Path, default=None, help="TOML config (packaged default if omitted)")
    run_p.add_argument("--out", type=Path, required=True, help="results file to write")
    run_p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    run_p.add_argument("--planner", choices=_PLANNERS, default=None, help="run only one planner")
    run_p.add_argument("--episodes", type=int, default=None, help="override episodes per cell")
    run_p.add_argument("--progress", action="store_true", help="log per-episode progress to stderr")

    sum_p = sub.add_parser("summarize", help="print the aggregate table for a results file")
    sum_p.add_argument("results", type=Path)

    args = parser.parse_args(argv)
    if args.command == "run":
        try:
            cfg = load_config(args.config)
            overrides = {}
            if args.seed is not None:
                overrides["seed"] = args.seed
            if args.planner is not None:
                overrides["planners"] = (args.planner,)
            if args.episodes is not None:
                overrides["episodes"] = args.episodes
            if overrides:
                cfg = dataclasses.replace(cfg, **overrides)
            out = run_matrix(cfg, args.out, progress=args.progress)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(f"wrote {out}")
        return 0
    return summarize(args.results)


if __name__ == "__main__":
    sys.exit(main())
