"""Experiment orchestration: configs, replicates, metrics and snapshot files.

Output tree for ``run_experiment``::

    <output_dir>/run_config.json          resolved configuration
    <output_dir>/seed_<s>/metrics.csv     trial,perf,dispersion,repertoire_size
    <output_dir>/seed_<s>/outcomes_t<t>.csv   repertoire dump at snapshot trial t
    <output_dir>/seed_<s>/snapshot_t<t>.ppm   all ground-truth states so far

Everything written is a pure function of the config and seed, so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import camera
from .agme import AgmeConfig, agme_run
from .babbling import BabblingConfig, babbling_run
from .core import Repertoire, read_repertoire_csv, write_repertoire_csv
from .environments import ENVIRONMENTS, Environment, ObservationMode, make_env
from .evaluation import EvalConfig, dispersion, goal_set_for, perf
from .skill import ParameterizedSkill

OUTPUT_ROOT_ENV = "AGME_LAB_OUTPUT_ROOT"
CONFIG_NAME = "run_config.json"
METRICS_HEADER = ["trial", "perf", "dispersion", "repertoire_size"]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ComparisonError(ValueError):
    pass


@dataclass
class AgmeBlock:
    k: int = 5
    sigma: list[float] | None = None
    trials: int = 2000


@dataclass
class BabblingBlock:
    sigma_bubble: float = 0.05
    sigma_policy: list[float] | None = None
    k_inverse: int = 3
    trials: int = 2000


@dataclass
class EvalBlock:
    n_goals: int = 100
    epsilon: float = 0.05
    eval_rng_seed: int = 0
    every: int = 100


@dataclass
class RunConfig:
    environment: str
    mode: str = "ground_truth"
    algorithm: str = "agme"
    agme: AgmeBlock = field(default_factory=AgmeBlock)
    babbling: BabblingBlock = field(default_factory=BabblingBlock)
    eval: EvalBlock = field(default_factory=EvalBlock)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    snapshot_trials: list[int] = field(default_factory=lambda: [100, 500, 2000])
    output_dir: str = "runs/default"
    dump_outcomes: bool = True

    @property
    def trials(self) -> int:
        return self.agme.trials if self.algorithm == "agme" else self.babbling.trials

    def to_dict(self) -> dict:
        return asdict(self)

    def eval_config(self) -> EvalConfig:
        return EvalConfig(**asdict(self.eval))

    def algorithm_config(self, seed: int) -> AgmeConfig | BabblingConfig:
        if self.algorithm == "agme":
            return AgmeConfig(sigma=self.agme.sigma, k=self.agme.k, trials=self.agme.trials,
                              rng_seed=seed)
        return BabblingConfig(sigma_policy=self.babbling.sigma_policy,
                              sigma_bubble=self.babbling.sigma_bubble,
                              k_inverse=self.babbling.k_inverse,
                              trials=self.babbling.trials, rng_seed=seed)


# -- parsing & validation ---------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _block(cls, data, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(path, "must be an object")
    names = {f.name for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}", "unknown key")
    return cls(**data)


def _check_int(value, path: str, minimum: int) -> None:
    if not _is_int(value) or value < minimum:
        raise ConfigError(path, f"must be an integer >= {minimum}")


def _check_sigma(value, path: str, policy_dim: int, positive: bool) -> list[float]:
    if not isinstance(value, list) or not all(_is_real(v) for v in value):
        raise ConfigError(path, "must be a list of numbers")
    if len(value) != policy_dim:
        raise ConfigError(path, f"has length {len(value)}, environment policy_dim is {policy_dim}")
    if any(v < 0 or (positive and v == 0) for v in value):
        raise ConfigError(path, "entries must be " + ("> 0" if positive else ">= 0"))
    return [float(v) for v in value]


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    """Build and fully validate a :class:`RunConfig`; errors name the offending field."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be an object")
    names = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in names:
            raise ConfigError(key, "unknown key")
    if "environment" not in data:
        raise ConfigError("environment", "required")
    env_name = data["environment"]
    if env_name not in ENVIRONMENTS:
        raise ConfigError("environment", f"must be one of {sorted(ENVIRONMENTS)}")
    mode = data.get("mode", "ground_truth")
    if mode not in [m.value for m in ObservationMode]:
        raise ConfigError("mode", "must be 'ground_truth' or 'image'")
    algorithm = data.get("algorithm", "agme")
    if algorithm not in ("agme", "babbling"):
        raise ConfigError("algorithm", "must be 'agme' or 'babbling'")

    try:
        agme = _block(AgmeBlock, data.get("agme"), "agme")
        babbling = _block(BabblingBlock, data.get("babbling"), "babbling")
        ev = _block(EvalBlock, data.get("eval"), "eval")
    except TypeError as exc:  # pragma: no cover - dataclass signature mismatch
        raise ConfigError("<block>", str(exc)) from exc

    policy_dim = ENVIRONMENTS[env_name].policy_dim
    default_sigma = list(ENVIRONMENTS[env_name].default_sigma)
    _check_int(agme.k, "agme.k", 1)
    _check_int(agme.trials, "agme.trials", 0)
    agme.sigma = _check_sigma(default_sigma if agme.sigma is None else agme.sigma,
                              "agme.sigma", policy_dim, positive=False)
    _check_int(babbling.k_inverse, "babbling.k_inverse", 1)
    _check_int(babbling.trials, "babbling.trials", 0)
    if not _is_real(babbling.sigma_bubble) or babbling.sigma_bubble < 0:
        raise ConfigError("babbling.sigma_bubble", "must be a number >= 0")
    babbling.sigma_bubble = float(babbling.sigma_bubble)
    babbling.sigma_policy = _check_sigma(
        default_sigma if babbling.sigma_policy is None else babbling.sigma_policy,
        "babbling.sigma_policy", policy_dim, positive=False)
    _check_int(ev.n_goals, "eval.n_goals", 1)
    _check_int(ev.every, "eval.every", 1)
    _check_int(ev.eval_rng_seed, "eval.eval_rng_seed", 0)
    if not _is_real(ev.epsilon) or ev.epsilon <= 0:
        raise ConfigError("eval.epsilon", "must be a number > 0")
    ev.epsilon = float(ev.epsilon)

    seeds = data.get("seeds", [0, 1, 2, 3, 4])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds", "must be a non-empty list")
    for i, s in enumerate(seeds):
        _check_int(s, f"seeds[{i}]", 0)
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds", "must not repeat")
    snaps = data.get("snapshot_trials", [100, 500, 2000])
    if not isinstance(snaps, list):
        raise ConfigError("snapshot_trials", "must be a list")
    for i, t in enumerate(snaps):
        _check_int(t, f"snapshot_trials[{i}]", 0)
    output_dir = data.get("output_dir", "runs/default")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir", "must be a non-empty string")
    dump = data.get("dump_outcomes", True)
    if not isinstance(dump, bool):
        raise ConfigError("dump_outcomes", "must be true or false")
    return RunConfig(env_name, mode, algorithm, agme, babbling, ev, list(seeds),
                     sorted(set(snaps)), output_dir, dump)


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    for dotted, value in (overrides or {}).items():
        apply_override(data, dotted, value)
    return config_from_dict(data)


def apply_override(data: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, "cannot override inside a non-object")
    node[keys[-1]] = value


def resolve_output_dir(output_dir: str) -> Path:
    path = Path(output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


# -- running ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def run_replicate(cfg: RunConfig, seed: int, out_dir: Path) -> Path:
    """Run one seed and write its files under ``out_dir/seed_<seed>``."""
    env = make_env(cfg.environment, cfg.mode)
    ecfg = cfg.eval_config()
    goals = goal_set_for(env, ecfg)
    trials = cfg.trials
    seed_dir = out_dir / f"seed_{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)

    def evaluate(t: int, r: Repertoire) -> dict:
        return {
            "perf": perf(ParameterizedSkill(r), env, ecfg, goals),
            "dispersion": dispersion(r) if len(r) >= 2 else 0.0,
            "repertoire_size": len(r),
        }

    def snapshot(t: int, r: Repertoire) -> dict:
        if cfg.dump_outcomes:
            write_repertoire_csv(seed_dir / f"outcomes_t{t}.csv", r.outcomes, r.policies)
        camera.write_ppm(seed_dir / f"snapshot_t{t}.ppm", env.snapshot(r.states))
        return {}

    hooks = [(ecfg.schedule(trials), evaluate),
             ([t for t in cfg.snapshot_trials if t <= trials], snapshot)]
    algo_cfg = cfg.algorithm_config(seed)
    run = agme_run if cfg.algorithm == "agme" else babbling_run
    result = run(env, algo_cfg, hooks)

    with open(seed_dir / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for row in result.metrics:
            if "perf" in row:
                w.writerow([row["trial"], _fmt(row["perf"]), _fmt(row["dispersion"]),
                            row["repertoire_size"]])
    return seed_dir


def run_experiment(cfg: RunConfig, jobs: int = 1) -> list[Path]:
    """Run every replicate seed; returns the per-seed output directories."""
    out_dir = resolve_output_dir(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / CONFIG_NAME).write_text(
            json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write to output directory {out_dir}: {exc}") from exc
    if jobs <= 1 or len(cfg.seeds) == 1:
        return [run_replicate(cfg, s, out_dir) for s in cfg.seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_replicate, cfg, s, out_dir) for s in cfg.seeds]
        return [f.result() for f in futures]


# -- reading results back ---------------------------------------------------

def read_metrics(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != METRICS_HEADER:
        raise ComparisonError(f"{path}: unexpected header")
    body = rows[1:]
    return {
        "trial": np.array([int(r[0]) for r in body]),
        "perf": np.array([float(r[1]) for r in body]),
        "dispersion": np.array([float(r[2]) for r in body]),
        "repertoire_size": np.array([int(r[3]) for r in body]),
    }


def _seed_dirs(run_dir: Path) -> list[Path]:
    return sorted(p for p in run_dir.glob("seed_*") if p.is_dir())


def mean_curve(run_dir: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial perf averaged over seeds, after checking every seed shares one schedule."""
    run_dir = Path(run_dir)
    seeds = _seed_dirs(run_dir)
    if not seeds:
        raise ComparisonError(f"{run_dir}: no seed_* directories")
    curves = []
    for d in seeds:
        path = d / "metrics.csv"
        if not path.is_file():
            raise ComparisonError(f"{path}: missing metrics file")
        curves.append(read_metrics(path))
    trials = curves[0]["trial"]
    for c in curves[1:]:
        if not np.array_equal(c["trial"], trials):
            raise ComparisonError(f"{run_dir}: seeds disagree on the evaluation schedule")
    return trials, np.mean([c["perf"] for c in curves], axis=0)


def compare_runs(dir_a: str | Path, dir_b: str | Path) -> dict:
    trials_a, mean_a = mean_curve(dir_a)
    trials_b, mean_b = mean_curve(dir_b)
    if not np.array_equal(trials_a, trials_b):
        raise ComparisonError("runs were evaluated on different schedules")
    diff = mean_a - mean_b
    return {
        "trial": trials_a.tolist(),
        "mean_perf_a": mean_a.tolist(),
        "mean_perf_b": mean_b.tolist(),
        "difference": diff.tolist(),
        "final_difference": float(diff[-1]),
    }


def env_for_dump(dump: str | Path, config: str | Path | None = None) -> Environment:
    """Environment described by the run config next to a dump (or an explicit one)."""
    path = Path(config) if config else Path(dump).resolve().parent.parent / CONFIG_NAME
    if not path.is_file():
        raise ConfigError(str(path), "run config not found; pass --config")
    cfg = config_from_dict(json.loads(path.read_text(encoding="utf-8")))
    return make_env(cfg.environment, cfg.mode)


def replay(outcomes: np.ndarray, policies: np.ndarray, env: Environment,
           index: int) -> tuple[np.ndarray, bool]:
    """Re-execute stored policy ``index``; returns the outcome and whether it matches bit for bit."""
    if not 0 <= index < len(policies):
        raise IndexError(f"dump has {len(policies)} rows, no row {index}")
    got = env.execute(policies[index])
    return got, bool(np.array_equal(got, outcomes[index]))


def replay_dump(dump: str | Path, env: Environment) -> float:
    """Fraction of dump rows whose stored policy reproduces the stored outcome."""
    outcomes, policies = read_repertoire_csv(dump)
    matches = sum(replay(outcomes, policies, env, i)[1] for i in range(len(policies)))
    return matches / len(policies)
