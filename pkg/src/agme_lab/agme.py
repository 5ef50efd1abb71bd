"""Active Goal Manifold Exploration.

Each trial picks the stored outcome lying farthest from its k nearest stored
neighbours, perturbs the policy that produced it with Gaussian noise, runs
the result, and stores the new (outcome, policy) pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import DimensionError, Repertoire, make_rng
from .environments import Environment
from .manifold_graph import NeighborGraph, knn, select_basis

# A hook is (trial numbers, callback); the callback gets (trial, repertoire)
# and returns a dict of metrics to log for that trial.
Hook = tuple[Iterable[int], Callable[[int, Repertoire], dict]]


@dataclass
class AgmeConfig:
    sigma: Sequence[float]
    k: int = 5
    trials: int = 2000
    rng_seed: int = 0

    def __post_init__(self):
        self.sigma = tuple(float(s) for s in self.sigma)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if any(s < 0 for s in self.sigma):
            raise ValueError("sigma entries must be >= 0")


@dataclass
class RunResult:
    repertoire: Repertoire
    metrics: list[dict] = field(default_factory=list)


def new_repertoire(env: Environment) -> Repertoire:
    return Repertoire(env.outcome_dim, env.policy_dim, env.state_dim)


def seed_repertoire(env: Environment) -> Repertoire:
    r = new_repertoire(env)
    policy = env.seed_policy()
    outcome, state = env.execute_with_state(policy)
    return r.add(outcome, policy, state)


def _check_sigma(sigma: Sequence[float], env: Environment) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.float64)
    if s.shape != (env.policy_dim,):
        raise DimensionError(f"sigma has length {s.shape[0]}, policy_dim is {env.policy_dim}")
    return s


def agme_step(r: Repertoire, env: Environment, cfg: AgmeConfig, rng: np.random.Generator,
              graph: NeighborGraph | None = None) -> Repertoire:
    """One exploration trial; grows ``r`` by one pair and returns it.

    Without ``graph`` the neighbour graph is rebuilt from scratch.  With one,
    ``graph`` must already cover every stored outcome and is updated in place;
    both paths pick the same basis.
    """
    if len(r) == 0:
        raise ValueError("repertoire must be seeded")
    sigma = _check_sigma(cfg.sigma, env)
    if graph is not None:
        basis = graph.basis()
    elif len(r) == 1:
        basis = 0
    else:
        basis = select_basis(knn(r.outcomes, cfg.k))
    policy = r.policies[basis] + rng.standard_normal(env.policy_dim) * sigma
    outcome, state = env.execute_with_state(policy)
    r.add(outcome, policy, state)
    if graph is not None:
        graph.add(r.outcomes, r.sqnorms, r.canon)
    return r


def run_loop(r: Repertoire, trials: int, step: Callable[[], None],
             hooks: Sequence[Hook] = ()) -> list[dict]:
    """Drive ``step`` for ``trials`` trials, firing hooks after trial 0..trials."""
    schedules = [(set(int(t) for t in when), fn) for when, fn in hooks]
    log: list[dict] = []

    def fire(t):
        row = {}
        for when, fn in schedules:
            if t in when:
                row.update(fn(t, r) or {})
        if row:
            log.append({"trial": t, **row})

    fire(0)
    for t in range(1, trials + 1):
        step()
        fire(t)
    return log


def agme_run(env: Environment, cfg: AgmeConfig, hooks: Sequence[Hook] = ()) -> RunResult:
    _check_sigma(cfg.sigma, env)
    rng = make_rng(cfg.rng_seed, 0)
    r = seed_repertoire(env)
    graph = NeighborGraph(cfg.k)
    graph.add(r.outcomes, r.sqnorms, r.canon)
    log = run_loop(r, cfg.trials, lambda: agme_step(r, env, cfg, rng, graph), hooks)
    return RunResult(r, log)
