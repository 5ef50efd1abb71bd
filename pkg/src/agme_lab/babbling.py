"""Simplified skill-babbling baseline.

A trial draws a random known outcome, jitters it inside a Gaussian "bubble"
to get a target, maps the target to a policy with a distance-weighted k-NN
inverse model, adds policy noise, and stores what actually happened.  Goal
noise in a high-dimensional sensor space rarely lands on an achievable
outcome, which is the weakness AGME avoids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .agme import Hook, RunResult, _check_sigma, run_loop, seed_repertoire
from .core import EmptyRepertoireError, Repertoire, as_vector, make_rng
from .environments import Environment


@dataclass
class BabblingConfig:
    sigma_policy: Sequence[float]
    sigma_bubble: float = 0.05
    k_inverse: int = 3
    trials: int = 2000
    rng_seed: int = 0

    def __post_init__(self):
        self.sigma_policy = tuple(float(s) for s in self.sigma_policy)
        if self.k_inverse < 1:
            raise ValueError("k_inverse must be >= 1")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if self.sigma_bubble < 0 or any(s < 0 for s in self.sigma_policy):
            raise ValueError("noise scales must be >= 0")


def inverse_model(r: Repertoire, target, k_inverse: int = 3) -> np.ndarray:
    """Inverse-distance weighted mean of the policies of the nearest outcomes."""
    if len(r) == 0:
        raise EmptyRepertoireError("repertoire is empty")
    target = as_vector(target, r.outcome_dim, "target")
    idx, d = r.k_nearest(target, k_inverse)
    if d[0] == 0.0:
        return r.policies[idx[0]].copy()
    w = 1.0 / (d + 1e-9)
    w /= w.sum()
    return w @ r.policies[idx]


def babbling_step(r: Repertoire, env: Environment, cfg: BabblingConfig,
                  rng: np.random.Generator) -> Repertoire:
    if len(r) == 0:
        raise ValueError("repertoire must be seeded")
    sigma = _check_sigma(cfg.sigma_policy, env)
    anchor = r.outcomes[int(rng.integers(len(r)))]
    target = anchor + rng.standard_normal(r.outcome_dim) * cfg.sigma_bubble
    policy = inverse_model(r, target, cfg.k_inverse) + rng.standard_normal(env.policy_dim) * sigma
    outcome, state = env.execute_with_state(policy)
    return r.add(outcome, policy, state)


def babbling_run(env: Environment, cfg: BabblingConfig, hooks: Sequence[Hook] = ()) -> RunResult:
    _check_sigma(cfg.sigma_policy, env)
    rng = make_rng(cfg.rng_seed, 0)
    r = seed_repertoire(env)
    log = run_loop(r, cfg.trials, lambda: babbling_step(r, env, cfg, rng), hooks)
    return RunResult(r, log)
