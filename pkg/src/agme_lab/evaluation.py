"""Success-rate performance of a skill and coverage of a repertoire.

Success is judged on ground-truth states even when learning from images: the
test goal handed to the skill is the rendered frame, but the check compares
the state actually reached with the state the frame depicts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import pdist

from .core import DimensionError, InsufficientDataError, Repertoire, make_rng
from .environments import Environment


@dataclass
class EvalConfig:
    n_goals: int = 100
    epsilon: float = 0.05
    eval_rng_seed: int = 0
    every: int = 100

    def __post_init__(self):
        if self.n_goals < 1:
            raise ValueError("n_goals must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.every < 1:
            raise ValueError("every must be >= 1")

    def schedule(self, trials: int) -> list[int]:
        """Evaluation trials: 0, every, 2*every, ..., and always the last trial."""
        out = list(range(0, trials + 1, self.every))
        if out[-1] != trials:
            out.append(trials)
        return out


class GoalSet(NamedTuple):
    goals: np.ndarray     # (N, outcome_dim)
    states: np.ndarray    # (N, state_dim)
    policies: np.ndarray  # (N, policy_dim) generating policies


def dist_indicator(goal_state, achieved_state, epsilon: float) -> int:
    a = np.asarray(goal_state, dtype=np.float64)
    b = np.asarray(achieved_state, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"state shapes differ: {a.shape} vs {b.shape}")
    return int(float(np.sqrt(np.sum((a - b) ** 2))) <= epsilon)


def sample_goal_set(env: Environment, n: int, rng: np.random.Generator) -> GoalSet:
    drawn = [env.sample_test_goal(rng) for _ in range(n)]
    return GoalSet(np.array([g.goal for g in drawn]),
                   np.array([g.state for g in drawn]),
                   np.array([g.policy for g in drawn]))


def goal_set_for(env: Environment, cfg: EvalConfig) -> GoalSet:
    return sample_goal_set(env, cfg.n_goals, make_rng(cfg.eval_rng_seed, 1))


def perf(skill, env: Environment, cfg: EvalConfig, goals: GoalSet | None = None) -> float:
    """Fraction of test goals whose reached state is within epsilon of the goal state.

    ``skill`` needs ``query(goal)``; ``query_many(goals)`` is used when present.
    Evaluation trials are never added to any repertoire.
    """
    if goals is None:
        goals = goal_set_for(env, cfg)
    if hasattr(skill, "query_many"):
        policies = skill.query_many(goals.goals)
    else:
        policies = [skill.query(g) for g in goals.goals]
    hits = 0
    for policy, state in zip(policies, goals.states):
        hits += dist_indicator(state, env.state_of(policy), cfg.epsilon)
    return hits / len(goals.states)


def dispersion(repertoire: Repertoire, env: Environment | None = None) -> float:
    """Mean pairwise Euclidean distance between the ground-truth states of all outcomes."""
    if len(repertoire) < 2:
        raise InsufficientDataError("dispersion needs at least 2 outcomes")
    states = repertoire.states
    if states is None:
        if env is None:
            raise ValueError("repertoire has no states; pass the environment")
        states = np.array([env.state_of(p) for p in repertoire.policies])
    return float(np.mean(pdist(states)))
