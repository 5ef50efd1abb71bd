"""Parameterized skill: goal -> policy by 1-nearest-neighbour lookup."""

from __future__ import annotations

import numpy as np

from .core import EmptyRepertoireError, Repertoire


class ParameterizedSkill:
    """Read-only view of a repertoire answering goals with the closest outcome's policy."""

    def __init__(self, repertoire: Repertoire):
        self._rep = repertoire

    def __len__(self) -> int:
        return len(self._rep)

    def query(self, goal) -> np.ndarray:
        if len(self._rep) == 0:
            raise EmptyRepertoireError("skill has no stored outcomes")
        return self._rep.policies[self._rep.nearest(goal)].copy()

    def query_many(self, goals) -> np.ndarray:
        if len(self._rep) == 0:
            raise EmptyRepertoireError("skill has no stored outcomes")
        return self._rep.policies[self._rep.nearest_many(goals)].copy()


def skill_query(skill: ParameterizedSkill, goal) -> np.ndarray:
    return skill.query(goal)
