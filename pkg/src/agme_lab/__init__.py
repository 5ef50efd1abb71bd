"""Active goal manifold exploration lab: learners, simulated worlds, camera, metrics."""

from .agme import AgmeConfig, RunResult, agme_run, agme_step
from .babbling import BabblingConfig, babbling_run, babbling_step, inverse_model
from .core import (
    DimensionError,
    EmptyRepertoireError,
    InsufficientDataError,
    Repertoire,
    euclidean_distance,
    repertoire_add,
    repertoire_nearest,
)
from .environments import ObservationMode, make_env
from .evaluation import EvalConfig, dispersion, dist_indicator, perf
from .manifold_graph import NeighborStats, knn, select_basis
from .skill import ParameterizedSkill, skill_query

__all__ = [
    "AgmeConfig", "RunResult", "agme_run", "agme_step",
    "BabblingConfig", "babbling_run", "babbling_step", "inverse_model",
    "DimensionError", "EmptyRepertoireError", "InsufficientDataError",
    "Repertoire", "euclidean_distance", "repertoire_add", "repertoire_nearest",
    "ObservationMode", "make_env",
    "EvalConfig", "dispersion", "dist_indicator", "perf",
    "NeighborStats", "knn", "select_basis",
    "ParameterizedSkill", "skill_query",
]
