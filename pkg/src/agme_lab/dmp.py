"""Discrete dynamic movement primitive producing 2-D end-effector paths.

Per axis, a critically damped spring pulls the effector toward the goal while
a phase-gated forcing term bends the path:

    phase:      ds/dt  = -alpha_s * s,                s(0) = 1
    forcing:    f(s)   = s * sum_i psi_i(s) w_i / sum_i psi_i(s)
    transform:  y''    = alpha_z * (beta_z * (g - y) - y') + f(s)

integrated with explicit Euler from rest at ``start``.  Forcing is not scaled
by (g - start), so the same weights bend the path equally whatever the goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

N_BASIS = 5


class NumericError(ArithmeticError):
    """Non-finite DMP parameters."""


@dataclass(frozen=True)
class DmpParams:
    weights_x: tuple[float, ...]
    weights_y: tuple[float, ...]
    goal: tuple[float, float]
    start: tuple[float, float]

    @classmethod
    def from_vector(cls, vec, start) -> "DmpParams":
        """Unpack a flat policy laid out as 5 x-weights, 5 y-weights, goal (x, y)."""
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (2 * N_BASIS + 2,):
            raise ValueError(f"DMP policy must have {2 * N_BASIS + 2} entries, got {v.shape}")
        return cls(tuple(v[:N_BASIS]), tuple(v[N_BASIS: 2 * N_BASIS]),
                   (float(v[-2]), float(v[-1])), (float(start[0]), float(start[1])))


@dataclass(frozen=True)
class DmpIntegrationSpec:
    alpha_z: float = 25.0
    beta_z: float = 6.25
    alpha_s: float = 4.0
    steps: int = 150
    dt: float = 0.01
    # Activation of each Gaussian at its neighbour's center.
    overlap: float = 0.55

    def refined(self, factor: int = 2) -> "DmpIntegrationSpec":
        return DmpIntegrationSpec(self.alpha_z, self.beta_z, self.alpha_s,
                                  self.steps * factor, self.dt / factor, self.overlap)

    @cached_property
    def centers(self) -> np.ndarray:
        # Evenly spaced in time over the first unit of time, hence log-spaced in phase.
        return np.exp(-self.alpha_s * np.linspace(0.0, 1.0, N_BASIS))

    @cached_property
    def widths(self) -> np.ndarray:
        gaps = -np.diff(self.centers)
        gaps = np.append(gaps, gaps[-1])
        return -math.log(self.overlap) / gaps**2

    @cached_property
    def forcing_basis(self) -> np.ndarray:
        """(steps, N_BASIS) matrix B with f_n = B[n] @ w along the Euler phase sequence."""
        s = np.empty(self.steps)
        s[0] = 1.0
        for n in range(1, self.steps):
            s[n] = s[n - 1] - self.alpha_s * s[n - 1] * self.dt
        psi = np.exp(-self.widths[None, :] * (s[:, None] - self.centers[None, :]) ** 2)
        basis = s[:, None] * psi / psi.sum(axis=1, keepdims=True)
        basis.flags.writeable = False
        return basis

    def final_phase(self) -> float:
        return (1.0 - self.alpha_s * self.dt) ** self.steps


DEFAULT_SPEC = DmpIntegrationSpec()


def dmp_rollout(p: DmpParams, spec: DmpIntegrationSpec = DEFAULT_SPEC) -> np.ndarray:
    """Integrate the DMP; returns the ``steps + 1`` visited points, shape (steps+1, 2)."""
    w = np.array([p.weights_x, p.weights_y], dtype=np.float64)
    g = np.array(p.goal, dtype=np.float64)
    y0 = np.array(p.start, dtype=np.float64)
    if w.shape != (2, N_BASIS):
        raise ValueError(f"need {N_BASIS} weights per axis")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(g)) and np.all(np.isfinite(y0))):
        raise NumericError("DMP parameters must be finite")
    forcing = spec.forcing_basis @ w.T  # (steps, 2)
    az, bz, dt = spec.alpha_z, spec.beta_z, spec.dt
    out = np.empty((spec.steps + 1, 2))
    for axis in range(2):
        y, v, goal = float(y0[axis]), 0.0, float(g[axis])
        col = forcing[:, axis].tolist()
        ys = [y]
        for f in col:
            a = az * (bz * (goal - y) - v) + f
            y, v = y + dt * v, v + dt * a
            ys.append(y)
        out[:, axis] = ys
    return out
