"""The four simulated worlds: arm, linear pusher, DMP pusher, color touch.

Every world lives in the unit square with its center at (0.5, 0.5).  A policy
is a flat float vector; out-of-range entries are clamped at execution time so
any Gaussian perturbation stays executable.  Each execution starts from a
reset scene (object at the center, colored red), so trials never interact.

An environment reports outcomes either as a 2-D ground-truth state or as the
flattened 50x50 RGB camera frame of the final scene.  The ground-truth state
is always available separately for evaluation.
"""

from __future__ import annotations

import colorsys
import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import camera
from .core import as_vector
from .dmp import DEFAULT_SPEC, DmpIntegrationSpec, DmpParams, N_BASIS, dmp_rollout

CENTER = np.array([0.5, 0.5])
OBJECT_RADIUS = 0.1
LINK_LENGTHS = (0.15, 0.15, 0.15)
JOINT_LIMIT = math.pi / 3
DMP_START = (0.5, 0.1)
DMP_WEIGHT_LIMIT = 100.0
DMP_SAMPLER_WEIGHT = 50.0
MAX_SAMPLER_ATTEMPTS = 10_000


class ObservationMode(str, Enum):
    GROUND_TRUTH = "ground_truth"
    IMAGE = "image"


class SamplerExhaustedError(RuntimeError):
    """Rejection sampling of a test goal gave up."""


class Hit(NamedTuple):
    """Contact of a segment with a circle.

    ``point`` is the first boundary crossing seen from the segment start, or
    the start itself when ``inside`` (the segment starts within the circle).
    """
    point: tuple[float, float]
    inside: bool


class TestGoal(NamedTuple):
    goal: np.ndarray      # sensor-space goal vector
    state: np.ndarray     # ground-truth state it depicts
    policy: np.ndarray    # a policy known to achieve it

    __test__ = False  # keep pytest from collecting this as a test class


# -- geometry ---------------------------------------------------------------

def segment_circle_hit(p1, p2, center=CENTER, radius: float = OBJECT_RADIUS) -> Hit | None:
    """First contact of segment p1->p2 with a circle; tangency counts as contact."""
    x1, y1 = float(p1[0]), float(p1[1])
    dx, dy = float(p2[0]) - x1, float(p2[1]) - y1
    fx, fy = x1 - float(center[0]), y1 - float(center[1])
    c = fx * fx + fy * fy - radius * radius
    if c < 0.0:
        return Hit((x1, y1), True)
    if c == 0.0:
        return Hit((x1, y1), False)
    a = dx * dx + dy * dy
    if a == 0.0:
        return None
    b = 2.0 * (fx * dx + fy * dy)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    t = (-b - math.sqrt(disc)) / (2.0 * a)
    if not 0.0 <= t <= 1.0:
        return None
    return Hit((x1 + t * dx, y1 + t * dy), False)


def polyline_hits_circle(points: np.ndarray, center=CENTER, radius: float = OBJECT_RADIUS) -> bool:
    """Whether any consecutive segment of ``points`` makes contact (same rule as above)."""
    p1 = points[:-1]
    d = points[1:] - p1
    f = p1 - np.asarray(center, dtype=np.float64)
    c = np.einsum("ij,ij->i", f, f) - radius * radius
    if np.any(c <= 0.0):
        return True
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", f, d)
    disc = b * b - 4.0 * a * c
    ok = (a > 0.0) & (disc >= 0.0)
    if not np.any(ok):
        return False
    t = (-b[ok] - np.sqrt(disc[ok])) / (2.0 * a[ok])
    return bool(np.any((t >= 0.0) & (t <= 1.0)))


def arm_points(joints) -> np.ndarray:
    """Base, elbow, wrist and tip positions for clamped relative joint angles."""
    q = np.clip(np.asarray(joints, dtype=np.float64), -JOINT_LIMIT, JOINT_LIMIT)
    pts = [CENTER.copy()]
    angle = 0.0
    for qi, length in zip(q, LINK_LENGTHS):
        angle += qi
        pts.append(pts[-1] + length * np.array([math.cos(angle), math.sin(angle)]))
    return np.array(pts)


def arm_fk(joints) -> np.ndarray:
    return arm_points(joints)[-1]


def hue_color(angle: float) -> tuple[float, float, float]:
    """Fully saturated color whose hue is the contact angle as a fraction of a turn."""
    hue = (angle / (2.0 * math.pi)) % 1.0
    return colorsys.hsv_to_rgb(hue, 1.0, 1.0)


# -- environments -----------------------------------------------------------

class Environment(ABC):
    """Executable world: policy in, outcome out."""

    name: str
    policy_dim: int
    state_dim = 2
    # Default AGME exploration noise, one entry per policy dimension.
    default_sigma: tuple[float, ...]
    snapshot_color = camera.RED

    def __init__(self, mode: ObservationMode | str = ObservationMode.GROUND_TRUTH):
        self.mode = ObservationMode(mode)
        self._last_state: np.ndarray | None = None

    @property
    def outcome_dim(self) -> int:
        return self.state_dim if self.mode is ObservationMode.GROUND_TRUTH else camera.SENSOR_DIM

    @property
    def observation_mode(self) -> ObservationMode:
        return self.mode

    def clone(self) -> "Environment":
        return type(self)(self.mode)

    @abstractmethod
    def clamp(self, policy: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def simulate(self, policy) -> tuple[np.ndarray, np.ndarray | None]:
        """Run one trial from a reset scene.

        Returns the ground-truth state and, in image mode, the flattened frame.
        """

    @abstractmethod
    def seed_policy(self) -> np.ndarray:
        ...

    @abstractmethod
    def _sample_policy(self, rng: np.random.Generator) -> np.ndarray:
        ...

    def _check(self, policy) -> np.ndarray:
        return self.clamp(as_vector(policy, self.policy_dim, "policy"))

    def execute(self, policy) -> np.ndarray:
        state, frame = self.simulate(policy)
        self._last_state = state
        return state.copy() if frame is None else frame

    def execute_with_state(self, policy) -> tuple[np.ndarray, np.ndarray]:
        outcome = self.execute(policy)
        return outcome, self._last_state.copy()

    def ground_truth_of_last(self) -> np.ndarray:
        if self._last_state is None:
            raise RuntimeError("no policy executed yet")
        return self._last_state.copy()

    def state_of(self, policy) -> np.ndarray:
        saved = self.mode
        try:
            self.mode = ObservationMode.GROUND_TRUTH
            return self.simulate(policy)[0]
        finally:
            self.mode = saved

    def sample_test_goal(self, rng: np.random.Generator) -> TestGoal:
        policy = self._sample_policy(rng)
        state, frame = self.simulate(policy)
        goal = state.copy() if frame is None else frame
        return TestGoal(goal, state, policy)

    def snapshot(self, states: np.ndarray) -> np.ndarray:
        """Superposition frame: every ground-truth state drawn as a one-pixel dot."""
        img = camera.raster_clear(camera.WHITE)
        for s in states:
            camera.raster_disk(img, s, 0.5 / camera.PX_PER_UNIT, self.snapshot_color)
        return img


class ArmEnv(Environment):
    """Planar 3-link arm based at the workspace center; outcome is the tip."""

    name = "arm"
    policy_dim = 3
    default_sigma = (0.15, 0.15, 0.15)
    snapshot_color = camera.BLUE

    def clamp(self, policy):
        return np.clip(policy, -JOINT_LIMIT, JOINT_LIMIT)

    def simulate(self, policy):
        q = self._check(policy)
        pts = arm_points(q)
        frame = camera.render_arm(pts) if self.mode is ObservationMode.IMAGE else None
        return pts[-1].copy(), frame

    def seed_policy(self):
        return np.zeros(3)

    def _sample_policy(self, rng):
        return rng.uniform(-JOINT_LIMIT, JOINT_LIMIT, size=3)


class _ObjectEnv(Environment):
    def _frame(self, center, color):
        if self.mode is ObservationMode.IMAGE:
            return camera.render_object(center, OBJECT_RADIUS, color)
        return None


class LinearPusherEnv(_ObjectEnv):
    """A straight stroke (x1, y1) -> (x2, y2); contact teleports the object to (x2, y2)."""

    name = "pusher_linear"
    policy_dim = 4
    default_sigma = (0.1, 0.1, 0.1, 0.1)

    def clamp(self, policy):
        return np.clip(policy, 0.0, 1.0)

    def simulate(self, policy):
        p = self._check(policy)
        obj = CENTER.copy()
        if segment_circle_hit(p[:2], p[2:], CENTER, OBJECT_RADIUS) is not None:
            obj = p[2:].copy()
        return obj, self._frame(obj, camera.RED)

    def seed_policy(self):
        return np.array([0.3, 0.5, 0.7, 0.5])

    def _sample_policy(self, rng):
        end = rng.uniform(0.0, 1.0, size=2)
        # Reflecting the end through the center guarantees the stroke crosses it.
        return np.concatenate([2.0 * CENTER - end, end])


class DmpPusherEnv(_ObjectEnv):
    """A DMP stroke from a fixed start; contact teleports the object to the stroke's end."""

    name = "pusher_dmp"
    policy_dim = 2 * N_BASIS + 2
    default_sigma = (15.0,) * (2 * N_BASIS) + (0.1, 0.1)

    def __init__(self, mode=ObservationMode.GROUND_TRUTH, spec: DmpIntegrationSpec = DEFAULT_SPEC):
        super().__init__(mode)
        self.spec = spec

    def clone(self):
        return type(self)(self.mode, self.spec)

    def clamp(self, policy):
        out = np.clip(policy, -DMP_WEIGHT_LIMIT, DMP_WEIGHT_LIMIT)
        out[-2:] = np.clip(policy[-2:], 0.0, 1.0)
        return out

    def rollout(self, policy) -> np.ndarray:
        return dmp_rollout(DmpParams.from_vector(self._check(policy), DMP_START), self.spec)

    def simulate(self, policy):
        path = self.rollout(policy)
        obj = CENTER.copy()
        if polyline_hits_circle(path, CENTER, OBJECT_RADIUS):
            obj = np.clip(path[-1], 0.0, 1.0)
        return obj, self._frame(obj, camera.RED)

    def seed_policy(self):
        # Zero forcing: a straight stroke from the start up through the center.
        return np.concatenate([np.zeros(2 * N_BASIS), [0.5, 0.9]])

    def _sample_policy(self, rng):
        for _ in range(MAX_SAMPLER_ATTEMPTS):
            w = rng.uniform(-DMP_SAMPLER_WEIGHT, DMP_SAMPLER_WEIGHT, size=2 * N_BASIS)
            goal = rng.uniform(0.0, 1.0, size=2)
            policy = np.concatenate([w, goal])
            if polyline_hits_circle(self.rollout(policy), CENTER, OBJECT_RADIUS):
                return policy
        raise SamplerExhaustedError(f"no contacting DMP after {MAX_SAMPLER_ATTEMPTS} draws")


class ColorEnv(_ObjectEnv):
    """A straight stroke recolors the object by where it first touches the rim.

    The ground-truth outcome is the touched rim point; a miss (or a stroke that
    starts inside the object) leaves the object red and reports the center.
    """

    name = "color"
    policy_dim = 4
    default_sigma = (0.1, 0.1, 0.1, 0.1)

    def clamp(self, policy):
        return np.clip(policy, 0.0, 1.0)

    def simulate(self, policy):
        p = self._check(policy)
        hit = segment_circle_hit(p[:2], p[2:], CENTER, OBJECT_RADIUS)
        if hit is None or hit.inside:
            return CENTER.copy(), self._frame(CENTER, camera.RED)
        point = np.array(hit.point)
        angle = math.atan2(point[1] - CENTER[1], point[0] - CENTER[0])
        return point, self._frame(CENTER, hue_color(angle))

    def seed_policy(self):
        return np.array([1.0, 0.5, 0.5, 0.5])

    def _sample_policy(self, rng):
        phi = rng.uniform(0.0, 2.0 * math.pi)
        outer = CENTER + 0.4 * np.array([math.cos(phi), math.sin(phi)])
        return np.concatenate([outer, CENTER])

    def snapshot(self, states):
        img = camera.raster_clear(camera.WHITE)
        for s in states:
            delta = s - CENTER
            if delta @ delta == 0.0:
                color = camera.RED
            else:
                color = hue_color(math.atan2(delta[1], delta[0]))
            camera.raster_disk(img, s, 0.5 / camera.PX_PER_UNIT, color)
        return img


ENVIRONMENTS: dict[str, type[Environment]] = {
    cls.name: cls for cls in (ArmEnv, LinearPusherEnv, DmpPusherEnv, ColorEnv)
}


def make_env(name: str, mode: ObservationMode | str = ObservationMode.GROUND_TRUTH) -> Environment:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(mode)
