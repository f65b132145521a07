"""Benchmark fitness functions over normalized solution and task spaces.

Every problem maps (x, theta) in [0,1]^dx x [0,1]^dtheta to a fitness in
[0,1], deterministically.  Three problems are provided:

* ``arm10``      -- place a 10-joint planar arm's end effector on a target;
                    the task sets the joint range and the arm length.
* ``archery``    -- hit a distant target with an arrow under lateral wind;
                    scored by discrete target rings, so the reward is sparse.
* ``linear_toy`` -- optimum is a known affine map of the task; used as an
                    analytic oracle in tests and demos.
"""

from __future__ import annotations

import math
import re

import numpy as np

GRAVITY = 9.81
ARROW_SPEED = 70.0
RING_WIDTH = 0.061  # 122 cm target face, 10 rings per side
ARM_TARGET = (0.5, 0.5)
ARM_JOINTS = 10


class Problem:
    """Stateless fitness definition; safe to evaluate from any thread."""

    name: str
    dx: int
    dtheta: int

    def evaluate(self, x: np.ndarray, theta: np.ndarray) -> float:
        raise NotImplementedError

    def evaluate_batch(self, xs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        return np.array(
            [self.evaluate(x, t) for x, t in zip(xs, thetas)], dtype=float
        )

    def _check_dims(self, x, theta) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if x.shape != (self.dx,):
            raise ValueError(f"{self.name}: x has shape {x.shape}, expected ({self.dx},)")
        if theta.shape != (self.dtheta,):
            raise ValueError(
                f"{self.name}: theta has shape {theta.shape}, expected ({self.dtheta},)"
            )
        return x, theta


def arm_forward_kinematics(angles: np.ndarray, segment_length: float) -> np.ndarray:
    """End-effector position of a planar chain anchored at the origin.

    Joint angles are relative; they accumulate along the chain, and every
    segment has the same length.
    """
    cum = np.cumsum(np.asarray(angles, dtype=float))
    return np.array(
        [segment_length * np.cos(cum).sum(), segment_length * np.sin(cum).sum()]
    )


def arm_fitness(x: np.ndarray, theta: np.ndarray) -> float:
    """Fitness of 10 normalized joint commands for an arm morphology task.

    theta[0] sets the per-joint angular range alpha_max in [0.1, pi] rad and
    theta[1] the total arm length in [0.5, 1.0].  Commands are mapped to
    [-alpha_max, alpha_max]; fitness is exp(-d^2) to the fixed target.
    """
    alpha_max = 0.1 + theta[0] * (math.pi - 0.1)
    total_length = 0.5 + 0.5 * theta[1]
    angles = (2.0 * np.asarray(x, dtype=float) - 1.0) * alpha_max
    ee = arm_forward_kinematics(angles, total_length / ARM_JOINTS)
    d2 = (ee[0] - ARM_TARGET[0]) ** 2 + (ee[1] - ARM_TARGET[1]) ** 2
    return float(np.exp(-d2))


class ArmProblem(Problem):
    name = "arm10"
    dx = ARM_JOINTS
    dtheta = 2

    def evaluate(self, x, theta):
        x, theta = self._check_dims(x, theta)
        return arm_fitness(x, theta)

    def evaluate_batch(self, xs, thetas):
        xs = np.asarray(xs, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        alpha_max = 0.1 + thetas[:, 0] * (math.pi - 0.1)
        seg = (0.5 + 0.5 * thetas[:, 1]) / ARM_JOINTS
        cum = np.cumsum((2.0 * xs - 1.0) * alpha_max[:, None], axis=1)
        ex = seg * np.cos(cum).sum(axis=1)
        ey = seg * np.sin(cum).sum(axis=1)
        d2 = (ex - ARM_TARGET[0]) ** 2 + (ey - ARM_TARGET[1]) ** 2
        return np.exp(-d2)


def archery_fitness(x: np.ndarray, theta: np.ndarray) -> float:
    """Normalized archery score for a (yaw, pitch) shot at a windy target.

    theta[0] sets the target distance in [5, 40] m, theta[1] a constant
    lateral wind acceleration in [-10, 10] m/s^2.  x maps to yaw and pitch
    in [-pi/12, pi/12] rad; the arrow flies at a constant 70 m/s.  The score
    counts 6.1 cm rings around the target center: 10 rings down to 0.
    """
    distance = 5.0 + 35.0 * theta[0]
    wind = -10.0 + 20.0 * theta[1]
    yaw = (2.0 * x[0] - 1.0) * math.pi / 12.0
    pitch = (2.0 * x[1] - 1.0) * math.pi / 12.0

    vx = -math.sin(yaw)
    vy = math.cos(yaw) * math.cos(pitch)
    vz = math.cos(yaw) * math.sin(pitch)
    t = distance / (ARROW_SPEED * vy)
    dx_plane = 0.5 * wind * t * t + ARROW_SPEED * vx * t
    dz_plane = -0.5 * GRAVITY * t * t + ARROW_SPEED * vz * t
    d = math.hypot(dx_plane, dz_plane)
    return max(0.0, math.floor(10.0 - d / RING_WIDTH)) / 10.0


class ArcheryProblem(Problem):
    name = "archery"
    dx = 2
    dtheta = 2

    def evaluate(self, x, theta):
        x, theta = self._check_dims(x, theta)
        return archery_fitness(x, theta)

    def evaluate_batch(self, xs, thetas):
        xs = np.asarray(xs, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        distance = 5.0 + 35.0 * thetas[:, 0]
        wind = -10.0 + 20.0 * thetas[:, 1]
        yaw = (2.0 * xs[:, 0] - 1.0) * (math.pi / 12.0)
        pitch = (2.0 * xs[:, 1] - 1.0) * (math.pi / 12.0)
        vx = -np.sin(yaw)
        vy = np.cos(yaw) * np.cos(pitch)
        vz = np.cos(yaw) * np.sin(pitch)
        t = distance / (ARROW_SPEED * vy)
        dxp = 0.5 * wind * t * t + ARROW_SPEED * vx * t
        dzp = -0.5 * GRAVITY * t * t + ARROW_SPEED * vz * t
        d = np.hypot(dxp, dzp)
        return np.maximum(0.0, np.floor(10.0 - d / RING_WIDTH)) / 10.0


def linear_toy_fitness(
    x: np.ndarray, theta: np.ndarray, coef: np.ndarray, intercept: np.ndarray
) -> float:
    """exp(-||x - (coef @ theta + intercept)||^2): peak value 1 at the optimum."""
    err = np.asarray(x, dtype=float) - (coef @ np.asarray(theta, dtype=float) + intercept)
    return float(np.exp(-(err @ err)))


class LinearToyProblem(Problem):
    """Synthetic problem whose optimum is a known affine map of the task.

    The map (coef, intercept) is drawn from ``seed`` at construction so that
    the optimum stays inside [0.1, 0.9]^dx for every task in the unit cube,
    and has full rank.  ``optimum(theta)`` is the analytic argmax, which makes
    this problem an oracle for end-to-end checks.
    """

    def __init__(self, seed: int = 0, dx: int = 2, dtheta: int = 2):
        self.name = f"linear_toy({seed})"
        self.seed = int(seed)
        self.dx = dx
        self.dtheta = dtheta
        rng = np.random.default_rng(self.seed)
        for _ in range(100):
            raw = rng.uniform(-1.0, 1.0, size=(dx, dtheta))
            span = rng.uniform(0.3, 0.7, size=dx)
            scale = np.abs(raw).sum(axis=1)
            if np.any(scale == 0.0):
                continue
            coef = raw * (span / scale)[:, None]
            if np.linalg.matrix_rank(coef) < min(dx, dtheta):
                continue
            neg = np.minimum(coef, 0.0).sum(axis=1)
            intercept = (0.1 - neg) + rng.uniform(0.0, 1.0, size=dx) * (0.8 - span)
            self.coef = coef
            self.intercept = intercept
            return
        raise RuntimeError("could not draw a full-rank in-range affine map")

    def optimum(self, theta: np.ndarray) -> np.ndarray:
        return self.coef @ np.asarray(theta, dtype=float) + self.intercept

    def evaluate(self, x, theta):
        x, theta = self._check_dims(x, theta)
        return linear_toy_fitness(x, theta, self.coef, self.intercept)

    def evaluate_batch(self, xs, thetas):
        xs = np.asarray(xs, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        err = xs - (thetas @ self.coef.T + self.intercept)
        return np.exp(-(err * err).sum(axis=1))


_LINEAR_TOY_RE = re.compile(r"^linear_toy(?:\((\d+)\))?$")


def get_problem(name: str) -> Problem:
    """Look up a problem by CLI name: arm10, archery, linear_toy(seed)."""
    if name == "arm10":
        return ArmProblem()
    if name == "archery":
        return ArcheryProblem()
    m = _LINEAR_TOY_RE.match(name)
    if m:
        return LinearToyProblem(seed=int(m.group(1) or 0))
    raise ValueError(f"unknown problem {name!r} (try arm10, archery, linear_toy(seed))")
