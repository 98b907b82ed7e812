"""Planar two-link arm and a delayed, noisy sensor channel."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ArmModel:
    l1: float = 0.24
    l2: float = 0.21
    theta_min: tuple[float, float] = (np.deg2rad(-110.0), np.deg2rad(60.0))
    theta_max: tuple[float, float] = (np.deg2rad(-30.0), np.deg2rad(150.0))
    thetadot_max: float = 0.5

    def __post_init__(self):
        if self.l1 <= 0 or self.l2 <= 0:
            raise ValueError("link lengths must be positive")
        if any(lo >= hi for lo, hi in zip(self.theta_min, self.theta_max)):
            raise ValueError("empty joint range")
        if self.thetadot_max <= 0:
            raise ValueError("velocity limit must be positive")

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.theta_min, dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.theta_max, dtype=float)

    def within_limits(self, theta, tol: float = 0.0) -> bool:
        theta = np.asarray(theta)
        return bool(np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol))

    def sample_theta(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


def forward_kinematics(model: ArmModel, theta) -> np.ndarray:
    t1, t2 = theta
    return np.array([
        model.l1 * np.cos(t1) + model.l2 * np.cos(t1 + t2),
        model.l1 * np.sin(t1) + model.l2 * np.sin(t1 + t2),
    ])


def jacobian(model: ArmModel, theta) -> np.ndarray:
    t1, t2 = theta
    s1, c1 = np.sin(t1), np.cos(t1)
    s12, c12 = np.sin(t1 + t2), np.cos(t1 + t2)
    return np.array([
        [-model.l1 * s1 - model.l2 * s12, -model.l2 * s12],
        [model.l1 * c1 + model.l2 * c12, model.l2 * c12],
    ])


@dataclass(frozen=True)
class ArmState:
    theta: np.ndarray
    thetadot: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    t: float = 0.0


def make_state(model: ArmModel, theta, thetadot=(0.0, 0.0), t: float = 0.0) -> ArmState:
    theta = np.asarray(theta, dtype=float)
    thetadot = np.asarray(thetadot, dtype=float)
    return ArmState(theta, thetadot, forward_kinematics(model, theta),
                    jacobian(model, theta) @ thetadot, t)


def step(model: ArmModel, state: ArmState, thetadot_cmd, dt: float) -> ArmState:
    """Explicit-Euler kinematic step; ``dt`` in seconds.

    The reported velocities are the ones actually applied over the step, so
    ``xdot`` is the Jacobian at the new pose times the applied joint rates.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    qd = np.clip(np.asarray(thetadot_cmd, dtype=float), -model.thetadot_max, model.thetadot_max)
    q = state.theta + dt * qd
    hit = (q < model.lower) | (q > model.upper)
    q = np.clip(q, model.lower, model.upper)
    qd = np.where(hit, 0.0, qd)
    return make_state(model, q, qd, state.t + dt * 1000.0)


def reachable(model: ArmModel, x, tol: float = 1e-9) -> bool:
    return inverse_kinematics(model, x) is not None


def inverse_kinematics(model: ArmModel, x) -> np.ndarray | None:
    """Elbow solution inside the joint limits, or ``None``."""
    px, py = x
    r2 = px * px + py * py
    c2 = (r2 - model.l1 ** 2 - model.l2 ** 2) / (2 * model.l1 * model.l2)
    if abs(c2) > 1:
        return None
    for s2 in (np.sqrt(1 - c2 * c2), -np.sqrt(1 - c2 * c2)):
        t2 = np.arctan2(s2, c2)
        t1 = np.arctan2(py, px) - np.arctan2(model.l2 * s2, model.l1 + model.l2 * c2)
        t1 = (t1 + np.pi) % (2 * np.pi) - np.pi
        q = np.array([t1, t2])
        if model.within_limits(q, tol=1e-12):
            return q
    return None


@dataclass
class DelayLine:
    """FIFO of arm snapshots read back ``delay`` cycles late.

    Position and task-space velocity get additive Gaussian noise on read;
    joint readings come from encoders and stay clean.
    """

    delay: int = 1
    sigma_x: float = 0.0
    sigma_xdot: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    queue: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if self.sigma_x < 0 or self.sigma_xdot < 0:
            raise ValueError("noise levels must be non-negative")

    @property
    def primed(self) -> bool:
        return len(self.queue) > self.delay

    def push(self, state: ArmState) -> None:
        self.queue.append(state)
        while len(self.queue) > self.delay + 1:
            self.queue.popleft()

    def snapshot(self) -> ArmState:
        """The clean delayed state: ``delay`` pushes old, or the oldest held."""
        if not self.queue:
            raise LookupError("delay line is empty")
        return self.queue[0]


def read_sensors(line: DelayLine) -> ArmState:
    snap = line.snapshot()
    x, xdot = snap.x, snap.xdot
    if line.sigma_x > 0:
        x = x + line.rng.normal(0.0, line.sigma_x, size=x.shape)
    if line.sigma_xdot > 0:
        xdot = xdot + line.rng.normal(0.0, line.sigma_xdot, size=xdot.shape)
    return replace(snap, x=x, xdot=xdot)
