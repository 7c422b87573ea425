"""Torque-limited pendulum swing-up.

Rod of mass 1 and length 1 pivoting at one end, gravity 10, dt 0.05, torque
bounded to +-2.  Angle 0 is upright; the reward penalizes angle, speed and
control effort.  Integration is classical RK4, which keeps the free-swing
mechanical energy essentially constant (checked by tests), unlike the cruder
Euler schemes.
"""

from __future__ import annotations

import logging

import numpy as np

from .base import EnvStep, wrap_angle

logger = logging.getLogger(__name__)

MASS = 1.0
LENGTH = 1.0
GRAVITY = 10.0
DT = 0.05
MAX_TORQUE = 2.0
MAX_SPEED = 8.0
EPISODE_LIMIT = 200

_INERTIA = MASS * LENGTH * LENGTH / 3.0


def _theta_ddot(theta: float, torque: float) -> float:
    return 1.5 * GRAVITY / LENGTH * np.sin(theta) + torque / _INERTIA


class PendulumEnv:
    """Classic swing-up testbed; observation [cos(theta), sin(theta), theta_dot]."""

    observation_dim = 3
    action_low = np.array([-MAX_TORQUE])
    action_high = np.array([MAX_TORQUE])
    max_episode_steps = EPISODE_LIMIT
    dt = DT

    def __init__(self):
        self.theta = 0.0
        self.theta_dot = 0.0
        self.steps = 0

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.theta = float(rng.uniform(-np.pi, np.pi))
        self.theta_dot = float(rng.uniform(-1.0, 1.0))
        self.steps = 0
        return self.observe()

    def observe(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])

    def energy(self) -> float:
        """Mechanical energy of the free pendulum (datum at the pivot)."""
        return 0.5 * _INERTIA * self.theta_dot**2 + \
            MASS * GRAVITY * (LENGTH / 2.0) * np.cos(self.theta)

    def step(self, action) -> EnvStep:
        u = float(np.asarray(action).reshape(-1)[0])
        if not (-MAX_TORQUE <= u <= MAX_TORQUE):
            logger.warning("pendulum torque %.4f outside [-%.1f, %.1f]; clamped",
                           u, MAX_TORQUE, MAX_TORQUE)
            u = float(np.clip(u, -MAX_TORQUE, MAX_TORQUE))

        th, thd = self.theta, self.theta_dot
        k1 = (thd, _theta_ddot(th, u))
        k2 = (thd + 0.5 * DT * k1[1], _theta_ddot(th + 0.5 * DT * k1[0], u))
        k3 = (thd + 0.5 * DT * k2[1], _theta_ddot(th + 0.5 * DT * k2[0], u))
        k4 = (thd + DT * k3[1], _theta_ddot(th + DT * k3[0], u))
        self.theta = th + DT / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        self.theta_dot = float(np.clip(
            thd + DT / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            -MAX_SPEED, MAX_SPEED))
        if not (np.isfinite(self.theta) and np.isfinite(self.theta_dot)):
            raise FloatingPointError("pendulum state became non-finite")
        self.steps += 1

        angle = wrap_angle(self.theta)
        components = {
            "angle": -angle * angle,
            "velocity": -0.1 * self.theta_dot * self.theta_dot,
            "control": -0.001 * u * u,
        }
        reward = float(sum(components.values()))
        truncated = self.steps >= EPISODE_LIMIT
        info = {"components": components, "collision": False, "off_road": False,
                "arrived": False, "truncated": truncated}
        return EnvStep(observation=self.observe(), reward=reward, done=truncated, info=info)

    def state_dict(self) -> dict:
        return {"theta": self.theta, "theta_dot": self.theta_dot}

    def get_state(self) -> dict:
        return {"theta": self.theta, "theta_dot": self.theta_dot, "steps": self.steps}

    def set_state(self, state: dict) -> None:
        self.theta = float(state["theta"])
        self.theta_dot = float(state["theta_dot"])
        self.steps = int(state["steps"])
