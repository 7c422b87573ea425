"""2-D point-mass navigation: a double integrator pushed toward a goal."""

from __future__ import annotations

import logging

import numpy as np

from .base import EnvStep

logger = logging.getLogger(__name__)

DT = 0.1
MAX_ACCEL = 1.0
MAX_SPEED = 3.0
ARRIVAL_RADIUS = 0.2
EPISODE_LIMIT = 200


class PointMassEnv:
    """Observation [px, py, vx, vy, gx - px, gy - py]; reward is the negative
    distance to the goal; arrival terminates the episode."""

    observation_dim = 6
    action_low = np.array([-MAX_ACCEL, -MAX_ACCEL])
    action_high = np.array([MAX_ACCEL, MAX_ACCEL])
    max_episode_steps = EPISODE_LIMIT
    dt = DT

    def __init__(self):
        self.p = np.zeros(2)
        self.v = np.zeros(2)
        self.goal = np.zeros(2)
        self.steps = 0

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.p = rng.uniform(-2.0, 2.0, size=2)
        while True:
            self.goal = rng.uniform(-2.0, 2.0, size=2)
            if np.linalg.norm(self.goal - self.p) >= 1.0:
                break
        self.v = np.zeros(2)
        self.steps = 0
        return self.observe()

    def observe(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.goal - self.p])

    def step(self, action) -> EnvStep:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if np.any(a < self.action_low) or np.any(a > self.action_high):
            logger.warning("pointmass acceleration %s outside bounds; clamped", a)
            a = np.clip(a, self.action_low, self.action_high)

        self.p = self.p + self.v * DT + 0.5 * a * DT * DT
        self.v = np.clip(self.v + a * DT, -MAX_SPEED, MAX_SPEED)
        self.steps += 1

        dist = float(np.linalg.norm(self.goal - self.p))
        components = {"distance": -dist}
        arrived = dist < ARRIVAL_RADIUS
        truncated = (not arrived) and self.steps >= EPISODE_LIMIT
        info = {"components": components, "collision": False, "off_road": False,
                "arrived": arrived, "truncated": truncated}
        return EnvStep(observation=self.observe(), reward=-dist,
                       done=arrived or truncated, info=info)

    def state_dict(self) -> dict:
        return {"px": float(self.p[0]), "py": float(self.p[1]),
                "vx": float(self.v[0]), "vy": float(self.v[1])}

    def get_state(self) -> dict:
        return {"p": self.p.tolist(), "v": self.v.tolist(),
                "goal": self.goal.tolist(), "steps": self.steps}

    def set_state(self, state: dict) -> None:
        self.p = np.array(state["p"], dtype=np.float64)
        self.v = np.array(state["v"], dtype=np.float64)
        self.goal = np.array(state["goal"], dtype=np.float64)
        self.steps = int(state["steps"])
