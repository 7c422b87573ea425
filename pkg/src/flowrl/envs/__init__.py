"""Desk-scale environments with a common reset/step interface."""

from .base import EnvStep, huber_like, wrap_angle
from .multilane import MultiLaneEnv
from .pendulum import PendulumEnv
from .pointmass import PointMassEnv

ENV_IDS = ("pendulum", "pointmass", "multilane")


def make(env_id: str, density: str = "normal"):
    """Instantiate an environment by id; density applies to multilane only."""
    if env_id == "pendulum":
        return PendulumEnv()
    if env_id == "pointmass":
        return PointMassEnv()
    if env_id == "multilane":
        return MultiLaneEnv(density=density)
    raise ValueError(f"unknown env id {env_id!r}; expected one of {ENV_IDS}")


__all__ = ["EnvStep", "MultiLaneEnv", "PendulumEnv", "PointMassEnv", "make",
           "ENV_IDS", "huber_like", "wrap_angle"]
