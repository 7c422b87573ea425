"""Shared environment pieces: the step record and small math helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvStep:
    """One transition: next observation, reward, episode-end flag, and a map
    of per-component reward terms and event flags.

    The reward always equals the sum of info["components"] values; failures
    set info["collision"] / info["off_road"], successes info["arrived"], and
    time-limit ends info["truncated"] (which should bootstrap, unlike genuine
    terminations).
    """

    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    return float(np.arctan2(np.sin(x), np.cos(x)))


def huber_like(x: float) -> float:
    """Quadratic core with linear tails: x^2 for |x| <= 1, else 2|x| - 1."""
    ax = abs(float(x))
    return ax * ax if ax <= 1.0 else 2.0 * ax - 1.0
