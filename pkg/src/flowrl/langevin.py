"""Refine buffer actions toward the critic's energy distribution.

The target law is p(a|s) proportional to exp(Q(s, a) / temperature).  Each
iteration climbs the action gradient of Q and injects Gaussian noise scaled
by sqrt(2 * step_size * temperature); the unadjusted chain's stationary law
then approximates the energy distribution.  With temperature 0 the noise
vanishes and the update degenerates to pure gradient ascent (kept as an
ablation baseline).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import critic as critic_mod

Array = np.ndarray


@dataclass(frozen=True)
class LangevinConfig:
    """Chain parameters.

    temperature 0 is allowed as the deterministic (noise-free) limit; the
    nominal Langevin regime uses temperature > 0.
    """

    step_size: float
    temperature: float
    num_steps: int
    clamp_to_bounds: bool = True
    grad_head: str = "min"

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.temperature < 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")


def _grad_fn(critic, grad_head):
    if callable(critic):
        return critic
    return lambda s, a: critic_mod.grad_action(critic, grad_head, s, a)


def refine_actions(critic, s_batch: Array, a_init: Array, cfg: LangevinConfig,
                   rng: np.random.Generator | None,
                   action_low: Array | None = None,
                   action_high: Array | None = None) -> Array:
    """Run cfg.num_steps Langevin iterations from the buffer actions.

    a <- a + step_size * grad_a Q(s, a) + sqrt(2 * step_size * temperature) * xi
    with fresh standard-normal xi per entry per step.  ``critic`` is either a
    DoubleCritic (cfg.grad_head picks the gradient head) or any callable
    (s, a) -> grad_a Q, which lets tests and ablations supply exact gradient
    fields no MLP can represent.

    Clamps to [action_low, action_high] after every step when
    cfg.clamp_to_bounds is set, keeping targets feasible for the bounded
    policy.  Deterministic given the rng state.
    """
    if cfg.clamp_to_bounds and (action_low is None or action_high is None):
        raise ValueError("clamp_to_bounds requires action_low and action_high")
    if cfg.temperature > 0.0 and rng is None:
        raise ValueError("a noisy chain requires an rng")

    a = np.asarray(a_init, dtype=np.float64).copy()
    s = np.asarray(s_batch, dtype=np.float64)
    grad = _grad_fn(critic, cfg.grad_head)
    noise_scale = np.sqrt(2.0 * cfg.step_size * cfg.temperature)

    for k in range(cfg.num_steps):
        a = a + cfg.step_size * grad(s, a)
        if noise_scale > 0.0:
            a = a + noise_scale * rng.standard_normal(a.shape)
        if not np.isfinite(a).all():
            raise FloatingPointError(f"non-finite action after refinement step {k + 1}")
        if cfg.clamp_to_bounds:
            a = np.clip(a, action_low, action_high)
    return a


def gradient_ascent_refine(critic, s_batch: Array, a_init: Array, step_size: float,
                           num_steps: int, action_low: Array | None = None,
                           action_high: Array | None = None,
                           grad_head: str = "min") -> Array:
    """Noise-free variant: identical to refine_actions with temperature 0."""
    cfg = LangevinConfig(step_size=step_size, temperature=0.0, num_steps=num_steps,
                         clamp_to_bounds=action_low is not None, grad_head=grad_head)
    return refine_actions(critic, s_batch, a_init, cfg, rng=None,
                          action_low=action_low, action_high=action_high)
