"""Hand-built networks with exactly known behavior, used as test fixtures."""

from __future__ import annotations

import numpy as np

from flowrl.critic import DoubleCritic
from flowrl.flow import FlowPolicy
from flowrl.nn import MlpParams, MlpSpec, zeros_like_params, init_params


def constant_velocity_policy(c, state_dim=1, low=-10.0, high=10.0, steps=1) -> FlowPolicy:
    """Velocity net that outputs the constant vector c for every input."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    action_dim = c.size
    spec = MlpSpec(action_dim + 1 + state_dim, (4,), action_dim, hidden_activation="gelu")
    params = zeros_like_params(init_params(spec, 0))
    biases = list(np.array(b) for b in params.biases)
    biases[-1] = c.copy()
    params = MlpParams(params.weights, tuple(biases))
    return FlowPolicy(spec=spec, params=params,
                      action_low=np.full(action_dim, low),
                      action_high=np.full(action_dim, high), sample_steps=steps)


def scaled_action_velocity_policy(gain, state_dim=1, low=-10.0, high=10.0, steps=1) -> FlowPolicy:
    """Velocity net computing v(a, t, s) = gain * a exactly via paired ReLUs."""
    action_dim = 1
    in_dim = action_dim + 1 + state_dim
    spec = MlpSpec(in_dim, (2,), action_dim, hidden_activation="relu")
    w1 = np.zeros((2, in_dim))
    w1[0, 0] = 1.0
    w1[1, 0] = -1.0
    w2 = np.array([[gain, -gain]])
    params = MlpParams((w1, w2), (np.zeros(2), np.zeros(1)))
    return FlowPolicy(spec=spec, params=params,
                      action_low=np.array([low]), action_high=np.array([high]),
                      sample_steps=steps)


def linear_in_action_critic(w, state_dim=1) -> DoubleCritic:
    """Critic computing Q(s, a) = w . a exactly (ReLU pair per action dim)."""
    w = np.asarray(w, dtype=float)
    action_dim = w.size
    in_dim = state_dim + action_dim
    spec = MlpSpec(in_dim, (2 * action_dim,), 1, hidden_activation="relu")
    w1 = np.zeros((2 * action_dim, in_dim))
    for j in range(action_dim):
        w1[2 * j, state_dim + j] = 1.0
        w1[2 * j + 1, state_dim + j] = -1.0
    w2 = np.zeros((1, 2 * action_dim))
    for j in range(action_dim):
        w2[0, 2 * j] = w[j]
        w2[0, 2 * j + 1] = -w[j]
    params = MlpParams((w1, w2), (np.zeros(2 * action_dim), np.zeros(1)))
    return DoubleCritic(spec=spec, q1=params, q2=params, q1_target=params,
                        q2_target=params, tau=0.5)


class QuadraticQ:
    """Callable gradient source for Q(s, a) = -||a - mu||^2 / 2.

    Matches the gradient-callable protocol accepted by the Langevin refiner;
    an MLP cannot represent this Q exactly, so tests rig it directly.
    """

    def __init__(self, mu):
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))

    def q(self, a):
        d = np.atleast_2d(a) - self.mu
        return -0.5 * np.sum(d * d, axis=1)

    def __call__(self, s, a):
        return -(np.asarray(a, dtype=float) - self.mu)
