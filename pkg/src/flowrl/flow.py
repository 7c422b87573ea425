"""State-conditioned flow-matching policy.

The policy is a velocity field v(a, t, s) integrated by an N-step explicit
Euler scheme from a standard-normal draw a0 to an action, hard-clamped to the
action box at the end.  Training combines a policy-improvement term (raise Q
of the sampled action, differentiating through the whole Euler unroll) with a
velocity-regression imitation term toward refined target actions, weighted by
a clipped advantage-style coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import critic as critic_mod
from .nn import MlpParams, MlpSpec, backward, forward, tree_add, zeros_like_params

Array = np.ndarray


@dataclass(frozen=True)
class FlowPolicy:
    """Velocity network with action bounds and the deployed sampler step count.

    The velocity net consumes [action, t, state]: input_dim must equal
    action_dim + 1 + state_dim and output_dim must equal action_dim.
    """

    spec: MlpSpec
    params: MlpParams
    action_low: Array
    action_high: Array
    sample_steps: int = 1

    def __post_init__(self):
        low = np.asarray(self.action_low, dtype=np.float64).reshape(-1)
        high = np.asarray(self.action_high, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "action_low", low)
        object.__setattr__(self, "action_high", high)
        if low.shape != high.shape or not np.all(low < high):
            raise ValueError("action_low must be elementwise below action_high")
        if self.spec.output_dim != low.size:
            raise ValueError(f"output_dim {self.spec.output_dim} != action_dim {low.size}")
        if self.spec.input_dim != low.size + 1 + self.state_dim or self.state_dim < 1:
            raise ValueError("input_dim must be action_dim + 1 + state_dim with state_dim >= 1")
        if self.sample_steps < 1:
            raise ValueError("sample_steps must be >= 1")
        self.params.check_spec(self.spec)

    @property
    def action_dim(self) -> int:
        return self.action_low.size

    @property
    def state_dim(self) -> int:
        return self.spec.input_dim - self.action_low.size - 1

    def with_params(self, params: MlpParams) -> "FlowPolicy":
        return FlowPolicy(spec=self.spec, params=params, action_low=self.action_low,
                          action_high=self.action_high, sample_steps=self.sample_steps)


@dataclass(frozen=True)
class ActorLossReport:
    """total = q_term + lambda_f * cfm_term, checked on every evaluation."""

    total: float
    q_term: float
    cfm_term: float
    lambda_f: float

    def __post_init__(self):
        if abs(self.total - (self.q_term + self.lambda_f * self.cfm_term)) > 1e-12 * max(
            1.0, abs(self.total)
        ):
            raise ValueError("actor loss decomposition identity violated")


def _batched(x: Array, dim: int, name: str) -> tuple[Array, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise ValueError(f"{name} last dimension {x.shape[1]} != {dim}")
        return x, False
    raise ValueError(f"{name} must be 1-D or 2-D")


def _velocity_input(a: Array, t: Array, s: Array) -> Array:
    return np.concatenate([a, t[:, None], s], axis=1)


def _euler_states(policy: FlowPolicy, s: Array, a0: Array, steps: int) -> list[Array]:
    """All intermediate pre-clamp actions a_0 .. a_N of the Euler unroll."""
    h = 1.0 / steps
    states = [a0]
    a = a0
    for k in range(steps):
        t = np.full(a.shape[0], k * h)
        v = forward(policy.params, policy.spec, _velocity_input(a, t, s))
        with np.errstate(over="ignore", invalid="ignore"):
            a = a + h * v
        if not np.isfinite(a).all():
            raise FloatingPointError(f"non-finite action after sampler step {k + 1}")
        states.append(a)
    return states


def sample_action(policy: FlowPolicy, s: Array, a0: Array | None = None,
                  steps: int | None = None, rng: np.random.Generator | None = None) -> Array:
    """Integrate the velocity field from a0 and clamp to the action box.

    a0 defaults to a standard-normal draw from rng; the result is a pure
    function of (a0, s).
    """
    steps = policy.sample_steps if steps is None else int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    s2, single = _batched(s, policy.state_dim, "s")
    if a0 is None:
        if rng is None:
            raise ValueError("either a0 or rng must be provided")
        a0 = rng.standard_normal((s2.shape[0], policy.action_dim))
    a0b, a_single = _batched(a0, policy.action_dim, "a0")
    if a0b.shape[0] != s2.shape[0]:
        raise ValueError("a0 batch does not match state batch")
    final = _euler_states(policy, s2, a0b, steps)[-1]
    clamped = np.clip(final, policy.action_low, policy.action_high)
    return clamped[0] if single else clamped


def time_index_actions(a0: Array, a_star: Array, t) -> Array:
    """Linear interpolation (1 - t) * a0 + t * a_star along the flow path.

    t may be a scalar or a per-row vector; every entry must lie in [0, 1].
    """
    a0 = np.asarray(a0, dtype=np.float64)
    a_star = np.asarray(a_star, dtype=np.float64)
    if a0.shape != a_star.shape:
        raise ValueError(f"shape mismatch {a0.shape} vs {a_star.shape}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("interpolation time must lie in [0, 1]")
    if t.ndim == 1 and a0.ndim == 2:
        if t.shape[0] != a0.shape[0]:
            raise ValueError("per-sample t length does not match the batch")
        t = t[:, None]
    return (1.0 - t) * a0 + t * a_star


def cfm_term(policy: FlowPolicy, s: Array, a0: Array, a_star: Array, t) -> float:
    """Mean squared velocity regression error toward the straight-line target.

    Per sample: || v(a_t, t, s) - (a_star - a0) ||^2 with a_t from
    time_index_actions; averaged over the batch.
    """
    loss, _ = _cfm_loss_and_grads(policy, s, a0, a_star, t, need_grads=False)
    return loss


def _cfm_loss_and_grads(policy: FlowPolicy, s, a0, a_star, t, need_grads: bool
                        ) -> tuple[float, MlpParams | None]:
    s2, _ = _batched(s, policy.state_dim, "s")
    a0b, _ = _batched(a0, policy.action_dim, "a0")
    ab, _ = _batched(a_star, policy.action_dim, "a_star")
    if not (s2.shape[0] == a0b.shape[0] == ab.shape[0]):
        raise ValueError("batch sizes disagree")
    tv = np.asarray(t, dtype=np.float64)
    tv = np.full(s2.shape[0], float(tv)) if tv.ndim == 0 else tv.reshape(-1)
    if tv.shape[0] != s2.shape[0]:
        raise ValueError("t length does not match the batch")

    a_t = time_index_actions(a0b, ab, tv)
    x = _velocity_input(a_t, tv, s2)
    target = ab - a0b
    n = x.shape[0]
    if not need_grads:
        v = forward(policy.params, policy.spec, x)
        resid = v - target
        return float(np.mean(np.sum(resid * resid, axis=1))), None

    v, grads, _ = backward(policy.params, policy.spec, x,
                           lambda out: (2.0 / n) * (out - target), need_input_grad=False)
    resid = v - target
    loss = float(np.mean(np.sum(resid * resid, axis=1)))
    return loss, grads


def lambda_weight(q_star: Array, q_buffer: Array, scale: float) -> float:
    """scale * mean(relu(q_star - q_buffer)); the imitation weight, always >= 0."""
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    q_star = np.asarray(q_star, dtype=np.float64).reshape(-1)
    q_buffer = np.asarray(q_buffer, dtype=np.float64).reshape(-1)
    if q_star.shape != q_buffer.shape:
        raise ValueError("q_star and q_buffer must have equal length")
    return float(scale * np.mean(np.maximum(q_star - q_buffer, 0.0)))


def _q_term_and_grads(policy: FlowPolicy, critic, s: Array, a0: Array, steps: int,
                      q_head) -> tuple[float, MlpParams]:
    """mean(-Q(s, pi(s))) and its parameter gradients through the Euler unroll."""
    n = s.shape[0]
    h = 1.0 / steps
    states = _euler_states(policy, s, a0, steps)
    a_final = states[-1]
    a_clamped = np.clip(a_final, policy.action_low, policy.action_high)

    q = critic_mod.q_value(critic, q_head, s, a_clamped)
    q_term = float(-np.mean(q))

    # dL/da_clamped = -(1/n) dQ/da; the hard clamp zeroes saturated coordinates.
    dq_da = critic_mod.grad_action(critic, q_head, s, a_clamped)
    g = (-1.0 / n) * dq_da
    g = np.where((a_final >= policy.action_low) & (a_final <= policy.action_high), g, 0.0)

    theta = None
    for k in range(steps - 1, -1, -1):
        t = np.full(n, k * h)
        x = _velocity_input(states[k], t, s)
        _, step_grads, x_grad = backward(policy.params, policy.spec, x, h * g)
        theta = step_grads if theta is None else tree_add(theta, step_grads)
        # a_{k+1} = a_k + h * v(a_k, ...): propagate both the identity path
        # and the velocity-field dependence on a_k.
        g = g + x_grad[:, : policy.action_dim]
    return q_term, theta


def actor_loss(policy: FlowPolicy, critic, s_batch: Array, a_buffer: Array, a_star: Array,
               rng: np.random.Generator, *, lambda_scale: float = 1.0,
               lambda_clip: float = 10.0, q_head="1", steps: int | None = None,
               ) -> tuple[ActorLossReport, MlpParams]:
    """Hybrid actor objective; returns the loss report and gradients for theta only.

    q_term:   mean(-Q(s, pi(s))) with pi sampled through the Euler unroll
              (fresh a0 draws; the gradient flows through every step).
    cfm_term: velocity regression toward (a_star - a0) with fresh a0 and one
              uniform t per sample.
    lambda_f: clip(lambda_scale * mean(relu(Q(s, a*) - Q(s, a_B))), 0, lambda_clip),
              treated as a constant weight.

    The critic is read-only here: its parameters receive no gradient.
    """
    s2, _ = _batched(s_batch, policy.state_dim, "s_batch")
    ab, _ = _batched(a_buffer, policy.action_dim, "a_buffer")
    astar, _ = _batched(a_star, policy.action_dim, "a_star")
    if not (s2.shape[0] == ab.shape[0] == astar.shape[0]):
        raise ValueError("batch sizes disagree")
    n = s2.shape[0]
    steps = policy.sample_steps if steps is None else int(steps)

    a0_q = rng.standard_normal((n, policy.action_dim))
    q_term, q_grads = _q_term_and_grads(policy, critic, s2, a0_q, steps, q_head)

    a0_cfm = rng.standard_normal((n, policy.action_dim))
    t = rng.uniform(0.0, 1.0, size=n)
    cfm, cfm_grads = _cfm_loss_and_grads(policy, s2, a0_cfm, astar, t, need_grads=True)

    q_star = critic_mod.q_value(critic, q_head, s2, astar)
    q_buf = critic_mod.q_value(critic, q_head, s2, ab)
    lam = min(lambda_weight(q_star, q_buf, lambda_scale), float(lambda_clip))

    total = q_term + lam * cfm
    if not np.isfinite(total):
        raise FloatingPointError("non-finite actor loss")
    grads = tree_add(q_grads, cfm_grads, scale=lam)
    return ActorLossReport(total=total, q_term=q_term, cfm_term=cfm, lambda_f=lam), grads
