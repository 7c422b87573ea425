"""Double Q-networks with slow-moving target copies.

Two online heads are trained against a shared bootstrap target built from the
minimum of the two target heads; targets track the online heads through a
convex soft update.  Action gradients of the chosen head feed the Langevin
refiner.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .nn import MlpParams, MlpSpec, backward, forward, grad_input, init_params

Array = np.ndarray

HEADS = ("1", "2", "target1", "target2", "min")


@dataclass(frozen=True)
class DoubleCritic:
    """Q1/Q2 online heads plus their target copies, sharing one spec.

    spec.input_dim = state_dim + action_dim, spec.output_dim = 1.
    """

    spec: MlpSpec
    q1: MlpParams
    q2: MlpParams
    q1_target: MlpParams
    q2_target: MlpParams
    tau: float

    def __post_init__(self):
        if self.spec.output_dim != 1:
            raise ValueError("critic networks must have a single output")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        for p in (self.q1, self.q2, self.q1_target, self.q2_target):
            p.check_spec(self.spec)


@dataclass(frozen=True)
class CriticLossReport:
    loss1: float
    loss2: float
    mean_q1: float
    mean_q2: float
    mean_target: float


def init_double_critic(state_dim: int, action_dim: int, hidden_widths, tau: float,
                       seed: int, hidden_activation: str = "gelu") -> DoubleCritic:
    """Fresh critic; targets start as exact copies of the online heads."""
    spec = MlpSpec(state_dim + action_dim, tuple(hidden_widths), 1,
                   hidden_activation=hidden_activation, output_activation="identity")
    ss = np.random.SeedSequence(seed)
    s1, s2 = ss.spawn(2)
    q1 = init_params(spec, int(s1.generate_state(1)[0]))
    q2 = init_params(spec, int(s2.generate_state(1)[0]))
    return DoubleCritic(spec=spec, q1=q1, q2=q2, q1_target=q1, q2_target=q2, tau=tau)


def _params_for_head(critic: DoubleCritic, head) -> MlpParams:
    head = str(head)
    if head == "1":
        return critic.q1
    if head == "2":
        return critic.q2
    if head == "target1":
        return critic.q1_target
    if head == "target2":
        return critic.q2_target
    raise ValueError(f"unknown head {head!r}; expected one of {HEADS}")


def _join(s: Array, a: Array) -> tuple[Array, bool]:
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    single = s.ndim == 1
    if single != (a.ndim == 1):
        raise ValueError("state and action batching disagree")
    if single:
        s, a = s[None, :], a[None, :]
    if s.shape[0] != a.shape[0]:
        raise ValueError(f"state batch {s.shape[0]} != action batch {a.shape[0]}")
    return np.concatenate([s, a], axis=1), single


def q_value(critic: DoubleCritic, head, s: Array, a: Array) -> Array:
    """Scalar Q per batch row from the chosen head; shape (batch,)."""
    x, single = _join(s, a)
    y = forward(_params_for_head(critic, head), critic.spec, x)[:, 0]
    return float(y[0]) if single else y


def bellman_target(critic: DoubleCritic, r: Array, done: Array, s_next: Array,
                   a_next: Array, gamma: float) -> Array:
    """r + gamma * (1 - done) * min(Q_target1, Q_target2) at (s', a').

    No gradients flow anywhere: this is a pure evaluation of the target heads.
    """
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    done = np.asarray(done, dtype=np.float64).reshape(-1)
    if not np.all((done == 0.0) | (done == 1.0)):
        raise ValueError("done flags must be 0 or 1")
    qt1 = q_value(critic, "target1", s_next, a_next)
    qt2 = q_value(critic, "target2", s_next, a_next)
    if r.shape != qt1.shape or done.shape != qt1.shape:
        raise ValueError("r/done length does not match the batch")
    return r + gamma * (1.0 - done) * np.minimum(qt1, qt2)


def critic_loss(critic: DoubleCritic, s: Array, a: Array, r: Array, done: Array,
                s_next: Array, a_next: Array, gamma: float
                ) -> tuple[CriticLossReport, MlpParams, MlpParams]:
    """Per-head mean squared Bellman residual and gradients for the online heads.

    Both heads regress on the same bellman_target; target parameters receive
    no gradient by construction.
    """
    y = bellman_target(critic, r, done, s_next, a_next, gamma)
    x, _ = _join(s, a)
    n = x.shape[0]

    losses, mean_qs, grads = [], [], []
    for params in (critic.q1, critic.q2):
        q_out, g, _ = backward(params, critic.spec, x,
                               lambda out: (2.0 / n) * (out - y[:, None]),
                               need_input_grad=False)
        resid = q_out[:, 0] - y
        losses.append(float(np.mean(resid * resid)))
        mean_qs.append(float(np.mean(q_out[:, 0])))
        grads.append(g)

    if not np.isfinite(losses).all():
        raise FloatingPointError("non-finite critic loss")
    report = CriticLossReport(loss1=losses[0], loss2=losses[1], mean_q1=mean_qs[0],
                              mean_q2=mean_qs[1], mean_target=float(np.mean(y)))
    return report, grads[0], grads[1]


def grad_action(critic: DoubleCritic, head, s: Array, a: Array) -> Array:
    """Gradient of Q_head with respect to the action; shape of ``a``.

    head "min" picks, per batch row, the gradient of whichever online head has
    the smaller Q at (s, a) - the conservative choice for refinement.
    """
    x, single = _join(s, a)
    action_dim = np.asarray(a).shape[-1]
    ones = np.ones((x.shape[0], 1))

    if str(head) == "min":
        y1, _, g1 = backward(critic.q1, critic.spec, x, ones, need_param_grads=False)
        y2, _, g2 = backward(critic.q2, critic.spec, x, ones, need_param_grads=False)
        g = np.where((y1[:, 0] <= y2[:, 0])[:, None],
                     g1[:, -action_dim:], g2[:, -action_dim:])
    else:
        params = _params_for_head(critic, head)
        g = grad_input(params, critic.spec, x, ones)[:, -action_dim:]
    return g[0] if single else g


def soft_update(critic: DoubleCritic, tau: float | None = None) -> DoubleCritic:
    """Move both target heads by the convex rule target <- (1-tau)*target + tau*online."""
    t = critic.tau if tau is None else float(tau)
    if not (0.0 < t <= 1.0):
        raise ValueError(f"tau must be in (0, 1], got {t}")

    def blend(target: MlpParams, online: MlpParams) -> MlpParams:
        return MlpParams(
            tuple((1.0 - t) * wt + t * wo for wt, wo in zip(target.weights, online.weights)),
            tuple((1.0 - t) * bt + t * bo for bt, bo in zip(target.biases, online.biases)),
        )

    return replace(critic,
                   q1_target=blend(critic.q1_target, critic.q1),
                   q2_target=blend(critic.q2_target, critic.q2))
