import numpy as np
import pytest

from flowrl.critic import (
    CriticLossReport,
    DoubleCritic,
    bellman_target,
    critic_loss,
    grad_action,
    init_double_critic,
    q_value,
    soft_update,
)
from flowrl.nn import MlpParams, MlpSpec, forward, init_params, zeros_like_params
from gradcheck import fd_grad_params, fd_grad_vector, flatten_params, rel_error, rel_error_params


def small_critic(seed=0, state_dim=3, action_dim=2, tau=0.5):
    return init_double_critic(state_dim, action_dim, (6, 5), tau=tau, seed=seed)


def linear_in_action_critic(w):
    """Critic computing Q(s, a) = w . a exactly (ReLU pair trick per action dim)."""
    state_dim, action_dim = 1, len(w)
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


def test_targets_equal_online_after_init():
    c = small_critic()
    rng = np.random.default_rng(0)
    s, a = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    assert np.array_equal(q_value(c, "1", s, a), q_value(c, "target1", s, a))
    assert np.array_equal(q_value(c, "2", s, a), q_value(c, "target2", s, a))


def test_q_value_zero_net():
    c = small_critic()
    zero = zeros_like_params(c.q1)
    c = DoubleCritic(spec=c.spec, q1=zero, q2=zero, q1_target=zero, q2_target=zero, tau=0.5)
    assert np.all(q_value(c, "1", np.ones((4, 3)), np.ones((4, 2))) == 0.0)


def test_q_value_matches_forward_oracle():
    c = small_critic(seed=3)
    rng = np.random.default_rng(3)
    s, a = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    want = forward(c.q2, c.spec, np.concatenate([s, a], axis=1))[:, 0]
    assert np.max(np.abs(q_value(c, "2", s, a) - want)) < 1e-12


def test_q_value_bad_head_and_shapes():
    c = small_critic()
    with pytest.raises(ValueError):
        q_value(c, "3", np.ones(3), np.ones(2))
    with pytest.raises(ValueError):
        q_value(c, "1", np.ones((2, 3)), np.ones((3, 2)))


def test_bellman_target_terminal_mask():
    c = small_critic(seed=1)
    rng = np.random.default_rng(1)
    s2, a2 = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
    y = bellman_target(c, r=np.ones(4), done=np.ones(4), s_next=s2, a_next=a2, gamma=0.99)
    assert np.all(y == 1.0)


def test_bellman_target_uses_min_of_targets():
    # Rig target heads to constants 2 and 3 via output biases on zero nets.
    c = small_critic()
    zero = zeros_like_params(c.q1)

    def with_out_bias(p, value):
        biases = list(np.array(b) for b in p.biases)
        biases[-1] = np.array([value])
        return MlpParams(p.weights, tuple(biases))

    c = DoubleCritic(spec=c.spec, q1=zero, q2=zero,
                     q1_target=with_out_bias(zero, 2.0),
                     q2_target=with_out_bias(zero, 3.0), tau=0.5)
    y = bellman_target(c, r=np.array([1.0]), done=np.array([0.0]),
                       s_next=np.ones((1, 3)), a_next=np.ones((1, 2)), gamma=0.99)
    assert y[0] == pytest.approx(1.0 + 0.99 * 2.0)


def test_bellman_target_rejects_bad_done():
    c = small_critic()
    with pytest.raises(ValueError):
        bellman_target(c, r=np.zeros(1), done=np.array([0.5]),
                       s_next=np.ones((1, 3)), a_next=np.ones((1, 2)), gamma=0.99)


@pytest.mark.parametrize("seed", range(10))
def test_bellman_min_dominance(seed):
    c = small_critic(seed=seed)
    c = soft_update(c, tau=0.3)  # make targets differ from online heads
    rng = np.random.default_rng(seed)
    n = 16
    s2, a2 = rng.normal(size=(n, 3)), rng.normal(size=(n, 2))
    r = rng.normal(size=n)
    done = (rng.random(n) < 0.3).astype(float)
    y = bellman_target(c, r, done, s2, a2, gamma=0.99)
    for head in ("target1", "target2"):
        bound = r + 0.99 * (1.0 - done) * q_value(c, head, s2, a2)
        assert np.all(y <= bound + 1e-12)


def test_critic_loss_zero_when_equal_to_target():
    # Zero nets + zero reward: Q == target == 0 everywhere.
    c = small_critic()
    zero = zeros_like_params(c.q1)
    c = DoubleCritic(spec=c.spec, q1=zero, q2=zero, q1_target=zero, q2_target=zero, tau=0.5)
    rng = np.random.default_rng(0)
    report, g1, g2 = critic_loss(c, s=rng.normal(size=(8, 3)), a=rng.normal(size=(8, 2)),
                                 r=np.zeros(8), done=np.zeros(8),
                                 s_next=rng.normal(size=(8, 3)), a_next=rng.normal(size=(8, 2)),
                                 gamma=0.99)
    assert report.loss1 == 0.0 and report.loss2 == 0.0
    assert np.all(flatten_params(g1) == 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_critic_loss_grads_match_finite_differences(seed):
    c = small_critic(seed=seed)
    rng = np.random.default_rng(seed + 500)
    n = 5
    batch = dict(s=rng.normal(size=(n, 3)), a=rng.normal(size=(n, 2)),
                 r=rng.normal(size=n), done=(rng.random(n) < 0.5).astype(float),
                 s_next=rng.normal(size=(n, 3)), a_next=rng.normal(size=(n, 2)))

    _, g1, g2 = critic_loss(c, gamma=0.99, **batch)

    def loss_head1(p):
        c2 = DoubleCritic(spec=c.spec, q1=p, q2=c.q2, q1_target=c.q1_target,
                          q2_target=c.q2_target, tau=c.tau)
        return critic_loss(c2, gamma=0.99, **batch)[0].loss1

    def loss_head2(p):
        c2 = DoubleCritic(spec=c.spec, q1=c.q1, q2=p, q1_target=c.q1_target,
                          q2_target=c.q2_target, tau=c.tau)
        return critic_loss(c2, gamma=0.99, **batch)[0].loss2

    assert rel_error_params(g1, fd_grad_params(loss_head1, c.q1)) <= 1e-6
    assert rel_error_params(g2, fd_grad_params(loss_head2, c.q2)) <= 1e-6


def test_critic_loss_heads_independent():
    # Head-1 gradient must not change when head 2's online parameters change.
    c = small_critic(seed=4)
    rng = np.random.default_rng(4)
    n = 6
    batch = dict(s=rng.normal(size=(n, 3)), a=rng.normal(size=(n, 2)),
                 r=rng.normal(size=n), done=np.zeros(n),
                 s_next=rng.normal(size=(n, 3)), a_next=rng.normal(size=(n, 2)))
    _, g1_a, _ = critic_loss(c, gamma=0.99, **batch)
    c2 = DoubleCritic(spec=c.spec, q1=c.q1, q2=init_params(c.spec, 999),
                      q1_target=c.q1_target, q2_target=c.q2_target, tau=c.tau)
    _, g1_b, _ = critic_loss(c2, gamma=0.99, **batch)
    assert np.array_equal(flatten_params(g1_a), flatten_params(g1_b))


def test_grad_action_linear_rig():
    w = np.array([1.5, -2.0])
    c = linear_in_action_critic(w)
    rng = np.random.default_rng(0)
    s, a = rng.normal(size=(5, 1)), rng.normal(size=(5, 2))
    q = q_value(c, "1", s, a)
    assert np.max(np.abs(q - a @ w)) < 1e-12
    g = grad_action(c, "1", s, a)
    assert np.max(np.abs(g - w)) < 1e-12


def test_grad_action_zero_net():
    c = small_critic()
    zero = zeros_like_params(c.q1)
    c = DoubleCritic(spec=c.spec, q1=zero, q2=zero, q1_target=zero, q2_target=zero, tau=0.5)
    g = grad_action(c, "1", np.ones((3, 3)), np.ones((3, 2)))
    assert np.all(g == 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_grad_action_matches_finite_differences(seed):
    c = small_critic(seed=seed + 20)
    rng = np.random.default_rng(seed + 20)
    s = rng.normal(size=(3, 3))
    a = rng.normal(size=(3, 2))
    for head in ("1", "2", "target1"):
        analytic = grad_action(c, head, s, a)
        fd = fd_grad_vector(lambda av: float(np.sum(q_value(c, head, s, av))), a.copy())
        assert rel_error(analytic, fd) <= 1e-6


def test_grad_action_min_head_picks_smaller():
    c = small_critic(seed=8)
    rng = np.random.default_rng(8)
    s, a = rng.normal(size=(12, 3)), rng.normal(size=(12, 2))
    q1 = q_value(c, "1", s, a)
    q2 = q_value(c, "2", s, a)
    g_min = grad_action(c, "min", s, a)
    g1 = grad_action(c, "1", s, a)
    g2 = grad_action(c, "2", s, a)
    want = np.where((q1 <= q2)[:, None], g1, g2)
    assert np.array_equal(g_min, want)


def test_soft_update_tau_one_copies():
    c = small_critic(seed=2)
    c2 = DoubleCritic(spec=c.spec, q1=init_params(c.spec, 100), q2=init_params(c.spec, 101),
                      q1_target=c.q1_target, q2_target=c.q2_target, tau=0.5)
    c3 = soft_update(c2, tau=1.0)
    assert np.array_equal(flatten_params(c3.q1_target), flatten_params(c2.q1))
    assert np.array_equal(flatten_params(c3.q2_target), flatten_params(c2.q2))


def test_soft_update_scalar_convex():
    spec = MlpSpec(1, (1,), 1)
    ones = MlpParams((np.ones((1, 1)), np.ones((1, 1))), (np.ones(1), np.ones(1)))
    zeros = zeros_like_params(ones)
    c = DoubleCritic(spec=spec, q1=ones, q2=ones, q1_target=zeros, q2_target=zeros, tau=0.5)
    c2 = soft_update(c)
    assert c2.q1_target.weights[0][0, 0] == pytest.approx(0.5)
    # online heads untouched
    assert np.array_equal(flatten_params(c2.q1), flatten_params(c.q1))


@pytest.mark.parametrize("tau", [0.001, 0.1, 0.7])
def test_soft_update_is_exact_contraction(tau):
    c = small_critic(seed=5)
    c = DoubleCritic(spec=c.spec, q1=c.q1, q2=c.q2,
                     q1_target=init_params(c.spec, 200), q2_target=init_params(c.spec, 201),
                     tau=tau)
    before = flatten_params(c.q1_target) - flatten_params(c.q1)
    after = flatten_params(soft_update(c).q1_target) - flatten_params(c.q1)
    assert np.max(np.abs(after - (1.0 - tau) * before)) < 1e-15


def test_invalid_tau_rejected():
    c = small_critic()
    with pytest.raises(ValueError):
        soft_update(c, tau=0.0)
    with pytest.raises(ValueError):
        DoubleCritic(spec=c.spec, q1=c.q1, q2=c.q2, q1_target=c.q1_target,
                     q2_target=c.q2_target, tau=1.5)
