"""End-to-end training loop, evaluation, and checkpoint/resume.

Per iteration: collect sample_batch transitions with the current policy
(uniform-random actions until the buffer holds warmup transitions), sample a
replay batch, update both critics, every policy_update_frequency-th update
refine the batch actions by Langevin dynamics and update the actor on the
hybrid loss, then soft-update the targets.

Everything that affects the trajectory of the run (parameters, optimizer
moments, rng streams, replay contents and cursor, env state, counters) is
checkpointed, so a resumed run continues the uninterrupted run bit for bit.
Deterministic outputs go to metrics.jsonl / actor_updates.jsonl; wall-clock
timings go to a timings.jsonl sidecar so the metrics stream stays
byte-identical across runs of the same config and seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import nn
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, config_as_dict, config_from_dict, config_hash, config_to_text
from .critic import DoubleCritic, critic_loss, init_double_critic, q_value, soft_update
from .envs import make as make_env
from .flow import FlowPolicy, actor_loss, sample_action
from .langevin import LangevinConfig, refine_actions
from .nn import AdamState, MlpParams, MlpSpec, adam_init, adam_step, init_params
from .replay import ReplayBuffer, Transition

STREAM_INIT_POLICY = 1
STREAM_INIT_CRITIC = 2
STREAM_COLLECT = 3
STREAM_UPDATE = 4
STREAM_ENV_RESET = 5
STREAM_EVAL = 6


def derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass
class MetricsRecord:
    """One evaluation point of a run; the deterministic learning metrics."""

    iteration: int
    env_steps: int
    tar: float
    tar_ci95: float
    arrival_rate: float
    collision_rate: float
    arrival_ci95: float
    collision_ci95: float
    actor_loss: float
    critic_loss1: float
    critic_loss2: float
    lambda_f: float
    q_improvement: float
    eval_episodes: int

    def __post_init__(self):
        for name in ("arrival_rate", "collision_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def _rng_from_state(state: dict) -> np.random.Generator:
    gen = np.random.Generator(np.random.PCG64())
    gen.bit_generator.state = state
    return gen


def _params_arrays(prefix: str, params: MlpParams, out: dict) -> None:
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        out[f"{prefix}/w{i}"] = w
        out[f"{prefix}/b{i}"] = b


def _params_from_arrays(prefix: str, arrays: dict) -> MlpParams:
    weights, biases = [], []
    i = 0
    while f"{prefix}/w{i}" in arrays:
        weights.append(arrays[f"{prefix}/w{i}"])
        biases.append(arrays[f"{prefix}/b{i}"])
        i += 1
    return MlpParams(tuple(weights), tuple(biases))


def build_policy(cfg: TrainConfig, state_dim: int, action_low, action_high) -> FlowPolicy:
    spec = MlpSpec(len(action_low) + 1 + state_dim, cfg.hidden_widths, len(action_low),
                   hidden_activation=cfg.hidden_activation, output_activation="identity")
    params = init_params(spec, derived_seed(cfg.seed, STREAM_INIT_POLICY))
    return FlowPolicy(spec=spec, params=params, action_low=action_low,
                      action_high=action_high, sample_steps=cfg.sample_steps)


class Trainer:
    def __init__(self, cfg: TrainConfig, out_dir):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        self.env = make_env(cfg.env, density=cfg.density)
        state_dim = self.env.observation_dim
        self.policy = build_policy(cfg, state_dim, self.env.action_low, self.env.action_high)
        self.critic = init_double_critic(state_dim, len(self.env.action_low),
                                         cfg.hidden_widths, tau=cfg.tau,
                                         seed=derived_seed(cfg.seed, STREAM_INIT_CRITIC),
                                         hidden_activation=cfg.hidden_activation)
        self.opt_theta = adam_init(self.policy.params)
        self.opt_q1 = adam_init(self.critic.q1)
        self.opt_q2 = adam_init(self.critic.q2)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, self.env.action_low,
                                   self.env.action_high)
        self.rng_collect = np.random.default_rng(derived_seed(cfg.seed, STREAM_COLLECT))
        self.rng_update = np.random.default_rng(derived_seed(cfg.seed, STREAM_UPDATE))

        self.langevin_cfg = LangevinConfig(step_size=cfg.langevin_step_size,
                                           temperature=cfg.langevin_temperature,
                                           num_steps=cfg.langevin_steps,
                                           clamp_to_bounds=True,
                                           grad_head=cfg.langevin_grad_head)

        self.iteration = 0
        self.env_steps = 0
        self.update_count = 0
        self.actor_update_count = 0
        self.episode_counter = 0
        self.obs = None

        self.last_actor = float("nan")
        self.last_critic1 = float("nan")
        self.last_critic2 = float("nan")
        self.last_lambda = float("nan")
        self.last_q_improvement = float("nan")

    # ----------------------------------------------------------- plumbing

    def _reset_env(self) -> None:
        seed = derived_seed(self.cfg.seed, STREAM_ENV_RESET, self.episode_counter)
        self.obs = self.env.reset(seed)
        self.episode_counter += 1

    def _collect(self, n: int) -> None:
        cfg = self.cfg
        for _ in range(n):
            if self.obs is None:
                self._reset_env()
            if self.buffer.size < cfg.warmup:
                action = self.rng_collect.uniform(self.env.action_low, self.env.action_high)
            else:
                a0 = self.rng_collect.standard_normal(self.policy.action_dim)
                action = sample_action(self.policy, self.obs, a0)
            result = self.env.step(action)
            terminal = result.done and not result.info.get("truncated", False)
            self.buffer.push(Transition(s=self.obs, a=action, r=result.reward,
                                        s_next=result.observation,
                                        done=1.0 if terminal else 0.0))
            self.env_steps += 1
            self.obs = None if result.done else result.observation

    def _update(self, actor_log_fh) -> None:
        cfg = self.cfg
        batch = self.buffer.sample_uniform(cfg.replay_batch, self.rng_update)

        a0_next = self.rng_update.standard_normal((len(batch), self.policy.action_dim))
        a_next = sample_action(self.policy, batch.s_next, a0_next)
        report, g1, g2 = critic_loss(self.critic, batch.s, batch.a, batch.r, batch.done,
                                     batch.s_next, a_next, cfg.gamma)
        q1_new, self.opt_q1 = adam_step(self.critic.q1, g1, self.opt_q1, cfg.critic_lr,
                                        cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        q2_new, self.opt_q2 = adam_step(self.critic.q2, g2, self.opt_q2, cfg.critic_lr,
                                        cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        self.critic = replace(self.critic, q1=q1_new, q2=q2_new)
        self.last_critic1, self.last_critic2 = report.loss1, report.loss2

        if self.update_count % cfg.policy_update_frequency == 0:
            a_star = refine_actions(self.critic, batch.s, batch.a, self.langevin_cfg,
                                    self.rng_update, self.env.action_low,
                                    self.env.action_high)
            q_star = float(np.mean(q_value(self.critic, cfg.actor_q_head, batch.s, a_star)))
            q_buf = float(np.mean(q_value(self.critic, cfg.actor_q_head, batch.s, batch.a)))
            actor_report, grads = actor_loss(self.policy, self.critic, batch.s, batch.a,
                                             a_star, self.rng_update,
                                             lambda_scale=cfg.lambda_scale,
                                             lambda_clip=cfg.lambda_clip,
                                             q_head=cfg.actor_q_head)
            theta, self.opt_theta = adam_step(self.policy.params, grads, self.opt_theta,
                                              cfg.actor_lr, cfg.adam_beta1, cfg.adam_beta2,
                                              cfg.adam_eps)
            self.policy = self.policy.with_params(theta)
            self.actor_update_count += 1
            self.last_actor = actor_report.total
            self.last_lambda = actor_report.lambda_f
            self.last_q_improvement = q_star - q_buf
            actor_log_fh.write(json.dumps({
                "iteration": self.iteration,
                "actor_update": self.actor_update_count,
                "total": actor_report.total,
                "q_term": actor_report.q_term,
                "cfm_term": actor_report.cfm_term,
                "lambda_f": actor_report.lambda_f,
                "q_improvement": self.last_q_improvement,
            }, sort_keys=True) + "\n")

        self.critic = soft_update(self.critic)
        self.update_count += 1

    # -------------------------------------------------------------- train

    def train(self) -> Path:
        cfg = self.cfg
        (self.out_dir / "config.txt").write_text(config_to_text(cfg))
        mode = "a" if self.iteration > 0 else "w"
        metrics_fh = open(self.out_dir / "metrics.jsonl", mode)
        timings_fh = open(self.out_dir / "timings.jsonl", mode)
        actor_fh = open(self.out_dir / "actor_updates.jsonl", mode)
        latest = self.out_dir / "checkpoint_latest.ckpt"

        interval_t0 = time.perf_counter()
        interval_iters = 0
        try:
            while self.iteration < cfg.iterations:
                self._collect(cfg.sample_batch)
                if self.buffer.size >= cfg.warmup:
                    try:
                        self._update(actor_fh)
                    except FloatingPointError as exc:
                        actor_fh.flush()
                        metrics_fh.flush()
                        msg = f"aborting at iteration {self.iteration}: {exc}"
                        if latest.exists():
                            msg += f"; last good checkpoint retained at {latest}"
                        raise RuntimeError(msg) from exc
                self.iteration += 1
                interval_iters += 1

                if self.iteration % cfg.eval_interval == 0 or self.iteration == cfg.iterations:
                    record = self._evaluate_record()
                    metrics_fh.write(record.to_json() + "\n")
                    metrics_fh.flush()
                    elapsed = time.perf_counter() - interval_t0
                    per_iter = elapsed / max(interval_iters, 1)
                    per_inference = self._time_inference()
                    timings_fh.write(json.dumps({
                        "iteration": self.iteration,
                        "seconds_per_iteration": max(per_iter, 1e-12),
                        "seconds_per_inference": max(per_inference, 1e-12),
                    }, sort_keys=True) + "\n")
                    timings_fh.flush()
                    actor_fh.flush()
                    self.save(latest)
                    interval_t0 = time.perf_counter()
                    interval_iters = 0
        finally:
            metrics_fh.close()
            timings_fh.close()
            actor_fh.close()

        final = self.out_dir / "checkpoint_final.ckpt"
        self.save(final)
        return final

    def _evaluate_record(self) -> MetricsRecord:
        stats = evaluate_policy(self.policy, self.cfg.env, self.cfg.eval_episodes,
                                derived_seed(self.cfg.seed, STREAM_EVAL, self.iteration),
                                density=self.cfg.density)
        return MetricsRecord(
            iteration=self.iteration,
            env_steps=self.env_steps,
            tar=stats["tar"],
            tar_ci95=stats["tar_ci95"],
            arrival_rate=stats["arrival_rate"],
            collision_rate=stats["collision_rate"],
            arrival_ci95=stats["arrival_ci95"],
            collision_ci95=stats["collision_ci95"],
            actor_loss=self.last_actor,
            critic_loss1=self.last_critic1,
            critic_loss2=self.last_critic2,
            lambda_f=self.last_lambda,
            q_improvement=self.last_q_improvement,
            eval_episodes=self.cfg.eval_episodes,
        )

    def _time_inference(self, reps: int = 50) -> float:
        obs = self.obs if self.obs is not None else np.zeros(self.env.observation_dim)
        a0 = np.zeros(self.policy.action_dim)
        t0 = time.perf_counter()
        for _ in range(reps):
            sample_action(self.policy, obs, a0)
        return (time.perf_counter() - t0) / reps

    # ----------------------------------------------------- checkpointing

    def save(self, path) -> None:
        arrays: dict = {}
        _params_arrays("policy", self.policy.params, arrays)
        _params_arrays("q1", self.critic.q1, arrays)
        _params_arrays("q2", self.critic.q2, arrays)
        _params_arrays("q1_target", self.critic.q1_target, arrays)
        _params_arrays("q2_target", self.critic.q2_target, arrays)
        for name, state in (("opt_theta", self.opt_theta), ("opt_q1", self.opt_q1),
                            ("opt_q2", self.opt_q2)):
            _params_arrays(f"{name}/m", state.m, arrays)
            _params_arrays(f"{name}/v", state.v, arrays)
        for key, arr in self.buffer.state_arrays().items():
            arrays[f"buffer/{key}"] = arr

        meta = {
            "config": config_as_dict(self.cfg),
            "config_hash": config_hash(self.cfg),
            "iteration": self.iteration,
            "env_steps": self.env_steps,
            "update_count": self.update_count,
            "actor_update_count": self.actor_update_count,
            "episode_counter": self.episode_counter,
            "obs": None if self.obs is None else [float(v) for v in self.obs],
            "env_state": self.env.get_state(),
            "buffer_cursor": self.buffer.cursor,
            "rng_collect": self.rng_collect.bit_generator.state,
            "rng_update": self.rng_update.bit_generator.state,
            "opt_steps": {"theta": self.opt_theta.step_count,
                          "q1": self.opt_q1.step_count,
                          "q2": self.opt_q2.step_count},
            "observation_dim": self.env.observation_dim,
        }
        save_checkpoint(path, meta, arrays)

    @classmethod
    def restore(cls, path, out_dir) -> "Trainer":
        meta, arrays = load_checkpoint(path)
        cfg = config_from_dict(meta["config"])
        trainer = cls(cfg, out_dir)
        if meta["observation_dim"] != trainer.env.observation_dim:
            raise ValueError(
                f"checkpoint observation dimension {meta['observation_dim']} does not "
                f"match env {cfg.env} ({trainer.env.observation_dim})")

        trainer.policy = trainer.policy.with_params(_params_from_arrays("policy", arrays))
        trainer.critic = DoubleCritic(
            spec=trainer.critic.spec,
            q1=_params_from_arrays("q1", arrays),
            q2=_params_from_arrays("q2", arrays),
            q1_target=_params_from_arrays("q1_target", arrays),
            q2_target=_params_from_arrays("q2_target", arrays),
            tau=cfg.tau)
        steps = meta["opt_steps"]
        trainer.opt_theta = AdamState(m=_params_from_arrays("opt_theta/m", arrays),
                                      v=_params_from_arrays("opt_theta/v", arrays),
                                      step_count=steps["theta"])
        trainer.opt_q1 = AdamState(m=_params_from_arrays("opt_q1/m", arrays),
                                   v=_params_from_arrays("opt_q1/v", arrays),
                                   step_count=steps["q1"])
        trainer.opt_q2 = AdamState(m=_params_from_arrays("opt_q2/m", arrays),
                                   v=_params_from_arrays("opt_q2/v", arrays),
                                   step_count=steps["q2"])
        buffer_arrays = {k.split("/", 1)[1]: v for k, v in arrays.items()
                         if k.startswith("buffer/")}
        trainer.buffer.load_state_arrays(buffer_arrays, cursor=meta["buffer_cursor"])
        trainer.rng_collect = _rng_from_state(meta["rng_collect"])
        trainer.rng_update = _rng_from_state(meta["rng_update"])
        trainer.iteration = meta["iteration"]
        trainer.env_steps = meta["env_steps"]
        trainer.update_count = meta["update_count"]
        trainer.actor_update_count = meta["actor_update_count"]
        trainer.episode_counter = meta["episode_counter"]
        trainer.env.set_state(meta["env_state"])
        trainer.obs = None if meta["obs"] is None else np.array(meta["obs"])
        return trainer


# ------------------------------------------------------------- evaluation

def evaluate_policy(policy: FlowPolicy, env_id: str, episodes: int, seed: int,
                    density: str = "normal", a0_mode: str = "zero") -> dict:
    """Greedy rollouts; a0_mode "zero" (default) pins the sampler noise to zero
    for reproducible metrics, "normal" keeps the collection-time stochastic a0.

    Returns TAR with a 95% normal-approximation confidence interval, plus
    arrival and collision rates over the episodes.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if a0_mode not in ("zero", "normal"):
        raise ValueError(f"a0_mode must be 'zero' or 'normal', got {a0_mode!r}")
    env = make_env(env_id, density=density)
    if env.observation_dim != policy.state_dim:
        raise ValueError(f"policy state dim {policy.state_dim} does not match "
                         f"env {env_id} observation dim {env.observation_dim}")
    a0 = np.zeros(policy.action_dim)
    noise_rng = np.random.default_rng(derived_seed(seed, 777))
    returns, arrivals, collisions = [], 0, 0
    for e in range(episodes):
        obs = env.reset(derived_seed(seed, e))
        total = 0.0
        for _ in range(env.max_episode_steps):
            if a0_mode == "normal":
                a0 = noise_rng.standard_normal(policy.action_dim)
            action = sample_action(policy, obs, a0)
            result = env.step(action)
            total += result.reward
            obs = result.observation
            if result.done:
                arrivals += int(result.info.get("arrived", False))
                collisions += int(result.info.get("collision", False))
                break
        returns.append(total)

    returns = np.asarray(returns)
    n = len(returns)

    def rate_ci(k):
        p = k / n
        return 1.96 * float(np.sqrt(p * (1.0 - p) / n))

    tar_ci = 1.96 * float(np.std(returns, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return {
        "tar": float(np.mean(returns)),
        "tar_ci95": tar_ci,
        "arrival_rate": arrivals / n,
        "collision_rate": collisions / n,
        "arrival_ci95": rate_ci(arrivals),
        "collision_ci95": rate_ci(collisions),
        "episodes": n,
        "returns": returns.tolist(),
    }


def evaluate_checkpoint(path, env_id: str | None, episodes: int, seed: int) -> dict:
    """Load a checkpoint and evaluate its policy; env defaults to the one trained on."""
    meta, arrays = load_checkpoint(path)
    cfg = config_from_dict(meta["config"])
    env_id = env_id or cfg.env
    env = make_env(env_id, density=cfg.density)
    if meta["observation_dim"] != env.observation_dim:
        raise ValueError(f"checkpoint observation dimension {meta['observation_dim']} "
                         f"does not match env {env_id} ({env.observation_dim})")
    policy = build_policy(cfg, env.observation_dim, env.action_low, env.action_high)
    policy = policy.with_params(_params_from_arrays("policy", arrays))
    return evaluate_policy(policy, env_id, episodes, seed, density=cfg.density)
