#!/usr/bin/env python3
"""Pendulum threshold calibration.

Two parts:
  baseline  - a standard off-policy baseline (deterministic tanh actor with
              twin critics, Gaussian exploration noise; DDPG-style) trained
              on the identical pendulum environment.  Its converged final
              20-episode mean return justifies the acceptance threshold.
  flow      - the full flow-matching stack with the shipped pendulum config.

Results are printed as JSON lines; docs/calibration.md records the numbers.

Usage: python3 scripts/calibrate_pendulum.py [baseline|flow] [seed ...]
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import replace

import numpy as np

from flowrl.config import TrainConfig, load_config_file
from flowrl.critic import critic_loss, grad_action, init_double_critic, soft_update
from flowrl.envs import make as make_env
from flowrl.nn import MlpSpec, adam_init, adam_step, forward, grad_params, init_params
from flowrl.trainer import Trainer, derived_seed, evaluate_policy

BASE_STEPS = 50_000
WARMUP = 2_000
BATCH = 128
HIDDEN = (64, 64)
LR = 3e-4
TAU = 0.005
GAMMA = 0.99
NOISE = 0.2
FINAL_EPISODES = 20


def actor_action(params, spec, s, scale):
    return scale * forward(params, spec, s)


def run_baseline(seed: int) -> dict:
    env = make_env("pendulum")
    obs_dim = env.observation_dim
    act_dim = len(env.action_low)
    scale = float(env.action_high[0])

    actor_spec = MlpSpec(obs_dim, HIDDEN, act_dim, hidden_activation="gelu",
                         output_activation="tanh")
    actor = init_params(actor_spec, derived_seed(seed, 11))
    critic = init_double_critic(obs_dim, act_dim, HIDDEN, tau=TAU,
                                seed=derived_seed(seed, 12))
    opt_a = adam_init(actor)
    from flowrl.nn import adam_init as _ai
    opt_q1 = _ai(critic.q1)
    opt_q2 = _ai(critic.q2)

    from flowrl.replay import ReplayBuffer, Transition
    buf = ReplayBuffer(200_000, env.action_low, env.action_high)
    rng = np.random.default_rng(derived_seed(seed, 13))

    obs = None
    episode = 0
    for step in range(BASE_STEPS):
        if obs is None:
            obs = env.reset(derived_seed(seed, 14, episode))
            episode += 1
        if buf.size < WARMUP:
            a = rng.uniform(env.action_low, env.action_high)
        else:
            a = actor_action(actor, actor_spec, obs, scale)
            a = np.clip(a + rng.normal(0.0, NOISE * scale, size=act_dim),
                        env.action_low, env.action_high)
        r = env.step(a)
        terminal = r.done and not r.info["truncated"]
        buf.push(Transition(obs, a, r.reward, r.observation, 1.0 if terminal else 0.0))
        obs = None if r.done else r.observation

        if buf.size >= WARMUP:
            batch = buf.sample_uniform(BATCH, rng)
            a_next = actor_action(actor, actor_spec, batch.s_next, scale)
            _, g1, g2 = critic_loss(critic, batch.s, batch.a, batch.r, batch.done,
                                    batch.s_next, a_next, GAMMA)
            q1, opt_q1 = adam_step(critic.q1, g1, opt_q1, LR)
            q2, opt_q2 = adam_step(critic.q2, g2, opt_q2, LR)
            critic = replace(critic, q1=q1, q2=q2)

            a_pi = actor_action(actor, actor_spec, batch.s, scale)
            dq = grad_action(critic, "1", batch.s, a_pi)
            upstream = -(scale / BATCH) * dq  # through action = scale * tanh_out
            ga = grad_params(actor, actor_spec, batch.s, upstream)
            actor, opt_a = adam_step(actor, ga, opt_a, LR)
            critic = soft_update(critic)

    # Final greedy evaluation.
    returns = []
    for e in range(FINAL_EPISODES):
        o = env.reset(derived_seed(seed, 15, e))
        total = 0.0
        for _ in range(env.max_episode_steps):
            r = env.step(actor_action(actor, actor_spec, o, scale))
            total += r.reward
            o = r.observation
            if r.done:
                break
        returns.append(total)
    return {"kind": "baseline", "seed": seed, "steps": BASE_STEPS,
            "final_mean_return": float(np.mean(returns)),
            "final_std": float(np.std(returns)),
            "returns": [round(float(x), 2) for x in returns]}


def run_flow(seed: int) -> dict:
    overrides = load_config_file("configs/pendulum.cfg")
    cfg = TrainConfig(**{**overrides, "seed": seed})
    t0 = time.perf_counter()
    trainer = Trainer(cfg, f"/tmp/calibrate_flow_seed{seed}")
    trainer.train()
    minutes = (time.perf_counter() - t0) / 60.0
    stats = evaluate_policy(trainer.policy, "pendulum", FINAL_EPISODES,
                            derived_seed(seed, 99))
    return {"kind": "flow", "seed": seed, "iterations": cfg.iterations,
            "final_mean_return": stats["tar"], "final_std": float(np.std(stats["returns"])),
            "minutes": round(minutes, 1),
            "returns": [round(float(x), 2) for x in stats["returns"]]}


def main():
    kind = sys.argv[1] if len(sys.argv) > 1 else "baseline"
    seeds = [int(s) for s in sys.argv[2:]] or [0, 1, 2]
    for seed in seeds:
        result = run_baseline(seed) if kind == "baseline" else run_flow(seed)
        print(json.dumps(result), flush=True)


if __name__ == "__main__":
    main()
