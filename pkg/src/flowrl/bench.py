"""Single-action inference latency benchmark.

Times sample_action for several sampler step counts on identical network
shapes, reporting mean and p99 per-action latency plus the ratio against the
single-step configuration.  Noise draws are pre-generated outside the timed
region so only the policy inference path is measured.
"""

from __future__ import annotations

import time

import numpy as np

from .flow import FlowPolicy, sample_action


def bench_latency(policy: FlowPolicy, obs, step_counts=(1, 5, 20),
                  repetitions: int = 1000, warmup: int = 100, seed: int = 0) -> list[dict]:
    """Per-action latency for each step count; repetitions must be >= 1000."""
    if repetitions < 1000:
        raise ValueError("repetitions must be >= 1000 (after warm-up)")
    obs = np.asarray(obs, dtype=np.float64).reshape(-1)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((repetitions + warmup, policy.action_dim))

    rows = []
    for steps in step_counts:
        for i in range(warmup):
            sample_action(policy, obs, noise[i], steps=steps)
        times = np.empty(repetitions)
        for i in range(repetitions):
            a0 = noise[warmup + i]
            t0 = time.perf_counter()
            sample_action(policy, obs, a0, steps=steps)
            times[i] = time.perf_counter() - t0
        rows.append({
            "steps": int(steps),
            "mean_s": float(np.mean(times)),
            "p50_s": float(np.median(times)),
            "p99_s": float(np.quantile(times, 0.99)),
            "repetitions": repetitions,
        })

    base = next((r["mean_s"] for r in rows if r["steps"] == 1), rows[0]["mean_s"])
    for r in rows:
        r["ratio_vs_steps1"] = r["mean_s"] / base
    return rows


def format_table(rows: list[dict]) -> str:
    lines = [f"{'steps':>6} {'mean (ms)':>12} {'p99 (ms)':>12} {'ratio vs N=1':>14}"]
    for r in rows:
        lines.append(f"{r['steps']:>6} {r['mean_s'] * 1e3:>12.4f} "
                     f"{r['p99_s'] * 1e3:>12.4f} {r['ratio_vs_steps1']:>14.2f}")
    return "\n".join(lines)
