#!/usr/bin/env python3
"""Regenerate the frozen multilane golden trace used by the trace tests.

Run from the repo root:  python3 scripts/make_golden_trace.py
"""

from pathlib import Path

import numpy as np

from flowrl.envs import MultiLaneEnv
from flowrl.envs.trace import write_rollout_trace


def scripted_actions(n=60):
    rng = np.random.default_rng(0)
    low = np.array([-0.4, -0.025])
    high = np.array([0.25, 0.025])
    return [rng.uniform(low, high) for _ in range(n)]


def main():
    out = Path(__file__).resolve().parent.parent / "tests" / "golden" / "multilane_seed7.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    records = write_rollout_trace(out, MultiLaneEnv(), scripted_actions(), seed=7)
    print(f"wrote {len(records)} records to {out}")


if __name__ == "__main__":
    main()
