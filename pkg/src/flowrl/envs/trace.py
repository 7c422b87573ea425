"""Line-delimited trajectory traces.

One JSON object per step, with a fixed key order:
  step, time, state (env state_dict), action, reward, components, events
Floats are serialized with full repr precision, so identical runs produce
byte-identical traces; golden-trace tests compare parsed values.
"""

from __future__ import annotations

import json

import numpy as np

from .base import EnvStep

EVENT_KEYS = ("collision", "off_road", "arrived", "truncated")


def trace_record(step_index: int, time: float, state: dict, action, result: EnvStep) -> dict:
    return {
        "step": int(step_index),
        "time": float(time),
        "state": {k: float(v) for k, v in state.items()},
        "action": [float(v) for v in np.asarray(action).reshape(-1)],
        "reward": float(result.reward),
        "components": {k: float(v) for k, v in result.info["components"].items()},
        "events": {k: bool(result.info[k]) for k in EVENT_KEYS},
    }


class TraceWriter:
    """Appends one record per step to a JSONL file."""

    def __init__(self, path):
        self._fh = open(path, "w")
        self._count = 0

    def append(self, record: dict) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def write_rollout_trace(path, env, actions, seed: int) -> list[dict]:
    """Reset env with seed, apply the action sequence, and trace every step.

    Stops early if the episode ends.  Returns the records as written.
    """
    env.reset(seed)
    dt = float(getattr(env, "dt", 0.0))
    records = []
    with TraceWriter(path) as w:
        for i, action in enumerate(actions):
            result = env.step(action)
            rec = trace_record(i, (i + 1) * dt, env.state_dict(), action, result)
            w.append(rec)
            records.append(rec)
            if result.done:
                break
    return records


def read_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
