import numpy as np
import pytest

from flowrl.bench import bench_latency, format_table
from flowrl.flow import FlowPolicy
from flowrl.nn import MlpSpec, init_params


def bench_policy():
    spec = MlpSpec(3 + 1 + 6, (32, 32), 3, hidden_activation="gelu")
    return FlowPolicy(spec=spec, params=init_params(spec, 0),
                      action_low=np.full(3, -1.0), action_high=np.full(3, 1.0),
                      sample_steps=1)


def test_repetition_precondition():
    with pytest.raises(ValueError):
        bench_latency(bench_policy(), np.zeros(6), repetitions=10)


def test_latency_monotone_in_steps():
    # Medians with one retry: absolute timings flake under machine load, the
    # 1 < 5 < 20 step ordering should not.
    for attempt in range(3):
        rows = bench_latency(bench_policy(), np.zeros(6), step_counts=(1, 5, 20),
                             repetitions=1000, warmup=50)
        p50 = {r["steps"]: r["p50_s"] for r in rows}
        if p50[1] < p50[5] < p50[20]:
            break
    assert p50[1] < p50[5] < p50[20]
    assert all(r["p99_s"] >= r["p50_s"] for r in rows)
    assert rows[0]["ratio_vs_steps1"] == pytest.approx(1.0)


def test_format_table():
    rows = bench_latency(bench_policy(), np.zeros(6), step_counts=(1,),
                         repetitions=1000, warmup=10)
    text = format_table(rows)
    assert "steps" in text and "ratio" in text
