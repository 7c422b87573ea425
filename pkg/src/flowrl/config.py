"""Training configuration: defaults, flat key=value config files, CLI merging."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .envs import ENV_IDS


@dataclass(frozen=True)
class TrainConfig:
    """All knobs of a training run.

    Defaults follow the reference hyperparameter table (learning rates 1e-4,
    sample batch 200, replay batch 512, gamma 0.99, policy update frequency 3,
    tau 0.001, Langevin step 0.03 / temperature 0.01 / 20 steps, 1 sampler
    step); desk-scale extras (warmup, widths, eval cadence, lambda clip) are
    package choices.  Config files may override any field by name.
    """

    env: str = "pendulum"
    density: str = "normal"
    seed: int = 0
    iterations: int = 100_000
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    sample_batch: int = 200
    replay_batch: int = 512
    gamma: float = 0.99
    policy_update_frequency: int = 3
    tau: float = 0.001
    langevin_step_size: float = 0.03
    langevin_temperature: float = 0.01
    langevin_steps: int = 20
    langevin_grad_head: str = "min"
    sample_steps: int = 1
    warmup: int = 5_000
    buffer_capacity: int = 1_000_000
    hidden_widths: tuple = (256, 256, 256)
    hidden_activation: str = "gelu"
    eval_interval: int = 5_000
    eval_episodes: int = 20
    lambda_scale: float = 1.0
    lambda_clip: float = 10.0
    actor_q_head: str = "1"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.env not in ENV_IDS:
            raise ValueError(f"unknown env {self.env!r}")
        for name in ("actor_lr", "critic_lr", "gamma", "tau"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.gamma >= 1.0 or self.tau > 1.0:
            raise ValueError("gamma must be < 1 and tau <= 1")
        for name in ("iterations", "sample_batch", "replay_batch",
                     "policy_update_frequency", "langevin_steps", "sample_steps",
                     "eval_interval", "eval_episodes", "buffer_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.warmup < 0 or self.warmup > self.buffer_capacity:
            raise ValueError("warmup must lie in [0, buffer_capacity]")
        if self.langevin_step_size <= 0.0 or self.langevin_temperature < 0.0:
            raise ValueError("bad langevin parameters")
        if self.lambda_scale <= 0.0 or self.lambda_clip < 0.0:
            raise ValueError("lambda_scale must be > 0 and lambda_clip >= 0")


def _parse_value(name: str, raw: str, typ):
    raw = raw.strip()
    if name == "hidden_widths":
        return tuple(int(p) for p in raw.replace("(", "").replace(")", "").split(",") if p.strip())
    if typ is int:
        return int(float(raw))
    if typ is float:
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    """Parse a flat `key = value` document (# starts a comment)."""
    field_types = {f.name: f.type for f in fields(TrainConfig)}
    type_map = {"int": int, "float": float, "str": str, "tuple": tuple}
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in field_types:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        typ = type_map.get(str(field_types[key]), str)
        overrides[key] = _parse_value(key, raw, typ)
    return overrides


def build_config(config_path=None, **cli_overrides) -> TrainConfig:
    """File values override defaults; CLI values override the file."""
    values = {}
    if config_path is not None:
        values.update(load_config_file(config_path))
    values.update({k: v for k, v in cli_overrides.items() if v is not None})
    return TrainConfig(**values)


def config_to_text(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(TrainConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: TrainConfig) -> str:
    return hashlib.sha256(config_to_text(cfg).encode()).hexdigest()[:16]


def config_from_dict(d: dict) -> TrainConfig:
    return TrainConfig(**{k: (tuple(v) if k == "hidden_widths" else v) for k, v in d.items()})


def config_as_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["hidden_widths"] = list(d["hidden_widths"])
    return d
