"""Flow-matching actor-critic RL with Langevin-refined action targets."""

from .config import TrainConfig, build_config
from .critic import DoubleCritic, bellman_target, critic_loss, grad_action, q_value, soft_update
from .flow import ActorLossReport, FlowPolicy, actor_loss, cfm_term, lambda_weight, sample_action
from .langevin import LangevinConfig, gradient_ascent_refine, refine_actions
from .nn import AdamState, MlpParams, MlpSpec, adam_step, forward, grad_input, grad_params, init_params
from .replay import ReplayBuffer, Transition
from .trainer import MetricsRecord, Trainer, evaluate_policy

__version__ = "0.1.0"

__all__ = [
    "ActorLossReport", "AdamState", "DoubleCritic", "FlowPolicy", "LangevinConfig",
    "MetricsRecord", "MlpParams", "MlpSpec", "ReplayBuffer", "Trainer", "TrainConfig",
    "Transition", "actor_loss", "adam_step", "bellman_target", "build_config",
    "cfm_term", "critic_loss", "evaluate_policy", "forward", "grad_action",
    "grad_input", "grad_params", "gradient_ascent_refine", "init_params",
    "lambda_weight", "q_value", "refine_actions", "sample_action", "soft_update",
]
