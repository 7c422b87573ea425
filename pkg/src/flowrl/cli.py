"""Command-line interface: train, eval, and bench subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import bench_latency, format_table
from .checkpoint import load_checkpoint
from .config import build_config, config_from_dict
from .envs import ENV_IDS, make as make_env
from .trainer import Trainer, build_policy, evaluate_checkpoint, _params_from_arrays


def _add_common(p):
    p.add_argument("--config", type=str, default=None, help="flat key=value config file")
    p.add_argument("--env", type=str, choices=ENV_IDS, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default="runs/out")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--checkpoint", type=str, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowrl",
                                     description="Flow-matching actor-critic training stack")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the training loop")
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--episodes", type=int, default=20)

    p_bench = sub.add_parser("bench", help="inference latency benchmark")
    _add_common(p_bench)
    p_bench.add_argument("--steps", type=int, nargs="+", default=[1, 5, 20])
    p_bench.add_argument("--repetitions", type=int, default=1000)
    return parser


def cmd_train(args) -> int:
    if args.checkpoint:
        trainer = Trainer.restore(args.checkpoint, args.out)
        if args.iterations is not None:
            from dataclasses import replace
            trainer.cfg = replace(trainer.cfg, iterations=args.iterations)
    else:
        cfg = build_config(args.config, env=args.env, seed=args.seed,
                           iterations=args.iterations)
        trainer = Trainer(cfg, args.out)
    final = trainer.train()
    print(f"final checkpoint: {final}")
    print(f"metrics stream:   {Path(args.out) / 'metrics.jsonl'}")
    return 0


def cmd_eval(args) -> int:
    if not args.checkpoint:
        print("eval requires --checkpoint", file=sys.stderr)
        return 2
    stats = evaluate_checkpoint(args.checkpoint, args.env, args.episodes,
                                args.seed if args.seed is not None else 0)
    stats.pop("returns")
    print(json.dumps(stats, sort_keys=True, indent=2))
    return 0


def cmd_bench(args) -> int:
    if args.checkpoint:
        meta, arrays = load_checkpoint(args.checkpoint)
        cfg = config_from_dict(meta["config"])
        env = make_env(cfg.env, density=cfg.density)
        policy = build_policy(cfg, env.observation_dim, env.action_low, env.action_high)
        policy = policy.with_params(_params_from_arrays("policy", arrays))
    else:
        cfg = build_config(args.config, env=args.env, seed=args.seed)
        env = make_env(cfg.env, density=cfg.density)
        policy = build_policy(cfg, env.observation_dim, env.action_low, env.action_high)
    obs = env.reset(seed=cfg.seed)
    rows = bench_latency(policy, obs, step_counts=tuple(args.steps),
                         repetitions=args.repetitions)
    print(format_table(rows))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args)
    if args.command == "eval":
        return cmd_eval(args)
    return cmd_bench(args)


if __name__ == "__main__":
    raise SystemExit(main())
