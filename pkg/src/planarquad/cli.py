"""Command-line entry point.

Subcommands: train, eval, disturb, metrics, trace, init-config.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from . import experiment
from .config import ExperimentConfig, load_config, save_config


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="YAML experiment config (defaults used if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planarquad",
        description="Planar quadruped locomotion learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one policy with one seed")
    p.add_argument("--policy", required=True,
                   choices=["direct", "structured", "highly"])
    p.add_argument("--seed", type=int, required=True)
    _add_config(p)
    p.add_argument("--no-early-stop", action="store_true",
                   help="disable the failure early-stop during training")
    p.add_argument("--steps", type=int, default=None,
                   help="override total training steps")
    p.add_argument("--out", type=Path, default=None,
                   help="run directory (default runs/<policy>_seed<seed>)")
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    _add_config(p)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("disturb", help="velocity-tracking disturbance test")
    p.add_argument("--checkpoint", type=Path, required=True)
    _add_config(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--out", type=Path, default=Path("disturb_out"))

    p = sub.add_parser("metrics", help="aggregate per-seed run metrics")
    p.add_argument("--run-dir", type=Path, required=True,
                   help="directory containing run subdirectories")

    p = sub.add_parser("trace", help="constant-velocity joint orbit trace")
    p.add_argument("--checkpoint", type=Path, required=True)
    _add_config(p)
    p.add_argument("--vd", type=float, default=2.0)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--out", type=Path, default=Path("orbits.csv"))

    p = sub.add_parser("init-config", help="write the default config YAML")
    p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "init-config":
        save_config(ExperimentConfig(), args.out)
        print(f"wrote {args.out}")
        return 0

    cfg = load_config(getattr(args, "config", None))

    if args.command == "train":
        out = args.out or Path("runs") / f"{args.policy}_seed{args.seed}"
        early_stop = False if args.no_early_stop else None
        m = experiment.train_run(args.policy, args.seed, cfg, out,
                                 total_steps=args.steps,
                                 early_stop=early_stop,
                                 progress=args.progress)
        print(json.dumps(m.to_dict(), indent=2, sort_keys=True))
        return 0

    if args.command == "eval":
        kind, actor, _ = experiment.load_policy_checkpoint(args.checkpoint)
        env = experiment.make_env(cfg, kind)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1000]))
        rewards = [experiment.run_episode(env, kind, actor, rng)
                   for _ in range(args.episodes)]
        print(json.dumps({"policy_kind": kind,
                          "mean_reward": float(np.mean(rewards)),
                          "std_reward": float(np.std(rewards)),
                          "episodes": args.episodes}, indent=2))
        return 0

    if args.command == "disturb":
        result = experiment.disturbance_test(
            args.checkpoint, cfg.disturbance, cfg, args.seeds, args.out)
        summary = {k: v for k, v in result.items() if k != "traces"}
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0

    if args.command == "metrics":
        run_dirs = [d for d in Path(args.run_dir).iterdir()
                    if (d / "metrics.json").exists()]
        print(json.dumps(experiment.aggregate_metrics(run_dirs),
                         indent=2, sort_keys=True))
        return 0

    if args.command == "trace":
        experiment.constant_velocity_trace(
            args.checkpoint, cfg, args.vd, args.duration, out_path=args.out)
        print(f"wrote {args.out}")
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
