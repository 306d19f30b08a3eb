#!/usr/bin/env python3
"""Run the full desk-scale study: train every policy over several seeds,
then run the disturbance script, constant-velocity orbit traces, and metric
aggregation on the best checkpoints.

Produces under --out:
  {policy}_s{seed}/          learning_curve.csv, best.npz, final.npz,
                             metrics.json
  disturb_{policy}/          per-seed disturbance traces + disturb_metrics.json
  orbits_{policy}.csv        constant-velocity joint trace at --vd
  study_metrics.json         aggregate over all runs

With --figures, also renders the three figure kinds into figures/ using the
plots package (requires matplotlib).

The per-seed training runs are independent; --jobs N runs them in parallel
worker processes.
"""

import argparse
import json
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from planarquad.config import load_config
from planarquad.experiment import (aggregate_metrics, constant_velocity_trace,
                                   disturbance_test, load_policy_checkpoint,
                                   train_run)

POLICIES = ("direct", "structured", "highly")
PLOTS = Path(__file__).resolve().parent.parent / "plots" / "plot_figures.py"


def _train(args):
    policy, seed, config_path, out_dir, steps = args
    cfg = load_config(config_path)
    m = train_run(policy, seed, cfg, out_dir, total_steps=steps, progress=True)
    return policy, seed, m.rise_steps, m.highest_reward


def _best_checkpoint(base: Path, policy: str, seeds) -> Path:
    best, best_reward = None, -float("inf")
    for seed in seeds:
        with open(base / f"{policy}_s{seed}" / "metrics.json") as f:
            m = json.load(f)
        if m["highest_reward"] > best_reward:
            best_reward = m["highest_reward"]
            best = base / f"{policy}_s{seed}" / "best.npz"
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--config", type=Path, default=None)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--steps", type=int, default=150_000)
    ap.add_argument("--policies", nargs="+", default=list(POLICIES),
                    choices=POLICIES)
    ap.add_argument("--jobs", type=int, default=1,
                    help="parallel training worker processes")
    ap.add_argument("--vd", type=float, default=2.0,
                    help="desired velocity of the orbit trace")
    ap.add_argument("--figures", action="store_true",
                    help="render figures with the plots package")
    args = ap.parse_args(argv)
    base = args.out
    base.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)

    jobs = [(policy, seed, args.config, base / f"{policy}_s{seed}", args.steps)
            for policy in args.policies for seed in args.seeds
            if not (base / f"{policy}_s{seed}" / "metrics.json").exists()]
    if jobs:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for result in pool.map(_train, jobs):
                    print("trained:", *result, flush=True)
        else:
            for job in jobs:
                print("trained:", *_train(job), flush=True)

    for policy in args.policies:
        ckpt = _best_checkpoint(base, policy, args.seeds)
        if policy != "direct":
            disturbance_test(ckpt, cfg.disturbance, cfg, seeds=range(5),
                             out_dir=base / f"disturb_{policy}")
        policy_kind, actor, _ = load_policy_checkpoint(ckpt)
        constant_velocity_trace((policy_kind, actor, {}), cfg, v_d=args.vd,
                                duration=8.0,
                                out_path=base / f"orbits_{policy}.csv")

    run_dirs = [base / f"{p}_s{s}" for p in args.policies for s in args.seeds]
    summary = aggregate_metrics(run_dirs)
    with open(base / "study_metrics.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    print(json.dumps(summary, indent=2, sort_keys=True))

    if args.figures:
        fig_dir = base / "figures"
        curve_inputs = []
        for p in args.policies:
            for s in args.seeds:
                curve_inputs += ["--input",
                                 f"{p}={base / f'{p}_s{s}' / 'learning_curve.csv'}"]
        subprocess.run([sys.executable, str(PLOTS), "--kind", "learning_curve",
                        *curve_inputs, "--out", str(fig_dir / "learning_curves.png")],
                       check=True)
        for policy in args.policies:
            trace = base / f"disturb_{policy}" / "disturb_trace_seed0.csv"
            if trace.exists():
                subprocess.run([sys.executable, str(PLOTS), "--kind",
                                "tracking", "--input", f"{policy}={trace}",
                                "--out", str(fig_dir / f"tracking_{policy}.png")],
                               check=True)
            subprocess.run([sys.executable, str(PLOTS), "--kind", "orbits",
                            "--input", f"{policy}={base / f'orbits_{policy}.csv'}",
                            "--out", str(fig_dir / f"orbits_{policy}.png")],
                           check=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
