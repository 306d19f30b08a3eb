"""Experiment orchestration: training runs with periodic evaluation, the
velocity-tracking disturbance test, and metric computation (rise steps,
highest reward, pitch/height stds, cost of transport, gait periodicity).

All CSV emission uses fixed headers and repr-exact float formatting so that
identical seed + config reproduce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .config import (DisturbanceScript, EvalProtocol, ExperimentConfig,
                     config_to_dict)
from .controllers import scale_vd
from .env import LocomotionEnv, POLICY_KINDS
from .rl import TD3, OneStepDDPG, TrainerConfig, explore_action


class NotReached(RuntimeError):
    """The learning curve never crossed the rise threshold."""


class ZeroVelocity(ValueError):
    pass


class TraceTooShort(ValueError):
    pass


RISE_THRESHOLD = 700.0

LEARNING_CURVE_HEADER = ["step", "mean_reward", "std_reward"]
DISTURB_HEADER = ["t", "v", "v_d", "pitch", "height", "fx"]
ORBITS_HEADER = ["t", "leg", "q_hip", "qd_hip", "q_knee", "qd_knee"]


@dataclass
class RunMetrics:
    policy_kind: str
    seed: int
    curve: list[tuple[int, float, float]] = field(default_factory=list)
    rise_steps: int | None = None
    rise_time_s: float | None = None
    highest_reward: float = -np.inf
    std_pitch: float | None = None
    std_height: float | None = None
    cot: float | None = None

    def to_dict(self) -> dict:
        return {
            "policy_kind": self.policy_kind,
            "seed": self.seed,
            "rise_steps": self.rise_steps,
            "rise_time_s": self.rise_time_s,
            "highest_reward": self.highest_reward,
            "std_pitch": self.std_pitch,
            "std_height": self.std_height,
            "cot": self.cot,
        }


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def make_env(cfg: ExperimentConfig, policy_kind: str,
             early_stop: bool | None = None) -> LocomotionEnv:
    episode = cfg.episode
    if early_stop is not None:
        import dataclasses
        episode = dataclasses.replace(episode, early_stop_enabled=early_stop)
    return LocomotionEnv(policy_kind, model=cfg.robot, sim=cfg.sim,
                         episode=episode, bounds=cfg.bounds,
                         nominal=cfg.trajectory.build())


def policy_action(policy_kind: str, actor: nn.MlpParams, obs_vec: np.ndarray,
                  v_d: float) -> np.ndarray:
    """Deterministic (noise-free) normalized action of a trained actor."""
    if policy_kind == "highly":
        return nn.forward(actor, np.array([scale_vd(v_d)]))
    return nn.forward(actor, obs_vec)


def run_episode(env: LocomotionEnv, policy_kind: str, actor: nn.MlpParams,
                rng: np.random.Generator, v_d: float | None = None) -> float:
    """Noise-free episode; returns the cumulative reward."""
    obs = env.reset(rng, v_d=v_d)
    total = 0.0
    while True:
        a = policy_action(policy_kind, actor, obs.to_vector(), env.v_d)
        res = env.step(a)
        total += res.reward
        obs = res.observation
        if res.terminated or res.truncated:
            return total


def evaluate(cfg: ExperimentConfig, policy_kind: str, actor: nn.MlpParams,
             seed: int, eval_index: int) -> tuple[float, float]:
    """Mean/std cumulative reward over the evaluation episodes."""
    env = make_env(cfg, policy_kind)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1000 + eval_index]))
    rewards = [run_episode(env, policy_kind, actor, rng)
               for _ in range(cfg.eval.eval_episodes)]
    return float(np.mean(rewards)), float(np.std(rewards))


def save_policy_checkpoint(path: Path, policy_kind: str, actor: nn.MlpParams,
                           extra_nets: dict[str, nn.MlpParams] | None = None,
                           cfg: ExperimentConfig | None = None) -> None:
    nets = {"actor": actor}
    if extra_nets:
        nets.update(extra_nets)
    meta = {"policy_kind": policy_kind}
    if cfg is not None:
        meta["config"] = config_to_dict(cfg)
    nn.save_checkpoint(path, nets, meta)


def load_policy_checkpoint(path) -> tuple[str, nn.MlpParams, dict]:
    nets, meta = nn.load_checkpoint(path)
    return meta["policy_kind"], nets["actor"], meta


def train_run(policy_kind: str, seed: int, cfg: ExperimentConfig,
              out_dir: str | Path, total_steps: int | None = None,
              early_stop: bool | None = None,
              progress: bool = False) -> RunMetrics:
    """Full training loop: TD3 for direct/structured, one-step DDPG for
    highly.  Writes learning_curve.csv, best.npz, final.npz, metrics.json."""
    if policy_kind not in POLICY_KINDS:
        raise ValueError(f"unknown policy kind {policy_kind!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tcfg = cfg.trainer
    total = total_steps if total_steps is not None else tcfg.total_steps
    interval = cfg.eval.eval_interval
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    env = make_env(cfg, policy_kind, early_stop=early_stop)

    metrics = RunMetrics(policy_kind, seed)
    t0 = time.monotonic()
    best = -np.inf
    eval_times: list[float] = []

    def run_eval(actor: nn.MlpParams, step: int) -> None:
        nonlocal best
        mean_r, std_r = evaluate(cfg, policy_kind, actor, seed,
                                 len(metrics.curve))
        metrics.curve.append((step, mean_r, std_r))
        eval_times.append(time.monotonic() - t0)
        if mean_r > best:
            best = mean_r
            metrics.highest_reward = mean_r
            save_policy_checkpoint(out / "best.npz", policy_kind, actor,
                                   cfg=cfg)
        if progress:
            print(f"[{policy_kind} seed={seed}] step {step}: "
                  f"eval {mean_r:.1f} +- {std_r:.1f}", flush=True)

    if policy_kind == "highly":
        trainer = OneStepDDPG(env.action_dim, tcfg, rng)
        steps = 0
        next_eval = 1
        while steps < total:
            obs = env.reset(rng)
            v_d = env.v_d
            a = explore_action(trainer.actor, np.array([scale_vd(v_d)]),
                               tcfg, steps, rng)
            ep_reward = 0.0
            while True:
                res = env.step(a)
                ep_reward += res.reward
                steps += 1
                if res.terminated or res.truncated:
                    break
            trainer.buffer.add(v_d, a, ep_reward)
            trainer.train(rng)
            while next_eval * interval <= steps and next_eval * interval <= total:
                run_eval(trainer.actor, next_eval * interval)
                next_eval += 1
        while next_eval * interval <= total:
            run_eval(trainer.actor, next_eval * interval)
            next_eval += 1
        final_actor = trainer.actor
        extra = {"critic": trainer.critic}
    else:
        trainer = TD3(26, env.action_dim, tcfg, rng)
        obs_vec = env.reset(rng).to_vector()
        for step in range(1, total + 1):
            a = explore_action(trainer.actor, obs_vec, tcfg, step - 1, rng)
            res = env.step(a)
            trainer.buffer.add(obs_vec, a, res.reward,
                               res.observation.to_vector(), res.terminated)
            obs_vec = res.observation.to_vector()
            if res.terminated or res.truncated:
                obs_vec = env.reset(rng).to_vector()
            if step >= tcfg.random_steps and trainer.buffer.size >= tcfg.batch_size:
                trainer.update(rng)
            if step % interval == 0:
                run_eval(trainer.actor, step)
        final_actor = trainer.actor
        extra = {"critic1": trainer.critic1, "critic2": trainer.critic2}

    write_csv(out / "learning_curve.csv", LEARNING_CURVE_HEADER, metrics.curve)
    save_policy_checkpoint(out / "final.npz", policy_kind, final_actor,
                           extra_nets=extra, cfg=cfg)
    try:
        metrics.rise_steps, metrics.rise_time_s = rise_statistics(
            metrics.curve, eval_times)
    except NotReached:
        pass
    with open(out / "metrics.json", "w") as f:
        json.dump(metrics.to_dict(), f, indent=2, sort_keys=True)
    return metrics


def rise_statistics(curve, eval_times=None,
                    threshold: float = RISE_THRESHOLD) -> tuple[int, float]:
    """First evaluation step whose mean reward crosses the threshold."""
    if not curve:
        raise ValueError("curve is empty")
    for i, (step, mean_r, _) in enumerate(curve):
        if mean_r > threshold:
            t = eval_times[i] if eval_times else float("nan")
            return int(step), float(t)
    raise NotReached(f"mean reward never exceeded {threshold}")


def disturbance_test(checkpoint, script: DisturbanceScript,
                     cfg: ExperimentConfig, seeds, out_dir: str | Path | None = None
                     ) -> dict:
    """Run the 20 s velocity/force script per seed; no early stop.

    Returns pooled std_pitch/std_height/cot, tumble count, and per-seed
    traces.  Tumbles use the failure inequality but only get recorded, not
    terminated.
    """
    policy_kind, actor, _ = (checkpoint if isinstance(checkpoint, tuple)
                             else load_policy_checkpoint(checkpoint))
    n_steps = int(round(script.total_time / cfg.sim.control_dt))
    traces = []
    tumbles = 0
    pitches, heights, powers, vels = [], [], [], []
    for seed in seeds:
        env = make_env(cfg, policy_kind, early_stop=False)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
        obs = env.reset(rng, v_d=script.v_d_at(0.0))
        rows = []
        tumbled = False
        for k in range(n_steps):
            t = k * cfg.sim.control_dt
            env.v_d = script.v_d_at(t)
            fx = script.force_at(t)
            a = policy_action(policy_kind, actor, obs.to_vector(), env.v_d)
            res = env.step(a, external_force=(fx, 0.0))
            obs = res.observation
            info = res.info
            rows.append((info["time"], info["com_vx"], env.v_d,
                         info["pitch"], info["com_height"], fx))
            pitches.append(info["pitch"])
            heights.append(info["com_height"])
            powers.append(info["power"])
            vels.append(info["com_vx"])
            if (abs(info["pitch"]) > cfg.episode.pitch_limit
                    or info["com_height"] < cfg.episode.height_limit):
                tumbled = True
            if res.terminated:  # integrator blow-up only
                break
        tumbles += int(tumbled)
        traces.append(rows)
        if out_dir is not None:
            write_csv(Path(out_dir) / f"disturb_trace_seed{seed}.csv",
                      DISTURB_HEADER, rows)

    trace_stats = {"power": np.asarray(powers), "com_vx": np.asarray(vels)}
    try:
        cot = cost_of_transport(trace_stats, cfg)
    except ZeroVelocity:
        cot = None
    result = {
        "std_pitch": float(np.std(pitches)),
        "std_height": float(np.std(heights)),
        "tumble_count": tumbles,
        "cot": cot,
        "traces": traces,
    }
    if out_dir is not None:
        summary = {k: v for k, v in result.items() if k != "traces"}
        with open(Path(out_dir) / "disturb_metrics.json", "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
    return result


def cost_of_transport(trace: dict, cfg: ExperimentConfig) -> float:
    """COT = mean power / (weight * mean horizontal velocity)."""
    p_mean = float(np.mean(trace["power"]))
    v_mean = float(np.mean(trace["com_vx"]))
    if v_mean <= 1e-3:
        raise ZeroVelocity(f"mean velocity {v_mean:.3g} m/s is too small")
    weight = cfg.robot.total_mass * cfg.robot.gravity
    return p_mean / (weight * v_mean)


def constant_velocity_trace(checkpoint, cfg: ExperimentConfig, v_d: float,
                            duration: float, seed: int = 0,
                            out_path: str | Path | None = None) -> dict:
    """Run a checkpoint at constant v_d; returns joint trace + orbit rows."""
    policy_kind, actor, _ = (checkpoint if isinstance(checkpoint, tuple)
                             else load_policy_checkpoint(checkpoint))
    env = make_env(cfg, policy_kind, early_stop=False)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    obs = env.reset(rng, v_d=v_d)
    n_steps = int(round(duration / cfg.sim.control_dt))
    joints = np.zeros((n_steps, 16))
    rows = []
    times = np.zeros(n_steps)
    for k in range(n_steps):
        a = policy_action(policy_kind, actor, obs.to_vector(), v_d)
        res = env.step(a)
        obs = res.observation
        q, qd = res.info["q"], res.info["qdot"]
        times[k] = res.info["time"]
        for leg in range(4):
            vals = (q[3 + 2 * leg], qd[3 + 2 * leg],
                    q[4 + 2 * leg], qd[4 + 2 * leg])
            joints[k, 4 * leg:4 * leg + 4] = vals
            rows.append((times[k], leg, *vals))
    if out_path is not None:
        write_csv(Path(out_path), ORBITS_HEADER, rows)
    return {"times": times, "joints": joints, "rows": rows,
            "policy_kind": policy_kind}


def periodicity_score(signals: np.ndarray, expected_period: float,
                      dt: float) -> float:
    """Normalized RMS distance between the joint trace and itself shifted
    by one expected gait period.  ~0 for periodic, ~sqrt(2) for noise."""
    signals = np.asarray(signals, dtype=float)
    shift = int(round(expected_period / dt))
    if shift < 1 or signals.shape[0] < 3 * shift:
        raise TraceTooShort(
            f"need >= 3 periods ({3 * shift} samples), have {signals.shape[0]}")
    scores = []
    for j in range(signals.shape[1]):
        x = signals[:, j]
        sd = float(np.std(x))
        if sd < 1e-12:
            continue
        d = x[shift:] - x[:-shift]
        scores.append(float(np.sqrt(np.mean(d ** 2))) / sd)
    return float(np.mean(scores)) if scores else 0.0


def periodicity_report(trace: dict, expected_period: float, dt: float) -> dict:
    """Per-leg phase-portrait data plus the periodicity score."""
    score = periodicity_score(trace["joints"], expected_period, dt)
    orbits = {leg: trace["joints"][:, 4 * leg:4 * leg + 4] for leg in range(4)}
    return {"score": score, "orbits": orbits,
            "expected_period": expected_period}


def aggregate_metrics(run_dirs) -> dict:
    """Reduce per-seed metrics.json files; order-independent."""
    per_policy: dict[str, list[dict]] = {}
    for d in sorted(Path(p) for p in run_dirs):
        with open(d / "metrics.json") as f:
            m = json.load(f)
        per_policy.setdefault(m["policy_kind"], []).append(m)
    out = {}
    for kind, runs in sorted(per_policy.items()):
        rises = [m["rise_steps"] for m in runs if m["rise_steps"] is not None]
        out[kind] = {
            "n_runs": len(runs),
            "rise_steps_mean": float(np.mean(rises)) if rises else None,
            "n_reached": len(rises),
            "highest_reward": max(m["highest_reward"] for m in runs),
        }
    return out
