"""Evaluation suite: success sweeps, cost of transport, ground-reaction and
swing-foot analysis, plus CSV/JSON emitters.

A trial is one deterministic-policy episode (actions are the Gaussian mean)
on a fixed-geometry staircase with randomized dynamics and spawn.  Success
means the pelvis passes the far edge of the staircase by a safety margin
without falling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np
import torch

from .env import ACTION_DIM, BipedEnv, EpisodeConfig
from .model import BipedModel, default_model
from .physics import forward_kinematics
from .terrain import StairGenConfig

SUCCESS_MARGIN = 0.5          # m past the last riser
CONTACT_THRESHOLD = 5.0       # N, touchdown detection
DEFAULT_SPEEDS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
COT_TRIM = 2.0                # s trimmed from each end of a trial


class EvaluationError(RuntimeError):
    pass


@dataclass
class TrialSpec:
    rise: float = 0.17
    run: float = 0.30
    n_steps: int = 5
    n_trials: int = 150
    speeds: tuple = DEFAULT_SPEEDS
    horizon: int = 1200
    approach_range: tuple = (1.0, 3.0)
    direction: str = "ascend"

    def terrain_config(self) -> StairGenConfig:
        return StairGenConfig(
            rise_range=(self.rise, self.rise),
            run_range=(self.run, self.run),
            per_step_noise=0.0,
            step_count_range=(self.n_steps, self.n_steps),
            approach_distance_range=self.approach_range,
            incline_range=(0.0, 0.0),
            landing_length_range=(2.0, 2.0),
            direction=self.direction,
            on_top_probability=0.0)


class PolicyRunner:
    """Deterministic rollout helper: feeds the Gaussian mean back as action."""

    def __init__(self, policy):
        self.policy = policy
        self.hidden = None

    def reset(self):
        self.hidden = None

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            mean, _, self.hidden = self.policy(
                torch.from_numpy(obs[None].astype(np.float64)), self.hidden)
        return mean[0].numpy()


def zero_policy(obs: np.ndarray) -> np.ndarray:
    return np.zeros(ACTION_DIM)


@dataclass
class TrialLog:
    """Per-control-step time series of one episode."""

    time: np.ndarray           # (T,)
    q: np.ndarray              # (T, 9)
    qd: np.ndarray             # (T, 9)
    grf: np.ndarray            # (T, 2, 2) per-foot (fx, fz)
    torque: np.ndarray         # (T, 6)
    energy: np.ndarray         # (T,) per-step motor energy, J
    reward: np.ndarray         # (T,)
    action: np.ndarray         # (T, 7)
    termination: str
    terrain_meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.time)

    def save_jsonl(self, path):
        with open(path, "w") as f:
            header = {"termination": self.termination,
                      "terrain_meta": self.terrain_meta, "length": len(self)}
            f.write(json.dumps({"header": header}) + "\n")
            for t in range(len(self)):
                f.write(json.dumps({
                    "time": self.time[t], "q": self.q[t].tolist(),
                    "qd": self.qd[t].tolist(), "grf": self.grf[t].tolist(),
                    "torque": self.torque[t].tolist(),
                    "energy": self.energy[t], "reward": self.reward[t],
                    "action": self.action[t].tolist()}) + "\n")

    @classmethod
    def load_jsonl(cls, path):
        with open(path) as f:
            header = json.loads(f.readline())["header"]
            rows = [json.loads(line) for line in f]
        get = lambda k: np.array([r[k] for r in rows])
        return cls(time=get("time"), q=get("q"), qd=get("qd"), grf=get("grf"),
                   torque=get("torque"), energy=get("energy"),
                   reward=get("reward"), action=get("action"),
                   termination=header["termination"],
                   terrain_meta=header["terrain_meta"])


def run_trial(env: BipedEnv, policy_fn, seed: int | None = None) -> TrialLog:
    """Roll one episode, logging physical quantities every control step."""
    obs = env.reset(seed)
    if hasattr(policy_fn, "reset"):
        policy_fn.reset()
    rec = {k: [] for k in ("time", "q", "qd", "grf", "torque", "energy",
                           "reward", "action")}
    done = False
    reason = "horizon"
    while not done:
        action = policy_fn(obs)
        obs, r, done, info = env.step(action)
        if info.get("termination") == "instability":
            reason = "instability"
            break
        rec["time"].append(info["time"])
        rec["q"].append(info["q"])
        rec["qd"].append(info["qd"])
        rec["grf"].append(np.asarray(info["grf"]))
        rec["torque"].append(info["torque"])
        rec["energy"].append(info["energy"])
        rec["reward"].append(r)
        rec["action"].append(np.clip(np.asarray(action, dtype=np.float64),
                                     -1.0, 1.0))
        if done:
            reason = info["termination"]
    return TrialLog(
        time=np.array(rec["time"]), q=np.array(rec["q"]), qd=np.array(rec["qd"]),
        grf=np.array(rec["grf"]), torque=np.array(rec["torque"]),
        energy=np.array(rec["energy"]), reward=np.array(rec["reward"]),
        action=np.array(rec["action"]), termination=reason,
        terrain_meta=dict(env.profile.metadata))


def trial_success(log: TrialLog, profile) -> bool:
    """Pelvis passed the last riser by the margin without falling."""
    if log.termination == "fall" or log.termination == "instability" or not len(log):
        return False
    risers = profile.riser_xs
    goal = (risers[-1] if len(risers) else 0.0) + SUCCESS_MARGIN
    return bool(np.max(log.q[:, 0]) >= goal)


def wilson_interval(successes: int, n: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 0.0, 1.0
    p = successes / n
    denom = 1.0 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return p, max(0.0, center - half), min(1.0, center + half)


def success_sweep(policy_fn, spec: TrialSpec | None = None,
                  model: BipedModel | None = None, seed: int = 0,
                  episode: EpisodeConfig | None = None,
                  keep_logs: bool = False, progress=None) -> dict:
    """Success rate vs commanded speed over repeated randomized trials."""
    spec = spec or TrialSpec()
    model = model or default_model()
    base = episode or EpisodeConfig()
    results = {"spec": asdict(spec), "per_speed": []}
    for speed in spec.speeds:
        cfg = replace(base, horizon=spec.horizon, terrain=spec.terrain_config(),
                      fixed_command=float(speed))
        env = BipedEnv(cfg, model, seed=seed)
        n_succ = 0
        logs = []
        for trial in range(spec.n_trials):
            log = run_trial(env, policy_fn,
                            seed=seed * 1_000_003 + hash((speed, trial)) % 2**31)
            ok = trial_success(log, env.profile)
            n_succ += ok
            if keep_logs:
                logs.append(log)
            if progress:
                progress(speed, trial, ok)
        p, lo, hi = wilson_interval(n_succ, spec.n_trials)
        entry = {"speed": float(speed), "trials": spec.n_trials,
                 "successes": n_succ, "rate": p, "ci_low": lo, "ci_high": hi}
        if keep_logs:
            entry["logs"] = logs
        results["per_speed"].append(entry)
    return results


# ---------------------------------------------------------------------------
# energetics


def motor_energy(tau: np.ndarray, omega: np.ndarray, t: np.ndarray,
                 omega_max: np.ndarray, p_max: np.ndarray) -> float:
    """Trapezoid integral of positive mechanical power plus resistive loss.

    tau, omega: (T, n_joints) sampled torque and joint velocity; t: (T,).
    """
    tau = np.asarray(tau, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    power = np.maximum(tau * omega, 0.0) + (omega_max / p_max) * tau**2
    return float(np.trapezoid(power.sum(axis=1), np.asarray(t)))


def cost_of_transport(log: TrialLog, model: BipedModel,
                      trim: float = COT_TRIM) -> dict:
    """Motor energy per unit weight-distance over the steady-state window.

    The first and last `trim` seconds are discarded so transients at spawn
    and termination do not pollute the estimate.
    """
    if not len(log):
        raise EvaluationError("empty trial log")
    t = log.time
    keep = (t >= t[0] + trim) & (t <= t[-1] - trim)
    if keep.sum() < 2:
        raise EvaluationError("trial too short for the trim window")
    d = float(log.q[keep, 0][-1] - log.q[keep, 0][0])
    if d <= 0:
        raise EvaluationError(f"nonpositive displacement {d:.3f} m")
    e = float(np.sum(log.energy[keep]))
    cot = e / (model.total_mass * model.gravity * d)
    return {"cot": cot, "energy": e, "distance": d,
            "duration": float(t[keep][-1] - t[keep][0])}


# ---------------------------------------------------------------------------
# ground reaction forces


def stance_windows(fn: np.ndarray, threshold: float = CONTACT_THRESHOLD):
    """Contiguous index ranges where the normal force exceeds the threshold."""
    above = np.asarray(fn) > threshold
    edges = np.diff(above.astype(int))
    starts = list(np.where(edges == 1)[0] + 1)
    ends = list(np.where(edges == -1)[0] + 1)
    if above.size and above[0]:
        starts.insert(0, 0)
    if above.size and above[-1]:
        ends.append(len(above))
    return list(zip(starts, ends))


def grf_analysis(log: TrialLog, model: BipedModel) -> dict:
    """Per-foot stance phases, peak forces, and cumulative vertical impulse."""
    out = {"feet": []}
    dt = np.gradient(log.time) if len(log) > 1 else np.array([0.0])
    weight = model.total_mass * model.gravity
    for foot in range(2):
        fn = log.grf[:, foot, 1]
        phases = []
        for s, e in stance_windows(fn):
            seg_dt = dt[s:e]
            phases.append({
                "start_time": float(log.time[s]),
                "duration": float(log.time[e - 1] - log.time[s]),
                "peak_force": float(fn[s:e].max()),
                "peak_force_bw": float(fn[s:e].max() / weight),
                "impulse": float(np.sum(fn[s:e] * seg_dt)),
            })
        out["feet"].append({
            "stance_phases": phases,
            "cumulative_impulse": float(np.sum(fn * dt)),
            "mean_force": float(fn.mean()) if len(log) else 0.0,
        })
    out["total_impulse"] = sum(f["cumulative_impulse"] for f in out["feet"])
    return out


# ---------------------------------------------------------------------------
# swing-foot kinematics


def foot_trajectories(log: TrialLog, model: BipedModel) -> np.ndarray:
    """Ankle paths (T, 2 feet, 2) recovered from logged joint angles."""
    out = np.zeros((len(log), 2, 2))
    for t in range(len(log)):
        fk = forward_kinematics(log.q[t], model)
        out[t, 0] = fk["ankle_l"]
        out[t, 1] = fk["ankle_r"]
    return out


def swing_metrics(log: TrialLog, model: BipedModel, profile) -> dict:
    """Apex clearance and touchdown retraction speed per swing phase."""
    paths = foot_trajectories(log, model)
    out = {"feet": []}
    for foot in range(2):
        fn = log.grf[:, foot, 1]
        stances = stance_windows(fn)
        # swing = gaps between successive stance windows
        swings = [(e0, s1) for (s0, e0), (s1, e1) in zip(stances, stances[1:])
                  if s1 - e0 >= 2]
        entries = []
        for s, e in swings:
            xs = paths[s:e, foot, 0]
            zs = paths[s:e, foot, 1]
            ground = np.array([profile.height_at(x) for x in xs])
            clearance = zs - ground
            td = e - 1
            dt = log.time[td] - log.time[td - 1]
            vx_foot = (paths[td, foot, 0] - paths[td - 1, foot, 0]) / dt
            vx_pelvis = (log.q[td, 0] - log.q[td - 1, 0]) / dt
            entries.append({
                "start_time": float(log.time[s]),
                "duration": float(log.time[e - 1] - log.time[s]),
                "apex_clearance": float(clearance.max()),
                "stride_length": float(xs[-1] - xs[0]),
                "retraction_velocity": float(vx_foot - vx_pelvis),
            })
        out["feet"].append({"swing_phases": entries})
    return out


# ---------------------------------------------------------------------------
# emitters


def write_sweep_csv(results: dict, path):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=("speed", "trials", "successes",
                                          "rate", "ci_low", "ci_high"))
        w.writeheader()
        for row in results["per_speed"]:
            w.writerow({k: row[k] for k in w.fieldnames})


def write_json(obj: dict, path):
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items() if k != "logs"}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        if isinstance(x, np.ndarray):
            return x.tolist()
        return x
    with open(path, "w") as f:
        json.dump(clean(obj), f, indent=2)
