"""Recurrent PPO with a trust-region guard and a symmetry (mirror) loss.

Collection runs a set of environments in lockstep inside one process, so a
given seed always produces the same buffer regardless of how many parallel
environments are used for throughput.  Updates run at most a fixed number of
epochs; after each epoch the exact Gaussian KL between the pre-update policy
and the current one is measured over the whole buffer, and if it exceeds the
threshold the epoch is rolled back and the update stops early.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import nets
from .env import (ACTION_DIM, BipedEnv, EpisodeConfig, layout_checksum,
                  make_mirror_maps, observation_dim)
from .model import BipedModel, default_model


@dataclass
class PPOConfig:
    variant: str = "stair"
    policy_kind: str = "lstm"        # "lstm" or "ff"
    buffer_size: int = 50000         # timesteps collected per iteration
    traj_batch: int = 64             # recurrent minibatch, in trajectories
    step_batch: int = 1024           # feedforward minibatch, in timesteps
    max_epochs: int = 5
    kl_threshold: float = 0.02
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    lr: float = 0.0005
    value_coef: float = 0.5
    mirror_coef: float = 1.0
    grad_clip: float = 1.0
    normalize_advantages: bool = True
    iterations: int = 1000
    num_envs: int = 8
    seed: int = 0
    save_every: int = 10
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)

    def __post_init__(self):
        if self.policy_kind not in ("lstm", "ff"):
            raise ValueError("policy_kind must be 'lstm' or 'ff'")
        if self.kl_threshold < 0 or self.clip <= 0 or self.buffer_size <= 0:
            raise ValueError("bad PPO hyperparameters")
        self.episode.variant = self.variant


VARIANT_PRESETS = {
    "stair-lstm": dict(variant="stair", policy_kind="lstm"),
    "stair-ff": dict(variant="stair", policy_kind="ff"),
    "flat-lstm": dict(variant="flat", policy_kind="lstm"),
    "proximity-lstm": dict(variant="proximity", policy_kind="lstm"),
}


@dataclass
class Episode:
    obs: np.ndarray        # (T, D)
    actions: np.ndarray    # (T, A)
    log_probs: np.ndarray  # (T,)
    rewards: np.ndarray    # (T,)
    values: np.ndarray     # (T,)
    means: np.ndarray      # (T, A) behaviour-policy means
    log_std: np.ndarray    # (A,) behaviour-policy log-std
    last_value: float      # bootstrap value (0 unless truncated)
    truncated: bool
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self):
        return len(self.rewards)


def compute_gae(rewards, values, last_value, gamma=0.99, lam=0.95):
    """Generalized advantage estimates and discounted returns for one episode."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = len(rewards)
    adv = np.zeros(T)
    next_value = last_value
    gae = 0.0
    for t in range(T - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        gae = delta + gamma * lam * gae
        adv[t] = gae
        next_value = values[t]
    return adv, adv + values


class RolloutBuffer:
    def __init__(self):
        self.episodes: list[Episode] = []

    def add(self, ep: Episode):
        self.episodes.append(ep)

    def clear(self):
        self.episodes = []

    @property
    def total_steps(self):
        return sum(len(e) for e in self.episodes)

    def finalize(self, gamma, lam, normalize=True):
        for ep in self.episodes:
            ep.advantages, ep.returns = compute_gae(
                ep.rewards, ep.values, ep.last_value, gamma, lam)
        if normalize and self.episodes:
            all_adv = np.concatenate([e.advantages for e in self.episodes])
            mu, sd = all_adv.mean(), all_adv.std()
            for ep in self.episodes:
                ep.advantages = (ep.advantages - mu) / (sd + 1e-8)

    def padded(self, dtype=torch.float64):
        """Pack episodes into padded (N, Tmax, ...) tensors plus a mask."""
        N = len(self.episodes)
        Tmax = max(len(e) for e in self.episodes)
        D = self.episodes[0].obs.shape[1]
        A = self.episodes[0].actions.shape[1]
        obs = torch.zeros(N, Tmax, D, dtype=dtype)
        act = torch.zeros(N, Tmax, A, dtype=dtype)
        logp = torch.zeros(N, Tmax, dtype=dtype)
        adv = torch.zeros(N, Tmax, dtype=dtype)
        ret = torch.zeros(N, Tmax, dtype=dtype)
        mean_old = torch.zeros(N, Tmax, A, dtype=dtype)
        lstd_old = torch.zeros(N, Tmax, A, dtype=dtype)
        mask = torch.zeros(N, Tmax, dtype=dtype)
        for i, e in enumerate(self.episodes):
            T = len(e)
            obs[i, :T] = torch.from_numpy(e.obs)
            act[i, :T] = torch.from_numpy(e.actions)
            logp[i, :T] = torch.from_numpy(e.log_probs)
            adv[i, :T] = torch.from_numpy(e.advantages)
            ret[i, :T] = torch.from_numpy(e.returns)
            mean_old[i, :T] = torch.from_numpy(e.means)
            lstd_old[i, :T] = torch.from_numpy(np.broadcast_to(e.log_std, (T, A)).copy())
            mask[i, :T] = 1.0
        return dict(obs=obs, act=act, logp=logp, adv=adv, ret=ret,
                    mean_old=mean_old, lstd_old=lstd_old, mask=mask)

    def flat(self, dtype=torch.float64):
        cat = lambda key: np.concatenate([getattr(e, key) for e in self.episodes])
        A = self.episodes[0].actions.shape[1]
        lstd = np.concatenate([np.broadcast_to(e.log_std, (len(e), A))
                               for e in self.episodes])
        return dict(
            obs=torch.from_numpy(cat("obs")),
            act=torch.from_numpy(cat("actions")),
            logp=torch.from_numpy(cat("log_probs")),
            adv=torch.from_numpy(cat("advantages")),
            ret=torch.from_numpy(cat("returns")),
            mean_old=torch.from_numpy(cat("means")),
            lstd_old=torch.from_numpy(lstd.copy()))


# ---------------------------------------------------------------------------
# lockstep collection


class _EnvSlot:
    def __init__(self, env: BipedEnv, hidden):
        self.env = env
        self.hidden = hidden
        self.obs = env.reset()
        self.traj = {k: [] for k in ("obs", "actions", "log_probs", "rewards",
                                     "values", "means")}


def _slice_hidden(hidden, i):
    if hidden is None:
        return None
    return (hidden[0][:, i:i + 1], hidden[1][:, i:i + 1])


class Collector:
    """Steps num_envs environments in lockstep with batched policy forwards."""

    def __init__(self, config: PPOConfig, policy, value,
                 model: BipedModel | None = None):
        self.config = config
        self.policy = policy
        self.value = value
        self.model = model or default_model()
        self.envs = [BipedEnv(config.episode, self.model,
                              seed=config.seed * 1000 + i)
                     for i in range(config.num_envs)]
        self.noise_gen = torch.Generator().manual_seed(config.seed)
        self.stats: dict = {}

    def collect(self, buffer: RolloutBuffer, n_steps: int):
        """Fill the buffer with at least n_steps timesteps of experience."""
        cfg = self.config
        W = len(self.envs)
        slots = []
        pol_hidden = self.policy.initial_hidden(W) if self.policy.is_recurrent else None
        val_hidden = self.value.initial_hidden(W) if self.value.is_recurrent else None
        for i, env in enumerate(self.envs):
            slots.append(_EnvSlot(env, None))
        returns, lengths, terminations = [], [], []
        collected = 0
        with torch.no_grad():
            while collected < n_steps:
                obs = torch.from_numpy(np.stack([s.obs for s in slots]))
                mean, log_std, pol_hidden = self.policy(obs, pol_hidden)
                val, val_hidden = self.value(obs, val_hidden)
                action, logp = nets.sample_action(mean, log_std, self.noise_gen)
                action_np = action.numpy()
                for i, s in enumerate(slots):
                    next_obs, r, done, info = s.env.step(action_np[i])
                    s.traj["obs"].append(s.obs)
                    s.traj["actions"].append(action_np[i])
                    s.traj["log_probs"].append(float(logp[i]))
                    s.traj["rewards"].append(float(r))
                    s.traj["values"].append(float(val[i]))
                    s.traj["means"].append(mean[i].numpy())
                    s.obs = next_obs
                    collected += 1
                    if done:
                        truncated = info.get("termination") == "horizon"
                        last_value = 0.0
                        if truncated:
                            h = (self.value.initial_hidden(1)
                                 if not self.value.is_recurrent
                                 else _slice_hidden(val_hidden, i))
                            v_last, _ = self.value(
                                torch.from_numpy(next_obs[None]), h)
                            last_value = float(v_last[0])
                        buffer.add(self._finish(s, log_std, last_value, truncated))
                        returns.append(float(np.sum(buffer.episodes[-1].rewards)))
                        lengths.append(len(buffer.episodes[-1]))
                        terminations.append(info.get("termination"))
                        s.obs = s.env.reset()
                        s.traj = {k: [] for k in s.traj}
                        if pol_hidden is not None:
                            pol_hidden[0][:, i] = 0.0
                            pol_hidden[1][:, i] = 0.0
                        if val_hidden is not None:
                            val_hidden[0][:, i] = 0.0
                            val_hidden[1][:, i] = 0.0
            # truncate any in-flight episodes with a value bootstrap
            for i, s in enumerate(slots):
                if not s.traj["rewards"]:
                    continue
                h = (None if not self.value.is_recurrent
                     else _slice_hidden(val_hidden, i))
                v_last, _ = self.value(torch.from_numpy(s.obs[None]), h)
                ep = self._finish(s, log_std, float(v_last[0]), True)
                buffer.add(ep)
                returns.append(float(np.sum(ep.rewards)))
                lengths.append(len(ep))
                terminations.append("cutoff")
        self.stats = {
            "episodes": len(returns),
            "mean_return": float(np.mean(returns)) if returns else 0.0,
            "mean_length": float(np.mean(lengths)) if lengths else 0.0,
            "falls": terminations.count("fall"),
            "steps": buffer.total_steps,
        }
        return self.stats

    @staticmethod
    def _finish(slot: _EnvSlot, log_std, last_value, truncated) -> Episode:
        t = slot.traj
        return Episode(
            obs=np.asarray(t["obs"], dtype=np.float64),
            actions=np.asarray(t["actions"], dtype=np.float64),
            log_probs=np.asarray(t["log_probs"], dtype=np.float64),
            rewards=np.asarray(t["rewards"], dtype=np.float64),
            values=np.asarray(t["values"], dtype=np.float64),
            means=np.asarray(t["means"], dtype=np.float64),
            log_std=log_std[0].numpy().copy() if log_std.dim() > 1
            else log_std.numpy().copy(),
            last_value=last_value,
            truncated=truncated)


# ---------------------------------------------------------------------------
# update


def mirror_loss(policy, obs, maps, hidden=None, mask=None):
    """MSE between the mirrored policy mean and the mean on mirrored inputs."""
    obs_perm = torch.as_tensor(maps.obs_perm, dtype=torch.long)
    obs_sign = torch.as_tensor(maps.obs_sign, dtype=obs.dtype)
    act_perm = torch.as_tensor(maps.act_perm, dtype=torch.long)
    act_sign = torch.as_tensor(maps.act_sign, dtype=obs.dtype)
    m_obs = obs[..., obs_perm] * obs_sign
    mean, _, _ = policy(obs, hidden)
    mean_m, _, _ = policy(m_obs, hidden)
    diff = mean[..., act_perm] * act_sign - mean_m
    if mask is not None:
        return ((diff**2).sum(-1) * mask).sum() / mask.sum()
    return (diff**2).mean(0).sum()


class PPO:
    def __init__(self, config: PPOConfig, model: BipedModel | None = None):
        self.config = config
        torch.manual_seed(config.seed)  # network init reproducibility
        obs_dim = observation_dim(config.variant)
        self.policy = nets.make_policy(config.policy_kind, obs_dim, ACTION_DIM)
        self.value = nets.make_value(config.policy_kind, obs_dim)
        # separate optimizers: the KL trust region constrains only the policy,
        # value-function progress is never rolled back
        self.pol_opt = nets.make_adam(self.policy.parameters(), lr=config.lr)
        self.val_opt = nets.make_adam(self.value.parameters(), lr=config.lr)
        self.maps = make_mirror_maps(config.variant)
        self.collector = Collector(config, self.policy, self.value, model)
        self.batch_rng = np.random.default_rng(config.seed + 7919)
        self.iteration = 0

    # -- loss pieces --------------------------------------------------------

    def _losses(self, batch, mask=None):
        cfg = self.config
        mean, log_std, _ = self.policy(batch["obs"])
        value, _ = self.value(batch["obs"])
        logp = nets.log_prob(mean, log_std, batch["act"])
        ratio = torch.exp(logp - batch["logp"])
        adv = batch["adv"]
        surr = torch.minimum(
            ratio * adv,
            torch.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv)
        verr = (value - batch["ret"]) ** 2
        if mask is not None:
            n = mask.sum()
            policy_loss = -(surr * mask).sum() / n
            value_loss = (verr * mask).sum() / n
        else:
            policy_loss = -surr.mean()
            value_loss = verr.mean()
        m_loss = mirror_loss(self.policy, batch["obs"], self.maps, mask=mask)
        total = (policy_loss + cfg.value_coef * value_loss
                 + cfg.mirror_coef * m_loss)
        return total, {"policy_loss": float(policy_loss.detach()),
                       "value_loss": float(value_loss.detach()),
                       "mirror_loss": float(m_loss.detach())}

    def _step(self, batch, mask=None):
        total, parts = self._losses(batch, mask)
        self.pol_opt.zero_grad()
        self.val_opt.zero_grad()
        total.backward()
        torch.nn.utils.clip_grad_norm_(self.policy.parameters(),
                                       self.config.grad_clip)
        torch.nn.utils.clip_grad_norm_(self.value.parameters(),
                                       self.config.grad_clip)
        self.pol_opt.step()
        self.val_opt.step()
        return parts

    def _buffer_kl(self, data, mask=None) -> float:
        with torch.no_grad():
            mean, log_std, _ = self.policy(data["obs"])
            kl = nets.gaussian_kl(data["mean_old"], data["lstd_old"],
                                  mean, log_std.expand_as(mean))
            if mask is not None:
                return float((kl * mask).sum() / mask.sum())
            return float(kl.mean())

    def _policy_snapshot(self):
        import copy
        return copy.deepcopy(self.policy.state_dict())

    def _restore_policy(self, snap):
        self.policy.load_state_dict(snap)

    def _set_policy_blend(self, snap, over, alpha):
        """theta <- snap + alpha * (over - snap), applied in place."""
        with torch.no_grad():
            for name, p in self.policy.state_dict().items():
                p.copy_(snap[name] + alpha * (over[name] - snap[name]))

    # -- the update ---------------------------------------------------------

    def update(self, buffer: RolloutBuffer) -> dict:
        """Minibatch epochs with a KL trust-region rollback.

        Runs at most max_epochs; measures the exact KL against the behaviour
        policy after each epoch and reverts the epoch if it breached the
        threshold, so the returned policy always satisfies the constraint.
        """
        cfg = self.config
        recurrent = self.policy.is_recurrent
        if recurrent:
            data = buffer.padded()
            mask = data["mask"]
            n_items = len(buffer.episodes)
            batch_size = cfg.traj_batch
        else:
            data = buffer.flat()
            mask = None
            n_items = data["obs"].shape[0]
            batch_size = cfg.step_batch

        epochs_applied = 0
        backtracked = False
        parts = {"policy_loss": 0.0, "value_loss": 0.0, "mirror_loss": 0.0}
        kl = self._buffer_kl(data, mask)
        for epoch in range(cfg.max_epochs):
            snap = self._policy_snapshot()
            order = self.batch_rng.permutation(n_items)
            for lo in range(0, n_items, batch_size):
                idx = torch.as_tensor(order[lo:lo + batch_size])
                batch = {k: v[idx] for k, v in data.items() if k != "mask"}
                bmask = mask[idx] if mask is not None else None
                parts = self._step(batch, bmask)
            kl_after = self._buffer_kl(data, mask)
            if kl_after > cfg.kl_threshold:
                # backtrack: shrink the epoch's policy step toward the
                # snapshot until the KL constraint holds, then abort further
                # epochs; a full revert is the last resort
                over = self._policy_snapshot()
                for alpha in (0.5, 0.25, 0.125, 1 / 16, 1 / 32, 1 / 64):
                    self._set_policy_blend(snap, over, alpha)
                    kl_after = self._buffer_kl(data, mask)
                    if kl_after <= cfg.kl_threshold:
                        break
                else:
                    self._restore_policy(snap)
                    kl_after = self._buffer_kl(data, mask)
                kl = kl_after
                backtracked = True
                break
            kl = kl_after
            epochs_applied += 1
        return {"kl": kl, "epochs": epochs_applied,
                "backtracked": backtracked, **parts}

    # -- outer loop ---------------------------------------------------------

    def run_iteration(self) -> dict:
        t0 = time.perf_counter()
        buffer = RolloutBuffer()
        cstats = self.collector.collect(buffer, self.config.buffer_size)
        buffer.finalize(self.config.gamma, self.config.lam,
                        self.config.normalize_advantages)
        ustats = self.update(buffer)
        self.iteration += 1
        return {"iteration": self.iteration,
                "elapsed": time.perf_counter() - t0, **cstats, **ustats}

    def save(self, path, extra=None):
        meta = {"iteration": self.iteration,
                "config": asdict(self.config), **(extra or {})}
        nets.save_checkpoint(
            path, {"policy": self.policy, "value": self.value},
            layout_checksum(self.config.variant),
            nets.config_hash(asdict(self.config)), meta)

    def load(self, path):
        header = nets.load_checkpoint(
            path, {"policy": self.policy, "value": self.value},
            expect_layout=layout_checksum(self.config.variant))
        self.iteration = int(header["extra"].get("iteration", 0))
        return header


def train(config: PPOConfig, run_dir, model: BipedModel | None = None,
          resume: str | None = None, log=print) -> PPO:
    """Full training loop with JSONL metrics and periodic checkpoints."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "config.json", "w") as f:
        json.dump(asdict(config), f, indent=2, default=str)
    agent = PPO(config, model)
    if resume:
        agent.load(resume)
        log(f"resumed from {resume} at iteration {agent.iteration}")
    metrics_path = run_dir / "metrics.jsonl"
    with open(metrics_path, "a") as mf:
        while agent.iteration < config.iterations:
            stats = agent.run_iteration()
            mf.write(json.dumps(stats) + "\n")
            mf.flush()
            log(f"iter {stats['iteration']:4d}  return {stats['mean_return']:7.2f}  "
                f"len {stats['mean_length']:6.1f}  kl {stats['kl']:.4f}  "
                f"epochs {stats['epochs']}  {stats['elapsed']:.1f}s")
            if agent.iteration % config.save_every == 0 or \
                    agent.iteration == config.iterations:
                agent.save(run_dir / f"ckpt_{agent.iteration:06d}.bin")
                agent.save(run_dir / "ckpt_latest.bin")
    agent.save(run_dir / "ckpt_latest.bin")
    return agent
