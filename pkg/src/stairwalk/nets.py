"""Policy and value networks plus checkpoint I/O and a gradient-check harness.

Two architectures: an LSTM policy with two recurrent layers of width 128,
and a feedforward tanh policy with two hidden layers of width 300.  Actions
are a diagonal Gaussian: state-dependent mean, shared learnable log-std.
Networks run in float64 by default for bit-reproducible training.

Autodiff and the Adam update are delegated to torch; the finite-difference
gradient checker below stays independent of it.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
import torch
import torch.nn as nn

CHECKPOINT_MAGIC = b"SWNET\x01"
CHECKPOINT_VERSION = 1

LOG_STD_INIT = float(np.log(0.3))


class CheckpointError(RuntimeError):
    pass


def _init_lstm(lstm: nn.LSTM):
    """Scaled-orthogonal recurrent weights, forget-gate bias +1."""
    for name, p in lstm.named_parameters():
        if name.startswith("weight_hh"):
            for chunk in p.detach().chunk(4, 0):
                nn.init.orthogonal_(chunk)
        elif name.startswith("weight_ih"):
            nn.init.xavier_uniform_(p)
        elif name.startswith("bias"):
            nn.init.zeros_(p)
            h = p.shape[0] // 4
            p.detach()[h:2 * h].fill_(0.5)  # f-gate, 0.5 in each of ih/hh


class RecurrentPolicy(nn.Module):
    hidden_size = 128
    num_layers = 2

    def __init__(self, obs_dim: int, act_dim: int, dtype=torch.float64):
        super().__init__()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.lstm = nn.LSTM(obs_dim, self.hidden_size, self.num_layers,
                            batch_first=True)
        self.mean_head = nn.Linear(self.hidden_size, act_dim)
        self.log_std = nn.Parameter(torch.full((act_dim,), LOG_STD_INIT))
        _init_lstm(self.lstm)
        nn.init.zeros_(self.mean_head.bias)
        nn.init.uniform_(self.mean_head.weight, -0.01, 0.01)
        self.to(dtype)

    @property
    def is_recurrent(self):
        return True

    def initial_hidden(self, batch: int = 1):
        p = next(self.parameters())
        shape = (self.num_layers, batch, self.hidden_size)
        return (torch.zeros(shape, dtype=p.dtype),
                torch.zeros(shape, dtype=p.dtype))

    def forward(self, obs, hidden=None):
        """obs: (B, D) single step or (B, T, D) sequence."""
        if obs.shape[-1] != self.obs_dim:
            raise ValueError(f"observation dim {obs.shape[-1]} != {self.obs_dim}")
        single = obs.dim() == 2
        x = obs.unsqueeze(1) if single else obs
        if hidden is None:
            hidden = self.initial_hidden(x.shape[0])
        out, hidden = self.lstm(x, hidden)
        mean = self.mean_head(out)
        if single:
            mean = mean.squeeze(1)
        return mean, self.log_std.expand_as(mean), hidden


class FeedforwardPolicy(nn.Module):
    hidden_size = 300

    def __init__(self, obs_dim: int, act_dim: int, dtype=torch.float64):
        super().__init__()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        h = self.hidden_size
        self.body = nn.Sequential(
            nn.Linear(obs_dim, h), nn.Tanh(),
            nn.Linear(h, h), nn.Tanh())
        self.mean_head = nn.Linear(h, act_dim)
        self.log_std = nn.Parameter(torch.full((act_dim,), LOG_STD_INIT))
        nn.init.zeros_(self.mean_head.bias)
        nn.init.uniform_(self.mean_head.weight, -0.01, 0.01)
        self.to(dtype)

    @property
    def is_recurrent(self):
        return False

    def initial_hidden(self, batch: int = 1):
        return None

    def forward(self, obs, hidden=None):
        if obs.shape[-1] != self.obs_dim:
            raise ValueError(f"observation dim {obs.shape[-1]} != {self.obs_dim}")
        mean = self.mean_head(self.body(obs))
        return mean, self.log_std.expand_as(mean), hidden


class RecurrentValue(nn.Module):
    hidden_size = 128
    num_layers = 2

    def __init__(self, obs_dim: int, dtype=torch.float64):
        super().__init__()
        self.obs_dim = obs_dim
        self.lstm = nn.LSTM(obs_dim, self.hidden_size, self.num_layers,
                            batch_first=True)
        self.head = nn.Linear(self.hidden_size, 1)
        _init_lstm(self.lstm)
        self.to(dtype)

    @property
    def is_recurrent(self):
        return True

    def initial_hidden(self, batch: int = 1):
        p = next(self.parameters())
        shape = (self.num_layers, batch, self.hidden_size)
        return (torch.zeros(shape, dtype=p.dtype),
                torch.zeros(shape, dtype=p.dtype))

    def forward(self, obs, hidden=None):
        single = obs.dim() == 2
        x = obs.unsqueeze(1) if single else obs
        if hidden is None:
            hidden = self.initial_hidden(x.shape[0])
        out, hidden = self.lstm(x, hidden)
        v = self.head(out).squeeze(-1)
        if single:
            v = v.squeeze(1)
        return v, hidden


class FeedforwardValue(nn.Module):
    hidden_size = 300

    def __init__(self, obs_dim: int, dtype=torch.float64):
        super().__init__()
        self.obs_dim = obs_dim
        h = self.hidden_size
        self.body = nn.Sequential(
            nn.Linear(obs_dim, h), nn.Tanh(),
            nn.Linear(h, h), nn.Tanh(), nn.Linear(h, 1))
        self.to(dtype)

    @property
    def is_recurrent(self):
        return False

    def initial_hidden(self, batch: int = 1):
        return None

    def forward(self, obs, hidden=None):
        return self.body(obs).squeeze(-1), hidden


def make_policy(kind: str, obs_dim: int, act_dim: int, dtype=torch.float64):
    if kind == "lstm":
        return RecurrentPolicy(obs_dim, act_dim, dtype)
    if kind == "ff":
        return FeedforwardPolicy(obs_dim, act_dim, dtype)
    raise ValueError(f"unknown policy kind {kind!r}")


def make_value(kind: str, obs_dim: int, dtype=torch.float64):
    if kind == "lstm":
        return RecurrentValue(obs_dim, dtype)
    if kind == "ff":
        return FeedforwardValue(obs_dim, dtype)
    raise ValueError(f"unknown value kind {kind!r}")


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


# ---------------------------------------------------------------------------
# Gaussian action head


def sample_action(mean, log_std, generator=None):
    """Diagonal-Gaussian sample and its log probability."""
    std = torch.exp(log_std)
    noise = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
    action = mean + std * noise
    return action, log_prob(mean, log_std, action)


def log_prob(mean, log_std, action):
    std = torch.exp(log_std)
    z = (action - mean) / std
    return (-0.5 * z**2 - log_std - 0.5 * np.log(2.0 * np.pi)).sum(-1)


def gaussian_kl(mean_old, log_std_old, mean_new, log_std_new):
    """Exact KL(old || new) for diagonal Gaussians, summed over action dims."""
    var_old = torch.exp(2.0 * log_std_old)
    var_new = torch.exp(2.0 * log_std_new)
    return (log_std_new - log_std_old
            + (var_old + (mean_old - mean_new) ** 2) / (2.0 * var_new)
            - 0.5).sum(-1)


def make_adam(params, lr: float = 0.0005):
    return torch.optim.Adam(params, lr=lr, betas=(0.9, 0.999), eps=1e-8)


# ---------------------------------------------------------------------------
# finite-difference gradient check (independent oracle for the autodiff path)


def gradient_check(loss_fn, module: nn.Module, h: float = 1e-5) -> float:
    """Max relative error between autodiff and central finite differences.

    loss_fn: () -> scalar tensor, closing over the module.
    """
    module.zero_grad()
    loss = loss_fn()
    loss.backward()
    max_rel = 0.0
    for p in module.parameters():
        grad = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        flat = p.detach().view(-1)
        gflat = grad.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            with torch.no_grad():
                lp = loss_fn().item()
            flat[i] = orig - h
            with torch.no_grad():
                lm = loss_fn().item()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * h)
            denom = max(abs(fd), abs(gflat[i].item()), 1e-8)
            max_rel = max(max_rel, abs(fd - gflat[i].item()) / denom)
    return max_rel


# ---------------------------------------------------------------------------
# checkpoint format: magic | u32 header length | JSON header | raw blobs (LE)


def config_hash(config_obj) -> str:
    text = json.dumps(config_obj, sort_keys=True, default=str)
    return hashlib.md5(text.encode()).hexdigest()


def save_checkpoint(path, modules: dict, layout_checksum: str,
                    cfg_hash: str = "", extra: dict | None = None):
    """modules: name -> nn.Module; parameters stored as named f64 blobs."""
    entries = []
    blobs = []
    offset = 0
    for mod_name, module in modules.items():
        for pname, p in module.state_dict().items():
            arr = p.detach().cpu().numpy().astype("<f8")
            raw = arr.tobytes()
            entries.append({"name": f"{mod_name}.{pname}",
                            "shape": list(arr.shape),
                            "offset": offset, "nbytes": len(raw)})
            blobs.append(raw)
            offset += len(raw)
    header = {"version": CHECKPOINT_VERSION, "config_hash": cfg_hash,
              "layout_checksum": layout_checksum, "params": entries,
              "extra": extra or {}}
    htext = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(htext)))
        f.write(htext)
        for raw in blobs:
            f.write(raw)


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (hlen,) = struct.unpack("<I", f.read(4))
        return json.loads(f.read(hlen))


def load_checkpoint(path, modules: dict, expect_layout: str | None = None) -> dict:
    """Restore parameters in place; returns the header."""
    header = read_checkpoint_header(path)
    if header["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {header['version']} != {CHECKPOINT_VERSION}")
    if expect_layout is not None and header["layout_checksum"] != expect_layout:
        raise CheckpointError(
            f"{path}: observation-layout checksum mismatch "
            f"({header['layout_checksum']} != expected {expect_layout})")
    with open(path, "rb") as f:
        f.seek(len(CHECKPOINT_MAGIC) + 4 + len(
            json.dumps(header, sort_keys=True).encode()))
        data = f.read()
    by_name = {e["name"]: e for e in header["params"]}
    for mod_name, module in modules.items():
        state = {}
        for pname, p in module.state_dict().items():
            full = f"{mod_name}.{pname}"
            if full not in by_name:
                raise CheckpointError(f"{path}: missing parameter {full}")
            e = by_name[full]
            arr = np.frombuffer(data, dtype="<f8", count=e["nbytes"] // 8,
                                offset=e["offset"]).reshape(e["shape"])
            if list(p.shape) != e["shape"]:
                raise CheckpointError(
                    f"{path}: shape mismatch for {full}: "
                    f"{e['shape']} vs model {list(p.shape)}")
            state[pname] = torch.from_numpy(arr.copy()).to(p.dtype)
        module.load_state_dict(state)
    return header
