"""RL environment: observation assembly, command randomization, action
application, termination, and the left/right mirror maps.

Observation layout (planar backend):
    [0:4]   pelvis quaternion (pitch only)
    [4:7]   pelvis angular velocity (padded to 3; only pitch rate nonzero)
    [7:13]  joint positions + per-episode encoder offsets
    [13:19] joint velocities
    [19:22] command (forward speed, sideways speed, turn rate)
    [22:24] gait clock inputs p1, p2
    [24]    stair-proximity bit (proximity variant only)

Sideways-speed and turn-rate commands keep their Table-style randomization
machinery but are pinned to zero by the planar backend.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import gait
from .gait import GaitClock, RewardWeights, RewardInputs, default_indicator_specs
from .model import BipedModel, N_JOINTS, default_model
from .physics import (SimState, DynRandConfig, DynRandSample, sample_dynamics,
                      control_step, read_proprioception, read_grf,
                      forward_kinematics, SimulationInstabilityError)
from .terrain import StairGenConfig, TerrainProfile, generate

COMMAND_RESAMPLE_PROB = 1.0 / 300.0
COMMAND_RANGES = {
    "forward": (-0.3, 1.5),
    "sideways": (-0.3, 0.3),
    "turn": (-np.pi / 2, np.pi / 2),
}

VARIANTS = ("flat", "stair", "proximity")


class ObservationLayoutError(ValueError):
    pass


@dataclass
class Command:
    forward: float = 0.0
    sideways: float = 0.0   # raw sampled value; planar backend pins to 0
    turn: float = 0.0

    def as_array(self, planar_pin: bool = True) -> np.ndarray:
        if planar_pin:
            return np.array([self.forward, 0.0, 0.0])
        return np.array([self.forward, self.sideways, self.turn])


def sample_command(rng) -> Command:
    return Command(*(float(rng.uniform(*COMMAND_RANGES[k]))
                     for k in ("forward", "sideways", "turn")))


def maybe_resample_command(cmd: Command, rng,
                           prob: float = COMMAND_RESAMPLE_PROB):
    """Each field independently resampled with the per-step probability.

    Returns (new command, per-field resample flags).
    """
    vals = {}
    flags = np.zeros(3, dtype=bool)
    for i, k in enumerate(("forward", "sideways", "turn")):
        if rng.random() < prob:
            vals[k] = float(rng.uniform(*COMMAND_RANGES[k]))
            flags[i] = True
        else:
            vals[k] = getattr(cmd, k)
    return Command(**vals), flags


@dataclass
class EpisodeConfig:
    horizon: int = 300
    variant: str = "stair"
    terrain: StairGenConfig = field(default_factory=StairGenConfig)
    dynrand: DynRandConfig = field(default_factory=DynRandConfig)
    init_jitter: float = 0.03            # rad, uniform joint-angle perturbation
    fall_height_ratio: float = 0.55      # of nominal standing height
    fall_pitch: float = 1.0              # rad
    proximity_horizon: float = 1.0       # m
    fixed_command: float | None = None   # evaluation: constant forward speed
    kappa: float = 32.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    def terrain_config(self) -> StairGenConfig:
        if self.variant == "flat":
            # incline-only plane: no steps, geometry otherwise irrelevant
            return replace(self.terrain, step_count_range=(0, 0))
        return self.terrain


def observation_layout(variant: str) -> dict:
    layout = {
        "quat": slice(0, 4),
        "angvel": slice(4, 7),
        "joint_pos": slice(7, 13),
        "joint_vel": slice(13, 19),
        "command": slice(19, 22),
        "clock": slice(22, 24),
    }
    if variant == "proximity":
        layout["proximity"] = slice(24, 25)
    return layout


def observation_dim(variant: str) -> int:
    layout = observation_layout(variant)
    return max(s.stop for s in layout.values())


def layout_checksum(variant: str) -> str:
    desc = ";".join(f"{k}:{s.start}:{s.stop}" for k, s in
                    sorted(observation_layout(variant).items()))
    return hashlib.md5(desc.encode()).hexdigest()


@dataclass
class MirrorMaps:
    obs_perm: np.ndarray
    obs_sign: np.ndarray
    act_perm: np.ndarray
    act_sign: np.ndarray

    def mirror_observation(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs)
        if obs.shape[-1] != len(self.obs_perm):
            raise ObservationLayoutError(
                f"observation length {obs.shape[-1]} != {len(self.obs_perm)}")
        return obs[..., self.obs_perm] * self.obs_sign

    def mirror_action(self, act: np.ndarray) -> np.ndarray:
        act = np.asarray(act)
        if act.shape[-1] != len(self.act_perm):
            raise ObservationLayoutError(
                f"action length {act.shape[-1]} != {len(self.act_perm)}")
        return act[..., self.act_perm] * self.act_sign


def make_mirror_maps(variant: str) -> MirrorMaps:
    dim = observation_dim(variant)
    perm = np.arange(dim)
    sign = np.ones(dim)
    # left/right joint blocks swap
    perm[7:10], perm[10:13] = np.arange(10, 13), np.arange(7, 10)
    perm[13:16], perm[16:19] = np.arange(16, 19), np.arange(13, 16)
    # lateral components sign-flip (roll rate, yaw rate, sideways cmd, turn cmd)
    sign[4] = -1.0
    sign[6] = -1.0
    sign[20] = -1.0
    sign[21] = -1.0
    # clock channels swap (equivalent to a half-cycle phase shift)
    perm[22], perm[23] = 23, 22
    act_perm = np.array([3, 4, 5, 0, 1, 2, 6])
    act_sign = np.ones(7)
    return MirrorMaps(perm, sign, act_perm, act_sign)


ACTION_DIM = 7


class BipedEnv:
    """One episode-generating environment instance; fully seeded."""

    def __init__(self, config: EpisodeConfig | None = None,
                 model: BipedModel | None = None, seed: int = 0,
                 weights: RewardWeights | None = None):
        self.config = config or EpisodeConfig()
        self.model = model or default_model()
        self.weights = weights or RewardWeights()
        self.specs = default_indicator_specs(self.config.kappa)
        self.tables = gait.indicator_tables(self.specs)
        self.maps = make_mirror_maps(self.config.variant)
        self.obs_dim = observation_dim(self.config.variant)
        self.rng = np.random.default_rng(seed)
        self._standing = self.model.nominal_standing_height
        self.profile: TerrainProfile | None = None
        self.state: SimState | None = None
        self._done = True

    # -- episode lifecycle --------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        cfg = self.config
        self.profile = generate(cfg.terrain_config(),
                                int(self.rng.integers(0, 2**63 - 1)))
        self.sample = sample_dynamics(cfg.dynrand, self.rng)
        self.clock = GaitClock()
        if cfg.fixed_command is not None:
            self.command = Command(forward=cfg.fixed_command)
        else:
            self.command = sample_command(self.rng)
        self.prev_action = np.zeros(ACTION_DIM)
        self.step_count = 0
        self.state = self._initial_state()
        self._done = False
        self.total_energy = 0.0
        return self._observe()

    def _initial_state(self) -> SimState:
        cfg = self.config
        preload = self.model.total_mass * self.model.gravity / (
            4.0 * self.model.contact_stiffness)
        for attempt in range(10):
            q = np.zeros(9)
            q[3:] = self.model.joint_center + self.rng.uniform(
                -cfg.init_jitter, cfg.init_jitter, size=N_JOINTS)
            fk = forward_kinematics(q, self.model)
            # drop the feet onto the local terrain with a small preload
            clearance = min(
                fk[p][1] - self.profile.height_at(fk[p][0])
                for p in ("heel_l", "toe_l", "heel_r", "toe_r"))
            q[1] = -clearance - preload
            fk = forward_kinematics(q, self.model)
            deepest = max(
                self.profile.height_at(fk[p][0]) - fk[p][1]
                for p in ("heel_l", "toe_l", "heel_r", "toe_r"))
            if deepest < 0.01:
                st = SimState.zeros()
                st.q = q
                return st
        raise RuntimeError("could not find a contact-feasible initial pose")

    # -- observation --------------------------------------------------------

    def _observe(self) -> np.ndarray:
        quat, angvel, jpos, jvel = read_proprioception(self.state, self.sample)
        parts = [quat, angvel, jpos, jvel, self.command.as_array(),
                 np.array(gait.clock_inputs(self.clock.phi))]
        if self.config.variant == "proximity":
            bit = self.profile.proximity_bit(self.state.q[0],
                                             self.config.proximity_horizon)
            parts.append(np.array([float(bit)]))
        return np.concatenate(parts)

    def mirror_observation(self, obs):
        return self.maps.mirror_observation(obs)

    def mirror_action(self, act):
        return self.maps.mirror_action(act)

    # -- stepping -----------------------------------------------------------

    def _pd_targets(self, action6: np.ndarray) -> np.ndarray:
        return self.model.joint_center + action6 * self.model.joint_half_range

    def step(self, action):
        if self._done:
            raise RuntimeError("step() called on a finished episode; reset first")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (ACTION_DIM,) or not np.all(np.isfinite(action)):
            raise ValueError(f"action must be {ACTION_DIM} finite numbers")
        a = np.clip(action, -1.0, 1.0)
        targets = self._pd_targets(a[:6])
        delta = self.clock.nominal_delta * (1.0 + 0.5 * a[6])
        rate = self.sample.draw_rate(self.rng)
        phi = self.clock.phi

        reason = None
        try:
            self.state, cinfo = control_step(self.state, targets, self.sample,
                                             self.profile, self.model, rate)
        except SimulationInstabilityError:
            self._done = True
            reason = "instability"
            obs = np.zeros(self.obs_dim)
            info = {"termination": reason, "reward_terms": {}, "command": self.command}
            return obs, 0.0, True, info

        self.total_energy += cinfo["energy"]
        grf = read_grf(self.state)
        pitch = self.state.q[2]
        foot_pitch = self._foot_pitches()
        inputs = RewardInputs(
            f_left=np.linalg.norm(grf[0]),
            f_right=np.linalg.norm(grf[1]),
            v_left=np.linalg.norm(self.state.foot_velocities[0]),
            v_right=np.linalg.norm(self.state.foot_velocities[1]),
            q_target=np.array([1.0, 0.0, 0.0, 0.0]),
            q_body=_pitch_quat(pitch),
            q_left=_pitch_quat(foot_pitch[0]),
            q_right=_pitch_quat(foot_pitch[1]),
            xdot_desired=self.command.forward,
            xdot_actual=self.state.qd[0],
            ydot_desired=0.0,
            ydot_actual=0.0,
            action=a,
            prev_action=self.prev_action,
            torque=cinfo["torque"],
            pelvis_rot=abs(self.state.qd[2]),
            pelvis_acc=float(np.linalg.norm(self.state.pelvis_acc)),
        )
        reward_val, terms = gait.reward(inputs, phi, self.weights, self.specs,
                                        tables=self.tables)
        reward_val = float(reward_val)

        self.clock.advance(delta)
        self.command, resampled = maybe_resample_command(self.command, self.rng) \
            if self.config.fixed_command is None else (self.command, np.zeros(3, bool))
        self.prev_action = a
        self.step_count += 1

        ground = self.profile.height_at(self.state.q[0])
        height = self.state.q[1] - ground
        if height < self.config.fall_height_ratio * self._standing or \
                abs(pitch) > self.config.fall_pitch:
            reason = "fall"
        elif self.step_count >= self.config.horizon:
            reason = "horizon"
        done = reason is not None
        self._done = done

        info = {
            "termination": reason,
            "reward_terms": {k: float(v) for k, v in terms.items()},
            "grf": grf,
            "torque": cinfo["torque"],
            "energy": cinfo["energy"],
            "command": self.command,
            "command_resampled": resampled,
            "phi": self.clock.phi,
            "rate": rate,
            "q": self.state.q.copy(),
            "qd": self.state.qd.copy(),
            "time": self.state.time,
            "foot_velocities": self.state.foot_velocities.copy(),
        }
        return self._observe(), reward_val, done, info

    def _foot_pitches(self):
        q = self.state.q
        out = []
        for leg in range(2):
            jb = 3 + 3 * leg
            out.append(q[2] + q[jb] + q[jb + 1] + q[jb + 2])
        return out


def _pitch_quat(pitch: float) -> np.ndarray:
    return np.array([np.cos(pitch / 2.0), 0.0, np.sin(pitch / 2.0), 0.0])
