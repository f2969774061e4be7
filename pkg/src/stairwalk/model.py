"""Planar 7-link biped model description.

Links: torso + (thigh, shank, foot) per leg.  Generalized coordinates
q = [pelvis_x, pelvis_z, pelvis_pitch, hip_l, knee_l, ankle_l, hip_r,
knee_r, ankle_r].  Joint order everywhere is (hip, knee, ankle) x (left,
right).  Parameters live in a JSON model file, not in code; this module
holds the schema and the default desk-scale model (~32 kg, ~1 m legs).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from importlib import resources

import numpy as np

LINK_NAMES = ("torso", "thigh_l", "shank_l", "foot_l", "thigh_r", "shank_r", "foot_r")
JOINT_NAMES = ("hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r")
N_DOF = 9
N_JOINTS = 6

GRAVITY = 9.81
INNER_RATE = 2000.0  # Hz of the PD/physics inner loop


class ModelError(ValueError):
    pass


@dataclass
class BipedModel:
    # inertial
    masses: np.ndarray            # (7,) kg
    inertias: np.ndarray          # (7,) kg m^2 about each link COM
    # geometry (link-frame offsets, m)
    torso_com: np.ndarray         # from pelvis origin
    hip_offset: np.ndarray        # pelvis origin -> hip joint
    l_thigh: float
    l_shank: float
    com_thigh: np.ndarray         # from hip
    com_shank: np.ndarray         # from knee
    com_foot: np.ndarray          # from ankle
    heel_offset: np.ndarray       # from ankle, foot frame
    toe_offset: np.ndarray
    # actuation, per joint (6,)
    kp: np.ndarray
    kd: np.ndarray
    tau_max: np.ndarray
    omega_max: np.ndarray         # rad/s, torque-speed curve knee
    p_max: np.ndarray             # W, max input power (resistive-loss scale)
    damping: np.ndarray           # N m s/rad default joint damping
    # joint ranges for action mapping
    joint_center: np.ndarray      # (6,) nominal crouch pose
    joint_half_range: np.ndarray  # (6,)
    # contact
    contact_stiffness: float = 1.0e5
    contact_damping: float = 1.0e3
    slip_velocity: float = 0.01   # m/s friction regularization scale
    max_penetration: float = 0.02
    gravity: float = GRAVITY

    def __post_init__(self):
        for name in ("masses", "inertias", "torso_com", "hip_offset", "com_thigh",
                     "com_shank", "com_foot", "heel_offset", "toe_offset", "kp",
                     "kd", "tau_max", "omega_max", "p_max", "damping",
                     "joint_center", "joint_half_range"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.masses.shape != (7,) or self.inertias.shape != (7,):
            raise ModelError("need 7 link masses and inertias")
        if np.any(self.masses <= 0) or np.any(self.inertias <= 0):
            raise ModelError("masses and inertias must be positive")
        if self.l_thigh <= 0 or self.l_shank <= 0:
            raise ModelError("segment lengths must be positive")
        for name in ("kp", "kd", "tau_max", "omega_max", "p_max", "damping"):
            arr = getattr(self, name)
            if arr.shape != (N_JOINTS,):
                raise ModelError(f"{name} must have {N_JOINTS} entries")
        if np.any(self.tau_max <= 0) or np.any(self.omega_max <= 0) or np.any(self.p_max <= 0):
            raise ModelError("torque/speed/power limits must be positive")

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def nominal_standing_height(self) -> float:
        """Pelvis height above flat ground in the nominal crouch pose."""
        from .physics import forward_kinematics
        q = np.zeros(N_DOF)
        q[3:] = self.joint_center
        fk = forward_kinematics(q, self)
        foot_low = min(fk["heel_l"][1], fk["toe_l"][1], fk["heel_r"][1], fk["toe_r"][1])
        return float(-foot_low)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "BipedModel":
        try:
            return cls(**d)
        except TypeError as e:
            raise ModelError(f"bad model description: {e}") from e

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "BipedModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def default_model() -> BipedModel:
    """Load the packaged desk-scale model file."""
    text = resources.files("stairwalk.data").joinpath("default_model.json").read_text()
    return BipedModel.from_dict(json.loads(text))


def _build_default_dict() -> dict:
    """Source of truth used once to write data/default_model.json."""
    m = BipedModel(
        masses=[20.0, 3.5, 2.0, 0.5, 3.5, 2.0, 0.5],
        inertias=[0.60, 0.075, 0.045, 0.012, 0.075, 0.045, 0.012],
        torso_com=[0.040, 0.20],
        hip_offset=[0.0, 0.0],
        l_thigh=0.5,
        l_shank=0.5,
        com_thigh=[0.0, -0.22],
        com_shank=[0.0, -0.24],
        com_foot=[0.045, -0.03],
        heel_offset=[-0.09, -0.05],
        toe_offset=[0.18, -0.05],
        kp=[140.0, 140.0, 400.0, 140.0, 140.0, 400.0],
        kd=[7.0, 7.0, 12.0, 7.0, 7.0, 12.0],
        tau_max=[130.0, 160.0, 80.0, 130.0, 160.0, 80.0],
        omega_max=[12.0, 12.0, 16.0, 12.0, 12.0, 16.0],
        p_max=[700.0, 900.0, 350.0, 700.0, 900.0, 350.0],
        damping=[0.8, 0.8, 0.3, 0.8, 0.8, 0.3],
        joint_center=[0.20, -0.40, 0.20, 0.20, -0.40, 0.20],
        joint_half_range=[1.0, 1.0, 0.7, 1.0, 1.0, 0.7],
        contact_stiffness=1.0e5,
        contact_damping=500.0,
        slip_velocity=0.01,
        max_penetration=0.02,
    )
    return m.to_dict()
