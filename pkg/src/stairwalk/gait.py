"""Gait clock, smoothed phase indicators, and the ten-term locomotion reward.

The reward is R = 1 - rho where rho is a weighted sum of ten cost terms.
Foot-force and foot-velocity terms carry phase-dependent coefficients: the
expectation of a binary indicator whose interval boundaries are jittered by a
Von Mises distribution, giving a smooth, periodic stance/swing schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import vonmises

NOMINAL_CYCLE_TIME = 0.7       # seconds per gait cycle
NOMINAL_CONTROL_RATE = 40.0    # Hz
NOMINAL_PHASE_DELTA = (1.0 / NOMINAL_CONTROL_RATE) / NOMINAL_CYCLE_TIME
DELTA_BOUNDS = (0.5, 1.5)      # multiplier band on the nominal increment


def clock_inputs(phi):
    """Two antiphase sinusoids indexing the left/right legs."""
    phi = np.asarray(phi, dtype=np.float64)
    p1 = np.sin(2.0 * np.pi * (phi + 0.0))
    p2 = np.sin(2.0 * np.pi * (phi + 0.5))
    return p1, p2


def clamp_delta(delta, base=NOMINAL_PHASE_DELTA):
    return float(np.clip(delta, DELTA_BOUNDS[0] * base, DELTA_BOUNDS[1] * base))


def advance_phase(phi: float, delta: float, base=NOMINAL_PHASE_DELTA) -> float:
    """phi' = fmod(phi + delta, 1), with delta clamped to the allowed band."""
    delta = clamp_delta(delta, base)
    return float(np.fmod(phi + delta, 1.0))


@dataclass
class GaitClock:
    phi: float = 0.0
    cycle_time: float = NOMINAL_CYCLE_TIME
    control_rate: float = NOMINAL_CONTROL_RATE

    @property
    def nominal_delta(self) -> float:
        return (1.0 / self.control_rate) / self.cycle_time

    def advance(self, delta: float) -> float:
        self.phi = advance_phase(self.phi, delta, self.nominal_delta)
        return self.phi

    def inputs(self):
        return clock_inputs(self.phi)


def _wrap_phase(d):
    """Wrap phase differences to (-0.5, 0.5]."""
    return -np.mod(0.5 - np.asarray(d, dtype=np.float64), 1.0) + 0.5


@dataclass(frozen=True)
class PhaseIndicatorSpec:
    start: float
    end: float
    kappa: float = 32.0
    name: str = ""

    def __post_init__(self):
        if not (0.0 <= self.start < self.end <= 1.0):
            raise ValueError(f"bad indicator interval [{self.start}, {self.end})")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def boundary_cdf(d, kappa):
    """P(jitter <= d) for a Von Mises boundary jitter, d in phase units."""
    d = _wrap_phase(d)
    return vonmises.cdf(2.0 * np.pi * d, kappa)


def indicator_expectation(spec: PhaseIndicatorSpec, phi):
    """E[I(phi)]: probability the jittered interval [start, end) contains phi."""
    phi = np.asarray(phi, dtype=np.float64)
    return boundary_cdf(phi - spec.start, spec.kappa) * boundary_cdf(spec.end - phi, spec.kappa)


def default_indicator_specs(kappa: float = 32.0) -> dict:
    """Stance/swing schedule: left swing on [0, 0.5), right shifted by half.

    Force indicators are active in swing (penalize ground force, lift the
    foot); velocity indicators are active in stance (penalize foot speed,
    plant the foot).
    """
    return {
        "left_force": PhaseIndicatorSpec(0.0, 0.5, kappa, "left_force"),
        "left_velocity": PhaseIndicatorSpec(0.5, 1.0, kappa, "left_velocity"),
        "right_force": PhaseIndicatorSpec(0.5, 1.0, kappa, "right_force"),
        "right_velocity": PhaseIndicatorSpec(0.0, 0.5, kappa, "right_velocity"),
    }


class IndicatorTable:
    """Fast E[I(phi)] via a tabulated boundary CDF.

    The CDF product is discontinuous where a wrapped phase distance crosses
    the antipode, so the expectation itself cannot be interpolated safely.
    The boundary CDF as a function of wrapped distance is smooth on
    [-0.5, 0.5], so that is what the table stores; the wrap is applied
    exactly at lookup time, matching the scipy path to ~1e-7.
    """

    def __init__(self, spec: PhaseIndicatorSpec, resolution: int = 4096):
        self.spec = spec
        self.grid = np.linspace(-0.5, 0.5, resolution + 1)
        self.cdf = vonmises.cdf(2.0 * np.pi * self.grid, spec.kappa)

    def _phi_cdf(self, d):
        return np.interp(_wrap_phase(d), self.grid, self.cdf)

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=np.float64)
        return self._phi_cdf(phi - self.spec.start) * self._phi_cdf(self.spec.end - phi)


def indicator_tables(specs: dict, resolution: int = 4096) -> dict:
    return {k: IndicatorTable(s, resolution) for k, s in specs.items()}


REWARD_TERM_NAMES = (
    "left_force",
    "right_force",
    "left_velocity",
    "right_velocity",
    "orientation",
    "x_velocity",
    "y_velocity",
    "action_smoothness",
    "torque",
    "pelvis_shake",
)


@dataclass
class RewardWeights:
    left_force: float = 0.140
    right_force: float = 0.140
    left_velocity: float = 0.140
    right_velocity: float = 0.140
    orientation: float = 0.140
    x_velocity: float = 0.140
    y_velocity: float = 0.078
    action_smoothness: float = 0.028
    torque: float = 0.028
    pelvis_shake: float = 0.028
    # inner scale constants
    force_scale: float = 0.01
    velocity_scale: float = 1.0
    action_scale: float = 5.0
    torque_scale: float = 0.05
    shake_scale: float = 0.1
    orient_body_coef: float = 3.0
    orient_foot_coef: float = 10.0

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in REWARD_TERM_NAMES])

    @property
    def total(self) -> float:
        return float(self.as_vector().sum())


@dataclass
class RewardInputs:
    """Physical quantities consumed by the ten cost terms.

    Scalar fields may be batched as equal-length arrays; vector fields then
    take shape (batch, dim).
    """

    f_left: np.ndarray          # foot force magnitude, N
    f_right: np.ndarray
    v_left: np.ndarray          # foot speed magnitude, m/s
    v_right: np.ndarray
    q_target: np.ndarray        # unit quaternions (…, 4)
    q_body: np.ndarray
    q_left: np.ndarray
    q_right: np.ndarray
    xdot_desired: np.ndarray
    xdot_actual: np.ndarray
    ydot_desired: np.ndarray
    ydot_actual: np.ndarray
    action: np.ndarray          # (…, act_dim)
    prev_action: np.ndarray
    torque: np.ndarray          # (…, n_joints)
    pelvis_rot: np.ndarray      # angular speed magnitude, rad/s
    pelvis_acc: np.ndarray      # translational acceleration magnitude, m/s^2


def orientation_error(q_target, q_body, q_left, q_right,
                      body_coef=3.0, foot_coef=10.0, tol=1e-6):
    """Quadratic quaternion-alignment error of pelvis and both feet."""
    qs = [np.asarray(q, dtype=np.float64) for q in (q_target, q_body, q_left, q_right)]
    for q in qs:
        norms = np.linalg.norm(q, axis=-1)
        if np.any(np.abs(norms - 1.0) > tol):
            raise ValueError("orientation_error requires unit quaternions")
    q_target, q_body, q_left, q_right = qs
    db = 1.0 - np.sum(q_target * q_body, axis=-1)
    dl = 1.0 - np.sum(q_target * q_left, axis=-1)
    dr = 1.0 - np.sum(q_target * q_right, axis=-1)
    return body_coef * db**2 + foot_coef * (dl**2 + dr**2)


def reward(inputs: RewardInputs, phi, weights: RewardWeights | None = None,
           specs: dict | None = None, tables: dict | None = None):
    """Ten-term reward R = 1 - rho; returns (R, per-term cost breakdown).

    Broadcasts over batched inputs (phi batched alongside).  Pass
    precomputed IndicatorTables to skip the exact CDF evaluation in hot
    loops.
    """
    w = weights or RewardWeights()
    specs = specs or default_indicator_specs()
    phi = np.asarray(phi, dtype=np.float64)

    for name in ("f_left", "f_right", "v_left", "v_right", "torque",
                 "pelvis_rot", "pelvis_acc", "action", "prev_action",
                 "xdot_actual", "ydot_actual"):
        val = np.asarray(getattr(inputs, name), dtype=np.float64)
        if not np.all(np.isfinite(val)):
            raise ValueError(f"non-finite reward input {name!r}")

    if tables is not None:
        e_lf = tables["left_force"](phi)
        e_rf = tables["right_force"](phi)
        e_lv = tables["left_velocity"](phi)
        e_rv = tables["right_velocity"](phi)
    else:
        e_lf = indicator_expectation(specs["left_force"], phi)
        e_rf = indicator_expectation(specs["right_force"], phi)
        e_lv = indicator_expectation(specs["left_velocity"], phi)
        e_rv = indicator_expectation(specs["right_velocity"], phi)

    eps_o = orientation_error(inputs.q_target, inputs.q_body, inputs.q_left,
                              inputs.q_right, w.orient_body_coef, w.orient_foot_coef)

    terms = {
        "left_force": 1.0 - e_lf * np.exp(-w.force_scale * np.abs(inputs.f_left)),
        "right_force": 1.0 - e_rf * np.exp(-w.force_scale * np.abs(inputs.f_right)),
        "left_velocity": 1.0 - e_lv * np.exp(-w.velocity_scale * np.abs(inputs.v_left)),
        "right_velocity": 1.0 - e_rv * np.exp(-w.velocity_scale * np.abs(inputs.v_right)),
        "orientation": 1.0 - np.exp(-eps_o),
        "x_velocity": 1.0 - np.exp(-np.abs(inputs.xdot_desired - inputs.xdot_actual)),
        "y_velocity": 1.0 - np.exp(-np.abs(inputs.ydot_desired - inputs.ydot_actual)),
        "action_smoothness": 1.0 - np.exp(
            -w.action_scale * np.linalg.norm(
                np.asarray(inputs.action) - np.asarray(inputs.prev_action), axis=-1)),
        "torque": 1.0 - np.exp(
            -w.torque_scale * np.linalg.norm(np.asarray(inputs.torque), axis=-1)),
        "pelvis_shake": 1.0 - np.exp(
            -w.shake_scale * (np.abs(inputs.pelvis_rot) + np.abs(inputs.pelvis_acc))),
    }
    rho = sum(getattr(w, n) * terms[n] for n in REWARD_TERM_NAMES)
    return 1.0 - rho, terms
