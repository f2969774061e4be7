"""Rigid-body dynamics of the planar biped with compliant ground contact.

Semi-implicit Euler at 2 kHz.  Normal contact is a penalty spring-damper on
terrain penetration; tangential friction is regularized Coulomb
(|Ft| <= mu * Fn at every substep by construction).  The whole inner loop is
numba-compiled; a control step runs the 2 kHz PD loop for one policy period
and accumulates the motor-energy integrand and averaged contact forces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import BipedModel, N_DOF, N_JOINTS, INNER_RATE


class SimulationInstabilityError(RuntimeError):
    """Raised when the integrator diverges; episodes treat this as a fall."""


# ---------------------------------------------------------------------------
# kinematic structure: 17 tracked points
#   0-6   link COMs (torso, thigh/shank/foot L, thigh/shank/foot R)
#   7-10  contact points (heel L, toe L, heel R, toe R)
#   11-16 joint pivots (pelvis, hip, knee L, ankle L, knee R, ankle R)
# each point lists its (rotational dof, pivot point) ancestors

_ANC_DOF = -np.ones((17, 4), dtype=np.int64)
_ANC_PIV = -np.ones((17, 4), dtype=np.int64)
_ANC_N = np.zeros(17, dtype=np.int64)


def _set_anc(idx, pairs):
    _ANC_N[idx] = len(pairs)
    for k, (d, p) in enumerate(pairs):
        _ANC_DOF[idx, k] = d
        _ANC_PIV[idx, k] = p


_TORSO = [(2, 11)]
_THIGH_L = _TORSO + [(3, 12)]
_SHANK_L = _THIGH_L + [(4, 13)]
_FOOT_L = _SHANK_L + [(5, 14)]
_THIGH_R = _TORSO + [(6, 12)]
_SHANK_R = _THIGH_R + [(7, 15)]
_FOOT_R = _SHANK_R + [(8, 16)]
for _i, _pairs in enumerate([_TORSO, _THIGH_L, _SHANK_L, _FOOT_L, _THIGH_R,
                             _SHANK_R, _FOOT_R, _FOOT_L, _FOOT_L, _FOOT_R,
                             _FOOT_R, [], _TORSO, _THIGH_L, _SHANK_L,
                             _THIGH_R, _SHANK_R]):
    _set_anc(_i, _pairs)


@njit(cache=True)
def _terrain_height(xs, h_lo, h_hi, x):
    n = xs.shape[0]
    if x <= xs[0]:
        if x == xs[0]:
            return max(h_lo[0], h_hi[0])
        slope = (h_lo[1] - h_hi[0]) / (xs[1] - xs[0])
        return h_hi[0] + slope * (x - xs[0])
    if x >= xs[n - 1]:
        if x == xs[n - 1]:
            return max(h_lo[n - 1], h_hi[n - 1])
        slope = (h_lo[n - 1] - h_hi[n - 2]) / (xs[n - 1] - xs[n - 2])
        return h_hi[n - 1] + slope * (x - xs[n - 1])
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    if x == xs[lo]:
        return max(h_lo[lo], h_hi[lo])
    t = (x - xs[lo]) / (xs[lo + 1] - xs[lo])
    return h_hi[lo] + t * (h_lo[lo + 1] - h_hi[lo])


@njit(cache=True)
def _point_positions(q, torso_com, hip_off, l_thigh, l_shank, com_thigh,
                     com_shank, com_foot, heel_off, toe_off):
    """World positions of all 17 tracked points."""
    pts = np.empty((17, 2))
    px, pz, th0 = q[0], q[1], q[2]
    c0, s0 = np.cos(th0), np.sin(th0)
    pts[11, 0], pts[11, 1] = px, pz
    # hip (shared pivot for both legs)
    pts[12, 0] = px + c0 * hip_off[0] - s0 * hip_off[1]
    pts[12, 1] = pz + s0 * hip_off[0] + c0 * hip_off[1]
    # torso com
    pts[0, 0] = px + c0 * torso_com[0] - s0 * torso_com[1]
    pts[0, 1] = pz + s0 * torso_com[0] + c0 * torso_com[1]
    for leg in range(2):
        jb = 3 + 3 * leg           # first joint dof of this leg
        th1 = th0 + q[jb]
        th2 = th1 + q[jb + 1]
        th3 = th2 + q[jb + 2]
        c1, s1 = np.cos(th1), np.sin(th1)
        c2, s2 = np.cos(th2), np.sin(th2)
        c3, s3 = np.cos(th3), np.sin(th3)
        hipx, hipz = pts[12, 0], pts[12, 1]
        kneex = hipx + s1 * l_thigh
        kneez = hipz - c1 * l_thigh
        anklex = kneex + s2 * l_shank
        anklez = kneez - c2 * l_shank
        knee_i = 13 + 2 * leg
        ankle_i = 14 + 2 * leg
        pts[knee_i, 0], pts[knee_i, 1] = kneex, kneez
        pts[ankle_i, 0], pts[ankle_i, 1] = anklex, anklez
        # coms
        ct = 1 + 3 * leg
        pts[ct, 0] = hipx + c1 * com_thigh[0] - s1 * com_thigh[1]
        pts[ct, 1] = hipz + s1 * com_thigh[0] + c1 * com_thigh[1]
        pts[ct + 1, 0] = kneex + c2 * com_shank[0] - s2 * com_shank[1]
        pts[ct + 1, 1] = kneez + s2 * com_shank[0] + c2 * com_shank[1]
        pts[ct + 2, 0] = anklex + c3 * com_foot[0] - s3 * com_foot[1]
        pts[ct + 2, 1] = anklez + s3 * com_foot[0] + c3 * com_foot[1]
        # contacts
        hc = 7 + 2 * leg
        pts[hc, 0] = anklex + c3 * heel_off[0] - s3 * heel_off[1]
        pts[hc, 1] = anklez + s3 * heel_off[0] + c3 * heel_off[1]
        pts[hc + 1, 0] = anklex + c3 * toe_off[0] - s3 * toe_off[1]
        pts[hc + 1, 1] = anklez + s3 * toe_off[0] + c3 * toe_off[1]
    return pts


@njit(cache=True)
def _dynamics(q, qd, tau_joint, masses, inertias, torso_com, hip_off, l_thigh,
              l_shank, com_thigh, com_shank, com_foot, heel_off, toe_off,
              damping, mu, k_n, c_n, v_slip, max_pen, gravity,
              txs, th_lo, th_hi, anc_dof, anc_piv, anc_n):
    """Returns (qdd, contact forces (4,2) as (Ft, Fn) per point)."""
    pts = _point_positions(q, torso_com, hip_off, l_thigh, l_shank, com_thigh,
                           com_shank, com_foot, heel_off, toe_off)
    # Jacobians and velocities of every point
    J = np.zeros((17, 2, N_DOF))
    for p in range(17):
        J[p, 0, 0] = 1.0
        J[p, 1, 1] = 1.0
        for k in range(anc_n[p]):
            d = anc_dof[p, k]
            pv = anc_piv[p, k]
            rx = pts[p, 0] - pts[pv, 0]
            rz = pts[p, 1] - pts[pv, 1]
            J[p, 0, d] += -rz
            J[p, 1, d] += rx
    v = np.zeros((17, 2))
    for p in range(17):
        for i in range(N_DOF):
            v[p, 0] += J[p, 0, i] * qd[i]
            v[p, 1] += J[p, 1, i] * qd[i]

    M = np.zeros((N_DOF, N_DOF))
    rhs = np.zeros(N_DOF)
    for l in range(7):
        m = masses[l]
        # convective COM acceleration at qdd = 0
        a0x, a0z = 0.0, 0.0
        for k in range(anc_n[l]):
            d = anc_dof[l, k]
            pv = anc_piv[l, k]
            ux = v[l, 0] - v[pv, 0]
            uz = v[l, 1] - v[pv, 1]
            a0x += qd[d] * (-uz)
            a0z += qd[d] * ux
        for i in range(N_DOF):
            Jxi = J[l, 0, i]
            Jzi = J[l, 1, i]
            if Jxi == 0.0 and Jzi == 0.0:
                continue
            rhs[i] += Jzi * (-m * gravity) - m * (Jxi * a0x + Jzi * a0z)
            for jj in range(N_DOF):
                M[i, jj] += m * (Jxi * J[l, 0, jj] + Jzi * J[l, 1, jj])
        # rotational inertia: angular jacobian is 1 on each ancestor dof
        for k1 in range(anc_n[l]):
            d1 = anc_dof[l, k1]
            for k2 in range(anc_n[l]):
                M[d1, anc_dof[l, k2]] += inertias[l]

    # actuation and joint damping
    for j in range(N_JOINTS):
        rhs[3 + j] += tau_joint[j] - damping[j] * qd[3 + j]

    # compliant contact at heel/toe points
    cf = np.zeros((4, 2))
    for c in range(4):
        p = 7 + c
        h = _terrain_height(txs, th_lo, th_hi, pts[p, 0])
        pen = h - pts[p, 1]
        if pen <= 0.0:
            continue
        pen_eff = pen if pen < max_pen else max_pen
        fn = k_n * pen_eff + c_n * (-v[p, 1])
        if fn < 0.0:
            fn = 0.0
        ft = -mu * fn * np.tanh(v[p, 0] / v_slip)
        cf[c, 0] = ft
        cf[c, 1] = fn
        for i in range(N_DOF):
            rhs[i] += J[p, 0, i] * ft + J[p, 1, i] * fn

    qdd = np.linalg.solve(M, rhs)
    return qdd, cf


@njit(cache=True)
def _control_step(q, qd, targets, n_sub, dt, kp, kd, masses, inertias,
                  torso_com, hip_off, l_thigh, l_shank, com_thigh, com_shank,
                  com_foot, heel_off, toe_off, damping, tau_max, omega_max,
                  p_max, mu, k_n, c_n, v_slip, max_pen, gravity,
                  txs, th_lo, th_hi, anc_dof, anc_piv, anc_n):
    """Run the 2 kHz PD loop for n_sub substeps.

    Returns (q, qd, mean contact forces (4,2), mean joint torques, mean pelvis
    acceleration (2,), mean foot velocities (2,2) at the ankles, motor energy
    in joules, ok flag).
    """
    cf_sum = np.zeros((4, 2))
    tau_sum = np.zeros(N_JOINTS)
    acc_sum = np.zeros(2)
    footv_sum = np.zeros((2, 2))
    energy = 0.0
    ok = True
    for s in range(n_sub):
        tau = np.empty(N_JOINTS)
        for j in range(N_JOINTS):
            w = qd[3 + j]
            t = kp[j] * (targets[j] - q[3 + j]) - kd[j] * w
            # linear torque-speed curve keeps actuator power physical
            lim = tau_max[j] * max(0.0, 1.0 - abs(w) / omega_max[j])
            if t > lim:
                t = lim
            elif t < -lim:
                t = -lim
            tau[j] = t
        qdd, cf = _dynamics(q, qd, tau, masses, inertias, torso_com, hip_off,
                            l_thigh, l_shank, com_thigh, com_shank, com_foot,
                            heel_off, toe_off, damping, mu, k_n, c_n, v_slip,
                            max_pen, gravity, txs, th_lo, th_hi,
                            anc_dof, anc_piv, anc_n)
        for j in range(N_JOINTS):
            w = qd[3 + j]
            pos_work = tau[j] * w
            if pos_work < 0.0:
                pos_work = 0.0
            energy += (pos_work + (omega_max[j] / p_max[j]) * tau[j] * tau[j]) * dt
            tau_sum[j] += tau[j]
        for c in range(4):
            cf_sum[c, 0] += cf[c, 0]
            cf_sum[c, 1] += cf[c, 1]
        acc_sum[0] += qdd[0]
        acc_sum[1] += qdd[1]
        # semi-implicit Euler
        for i in range(N_DOF):
            qd[i] += dt * qdd[i]
        for i in range(N_DOF):
            q[i] += dt * qd[i]
        # ankle velocities for the reward's foot-speed terms
        pts = _point_positions(q, torso_com, hip_off, l_thigh, l_shank,
                               com_thigh, com_shank, com_foot, heel_off, toe_off)
        for leg in range(2):
            ai = 14 + 2 * leg
            # ankle velocity via its Jacobian
            vx, vz = qd[0], qd[1]
            # reuse ancestor structure of the ankle point
            for k in range(anc_n[ai]):
                d = anc_dof[ai, k]
                pv = anc_piv[ai, k]
                vx += qd[d] * (-(pts[ai, 1] - pts[pv, 1]))
                vz += qd[d] * (pts[ai, 0] - pts[pv, 0])
            footv_sum[leg, 0] += vx
            footv_sum[leg, 1] += vz
        bad = False
        for i in range(N_DOF):
            if not np.isfinite(q[i]) or not np.isfinite(qd[i]) or abs(qd[i]) > 1e4:
                bad = True
        if bad:
            ok = False
            break
    inv = 1.0 / n_sub
    return (q, qd, cf_sum * inv, tau_sum * inv, acc_sum * inv,
            footv_sum * inv, energy, ok)


# ---------------------------------------------------------------------------
# python-facing layer


@dataclass
class SimState:
    q: np.ndarray                  # (9,)
    qd: np.ndarray                 # (9,)
    contact_forces: np.ndarray     # (4,2) (Ft, Fn) heelL, toeL, heelR, toeR
    pelvis_acc: np.ndarray         # (2,) mean translational acceleration
    foot_velocities: np.ndarray    # (2,2) mean ankle velocities
    time: float = 0.0

    @classmethod
    def zeros(cls):
        return cls(np.zeros(N_DOF), np.zeros(N_DOF), np.zeros((4, 2)),
                   np.zeros(2), np.zeros((2, 2)), 0.0)

    def copy(self):
        return SimState(self.q.copy(), self.qd.copy(), self.contact_forces.copy(),
                        self.pelvis_acc.copy(), self.foot_velocities.copy(), self.time)


@dataclass
class DynRandConfig:
    damping_range: tuple = (0.5, 3.5)
    mass_range: tuple = (0.5, 1.7)
    friction_range: tuple = (0.5, 1.1)
    encoder_offset_range: tuple = (-0.05, 0.05)
    rate_range: tuple = (37.0, 42.0)


@dataclass
class DynRandSample:
    damping_mult: np.ndarray       # (6,)
    mass_mult: np.ndarray          # (7,)
    friction: float
    encoder_offsets: np.ndarray    # (6,)
    rate_range: tuple = (37.0, 42.0)

    def draw_rate(self, rng) -> float:
        """Execution rate is resampled at every control step."""
        return float(rng.uniform(*self.rate_range))

    @classmethod
    def identity(cls, friction: float = 1.0):
        return cls(np.ones(N_JOINTS), np.ones(7), friction, np.zeros(N_JOINTS),
                   rate_range=(40.0, 40.0))


def sample_dynamics(config: DynRandConfig, seed_or_rng) -> DynRandSample:
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    return DynRandSample(
        damping_mult=rng.uniform(*config.damping_range, size=N_JOINTS),
        mass_mult=rng.uniform(*config.mass_range, size=7),
        friction=float(rng.uniform(*config.friction_range)),
        encoder_offsets=rng.uniform(*config.encoder_offset_range, size=N_JOINTS),
        rate_range=config.rate_range,
    )


def _model_args(model: BipedModel, sample: DynRandSample | None):
    s = sample or DynRandSample.identity()
    return (model.masses * s.mass_mult, model.inertias * s.mass_mult,
            model.torso_com, model.hip_offset, model.l_thigh, model.l_shank,
            model.com_thigh, model.com_shank, model.com_foot,
            model.heel_offset, model.toe_offset,
            model.damping * s.damping_mult)


def _terrain_args(profile):
    return profile.xs, profile.h_lo, profile.h_hi


def forward_kinematics(q, model: BipedModel) -> dict:
    pts = _point_positions(np.asarray(q, dtype=np.float64), model.torso_com,
                           model.hip_offset, model.l_thigh, model.l_shank,
                           model.com_thigh, model.com_shank, model.com_foot,
                           model.heel_offset, model.toe_offset)
    names = ["com_torso", "com_thigh_l", "com_shank_l", "com_foot_l",
             "com_thigh_r", "com_shank_r", "com_foot_r",
             "heel_l", "toe_l", "heel_r", "toe_r",
             "pelvis", "hip", "knee_l", "ankle_l", "knee_r", "ankle_r"]
    return {n: pts[i].copy() for i, n in enumerate(names)}


def link_state(q, qd, model: BipedModel):
    """COM positions/velocities and angular velocities of all 7 links."""
    q = np.asarray(q, dtype=np.float64)
    qd = np.asarray(qd, dtype=np.float64)
    pts = _point_positions(q, model.torso_com, model.hip_offset, model.l_thigh,
                           model.l_shank, model.com_thigh, model.com_shank,
                           model.com_foot, model.heel_offset, model.toe_offset)
    pos = np.zeros((7, 2))
    vel = np.zeros((7, 2))
    omega = np.zeros(7)
    for l in range(7):
        pos[l] = pts[l]
        vx, vz = qd[0], qd[1]
        for k in range(_ANC_N[l]):
            d = _ANC_DOF[l, k]
            pv = _ANC_PIV[l, k]
            r = pts[l] - pts[pv]
            vx += qd[d] * (-r[1])
            vz += qd[d] * r[0]
            omega[l] += qd[d]
        vel[l] = (vx, vz)
    return pos, vel, omega


def total_energy(state: SimState, model: BipedModel,
                 sample: DynRandSample | None = None) -> float:
    """Kinetic plus gravitational potential energy (no contact spring term)."""
    s = sample or DynRandSample.identity()
    m = model.masses * s.mass_mult
    inertia = model.inertias * s.mass_mult
    pos, vel, omega = link_state(state.q, state.qd, model)
    ke = 0.5 * np.sum(m * np.sum(vel**2, axis=1)) + 0.5 * np.sum(inertia * omega**2)
    pe = model.gravity * np.sum(m * pos[:, 1])
    return float(ke + pe)


def step_inner(state: SimState, joint_torques, profile, dt: float,
               model: BipedModel, sample: DynRandSample | None = None) -> SimState:
    """Single raw physics substep with explicit joint torques."""
    s = sample or DynRandSample.identity()
    tau = np.clip(np.asarray(joint_torques, dtype=np.float64),
                  -model.tau_max, model.tau_max)
    q = state.q.copy()
    qd = state.qd.copy()
    qdd, cf = _dynamics(q, qd, tau, *_model_args(model, s), s.friction,
                        model.contact_stiffness, model.contact_damping,
                        model.slip_velocity, model.max_penetration,
                        model.gravity, *_terrain_args(profile),
                        _ANC_DOF, _ANC_PIV, _ANC_N)
    qd = qd + dt * qdd
    q = q + dt * qd
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
        raise SimulationInstabilityError("state diverged during step_inner")
    return SimState(q, qd, cf, qdd[:2].copy(), state.foot_velocities.copy(),
                    state.time + dt)


def control_step(state: SimState, pd_targets, sample: DynRandSample,
                 profile, model: BipedModel, rate: float | None = None):
    """Advance physics by one policy period running the 2 kHz PD loop.

    Returns (new state, info dict with mean torques/forces and motor energy).
    """
    rate = float(rate if rate is not None else 40.0)
    n_sub = max(1, int(round(INNER_RATE / rate)))
    dt = (1.0 / rate) / n_sub
    targets = np.asarray(pd_targets, dtype=np.float64)
    if targets.shape != (N_JOINTS,) or not np.all(np.isfinite(targets)):
        raise ValueError("pd_targets must be 6 finite joint angles")
    q = state.q.copy()
    qd = state.qd.copy()
    q_out, qd_out, cf, tau, acc, footv, energy, ok = _control_step(
        q, qd, targets, n_sub, dt, model.kp, model.kd,
        *_model_args(model, sample), model.tau_max, model.omega_max,
        model.p_max, sample.friction, model.contact_stiffness,
        model.contact_damping, model.slip_velocity, model.max_penetration,
        model.gravity, *_terrain_args(profile), _ANC_DOF, _ANC_PIV, _ANC_N)
    new = SimState(q_out, qd_out, cf, acc, footv, state.time + 1.0 / rate)
    info = {"torque": tau, "energy": energy, "n_sub": n_sub, "dt": dt,
            "elapsed": 1.0 / rate, "ok": ok}
    if not ok:
        raise SimulationInstabilityError("inner loop diverged")
    return new, info


def read_proprioception(state: SimState, sample: DynRandSample | None = None):
    """Pitch-only pelvis quaternion, angular velocity, offset joint readings."""
    s = sample or DynRandSample.identity()
    pitch = state.q[2]
    quat = np.array([np.cos(pitch / 2.0), 0.0, np.sin(pitch / 2.0), 0.0])
    angvel = np.array([0.0, state.qd[2], 0.0])
    jpos = state.q[3:] + s.encoder_offsets
    jvel = state.qd[3:].copy()
    return quat, angvel, jpos, jvel


def read_grf(state: SimState) -> np.ndarray:
    """Per-foot (tangential, normal) force, heel+toe summed, shape (2,2)."""
    cf = state.contact_forces
    return np.stack([cf[0] + cf[1], cf[2] + cf[3]])
