import numpy as np
import pytest

from stairwalk.model import BipedModel, ModelError, N_DOF, default_model
from stairwalk.physics import (DynRandConfig, DynRandSample, SimState,
                               control_step, forward_kinematics, read_grf,
                               read_proprioception, sample_dynamics,
                               step_inner, total_energy)
from stairwalk.terrain import flat_profile


@pytest.fixture(scope="module")
def model():
    return default_model()


@pytest.fixture
def flat():
    return flat_profile()


def _standing_state(model, jitter=0.0, rng=None):
    st = SimState.zeros()
    st.q[3:] = model.joint_center
    if jitter and rng is not None:
        st.q[3:] += rng.uniform(-jitter, jitter, 6)
    fk = forward_kinematics(st.q, model)
    low = min(fk[p][1] for p in ("heel_l", "toe_l", "heel_r", "toe_r"))
    st.q[1] = -low
    return st


def test_model_validation():
    d = default_model().to_dict()
    d["masses"] = [1.0] * 6
    with pytest.raises(ModelError):
        BipedModel.from_dict(d)
    d = default_model().to_dict()
    d["tau_max"] = [-1.0] * 6
    with pytest.raises(ModelError):
        BipedModel.from_dict(d)


def test_model_round_trip(tmp_path, model):
    path = tmp_path / "model.json"
    model.save(path)
    back = BipedModel.load(path)
    assert np.allclose(model.masses, back.masses)
    assert np.allclose(model.kp, back.kp)
    assert model.total_mass == pytest.approx(back.total_mass)


def test_total_mass(model):
    assert model.total_mass == pytest.approx(32.0)


def test_forward_kinematics_straight_legs(model):
    q = np.zeros(N_DOF)
    fk = forward_kinematics(q, model)
    # straight legs hang exactly thigh+shank below the pelvis
    leg = model.l_thigh + model.l_shank
    assert fk["ankle_l"][1] == pytest.approx(-leg)
    assert fk["ankle_r"][1] == pytest.approx(-leg)
    assert fk["ankle_l"][0] == pytest.approx(0.0)


def test_free_fall_com_acceleration(model, flat):
    """With no contact and no torques the COM accelerates at exactly -g."""
    st = SimState.zeros()
    st.q[1] = 5.0  # well above ground
    dt = 5e-4
    m = model.masses
    def com(state):
        from stairwalk.physics import link_state
        pos, vel, _ = link_state(state.q, state.qd, model)
        return (m @ pos) / m.sum(), (m @ vel) / m.sum()
    _, v0 = com(st)
    st2 = step_inner(st, np.zeros(6), flat, dt, model)
    _, v1 = com(st2)
    acc = (v1 - v0) / dt
    assert acc[0] == pytest.approx(0.0, abs=1e-9)
    assert acc[1] == pytest.approx(-model.gravity, abs=1e-9)


def test_free_flight_energy_conservation(model, flat):
    """Airborne, undamped, torque-free: mechanical energy is conserved."""
    import dataclasses
    undamped = BipedModel.from_dict(
        {**model.to_dict(), "damping": [0.0] * 6})
    st = SimState.zeros()
    st.q[1] = 8.0
    st.qd[:] = np.array([0.5, 0.2, 0.3, 0.4, -0.2, 0.1, -0.3, 0.2, -0.1])
    e0 = total_energy(st, undamped)
    dt = 5e-4
    for _ in range(1000):  # 0.5 s
        st = step_inner(st, np.zeros(6), flat, dt, undamped)
    e1 = total_energy(st, undamped)
    assert abs(e1 - e0) / abs(e0) < 1e-3


def test_static_grf_matches_weight(model, flat):
    """Feet loaded on flat ground support the robot's weight."""
    st = _standing_state(model)
    sample = DynRandSample.identity()
    forces = []
    for step in range(80):
        st, info = control_step(st, model.joint_center, sample, flat, model, 40.0)
        if step >= 20 and step < 60:
            forces.append(read_grf(st)[:, 1].sum())
    mean_force = np.mean(forces)
    weight = model.total_mass * model.gravity
    assert abs(mean_force - weight) / weight < 0.02


def test_friction_cone_never_violated(model, flat):
    """|Ft| <= mu Fn at every contact over a randomized-torque soak."""
    rng = np.random.default_rng(0)
    st = _standing_state(model)
    mu = 0.7
    sample = DynRandSample.identity()
    sample.friction = mu
    dt = 5e-4
    worst = 0.0
    for k in range(20000):  # 10 s at 2 kHz
        if k % 50 == 0:
            tau = rng.uniform(-30, 30, 6)
        st = step_inner(st, tau, flat, dt, model, sample)
        cf = st.contact_forces
        for c in range(4):
            fn, ft = cf[c, 1], abs(cf[c, 0])
            if fn > 0:
                worst = max(worst, ft - mu * fn)
        if st.q[1] < -1.0:
            st = _standing_state(model)  # re-rack if it collapsed
    assert worst <= 1e-9


def test_torque_speed_clamp(model, flat):
    """Commanded torque beyond the speed-dependent limit is clipped."""
    st = SimState.zeros()
    st.q[1] = 5.0
    st.qd[3] = model.omega_max[0] * 2.0  # hip spinning past the no-load speed
    sample = DynRandSample.identity()
    targets = model.joint_center + 10.0  # saturating PD error
    st2, info = control_step(st, np.clip(targets, -3, 3), sample, flat, model, 40.0)
    # at twice omega_max the available torque is zero
    assert abs(info["torque"][0]) < 1e-6


def test_control_step_substep_schedule(model, flat):
    st = _standing_state(model)
    sample = DynRandSample.identity()
    _, info40 = control_step(st, model.joint_center, sample, flat, model, 40.0)
    assert info40["n_sub"] == 50
    assert info40["dt"] == pytest.approx((1.0 / 40.0) / 50)
    _, info37 = control_step(st, model.joint_center, sample, flat, model, 37.0)
    assert info37["n_sub"] == 54
    assert info37["n_sub"] * info37["dt"] == pytest.approx(1.0 / 37.0)


def test_dynamics_randomization_ranges():
    rng = np.random.default_rng(5)
    cfg = DynRandConfig()
    for _ in range(200):
        s = sample_dynamics(cfg, rng)
        assert np.all(s.damping_mult >= 0.5) and np.all(s.damping_mult <= 3.5)
        assert np.all(s.mass_mult >= 0.5) and np.all(s.mass_mult <= 1.7)
        assert 0.5 <= s.friction <= 1.1
        assert np.all(np.abs(s.encoder_offsets) <= 0.05)
        rate = s.draw_rate(rng)
        assert 37.0 <= rate <= 42.0


def test_encoder_offsets_shift_proprioception(model):
    st = _standing_state(model)
    ident = DynRandSample.identity()
    shifted = DynRandSample.identity()
    shifted.encoder_offsets = np.full(6, 0.03)
    _, _, jpos_a, _ = read_proprioception(st, ident)
    _, _, jpos_b, _ = read_proprioception(st, shifted)
    assert np.allclose(jpos_b - jpos_a, 0.03)


def test_motor_energy_nonnegative_and_accumulates(model, flat):
    st = _standing_state(model)
    sample = DynRandSample.identity()
    total = 0.0
    for _ in range(20):
        st, info = control_step(st, model.joint_center + 0.1, sample, flat,
                                model, 40.0)
        assert info["energy"] >= 0.0
        total += info["energy"]
    assert total > 0.0
