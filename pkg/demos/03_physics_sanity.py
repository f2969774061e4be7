"""Physics sanity checks you can eyeball: energy, standing force, and contact.

Three short experiments on the planar biped simulator:
  1. ballistic flight -- total mechanical energy should stay flat
  2. quiet standing under PD control -- ground reaction matches body weight
  3. a drop test -- the penalty contact catches the robot without blow-up

Run:  python demos/03_physics_sanity.py
"""

import numpy as np

from stairwalk.model import default_model
from stairwalk.physics import (DynRandSample, SimState, control_step,
                               forward_kinematics, read_grf, step_inner,
                               total_energy)
from stairwalk.terrain import flat_profile


def standing_state(model, extra_height=0.0):
    """Crouched pose at the PD joint centers, feet just touching the ground."""
    st = SimState.zeros()
    st.q[3:] = model.joint_center
    fk = forward_kinematics(st.q, model)
    low = min(fk[p][1] for p in ("heel_l", "toe_l", "heel_r", "toe_r"))
    st.q[1] = -low + extra_height
    return st


def ballistic(model):
    print("=== 1. ballistic flight: energy conservation ===")
    prof = flat_profile()
    state = SimState.zeros()
    state.q[1] = 3.0          # well above ground
    state.qd[0] = 1.0         # tossed forward
    state.qd[2] = 2.0         # spinning
    e0 = total_energy(state, model)
    for _ in range(1000):     # 0.5 s at 2 kHz
        state = step_inner(state, np.zeros(6), prof, 5e-4, model, None)
    e1 = total_energy(state, model)
    print(f"E(0) = {e0:10.4f} J   E(0.5s) = {e1:10.4f} J   "
          f"drift = {abs(e1 - e0) / abs(e0) * 100:.5f} %")
    print()


def standing(model):
    print("=== 2. quiet standing: GRF vs weight ===")
    prof = flat_profile()
    sample = DynRandSample.identity(friction=0.9)
    state = standing_state(model)
    targets = model.joint_center
    for _ in range(120):      # 3 s of control steps
        state, _ = control_step(state, targets, sample, prof, model)
    fz = read_grf(state)[:, 1].sum()
    weight = model.total_mass * model.gravity
    print(f"vertical GRF = {fz:7.2f} N   Mg = {weight:7.2f} N   "
          f"error = {abs(fz - weight) / weight * 100:.2f} %")
    print()


def drop_test(model):
    print("=== 3. drop from 10 cm: contact transient ===")
    prof = flat_profile()
    sample = DynRandSample.identity(friction=0.9)
    state = standing_state(model, extra_height=0.10)
    peak = 0.0
    heights = []
    for k in range(80):       # 2 s
        state, _ = control_step(state, model.joint_center, sample, prof, model)
        peak = max(peak, read_grf(state)[:, 1].sum())
        heights.append(state.q[1])
    weight = model.total_mass * model.gravity
    print(f"peak vertical GRF = {peak:7.1f} N  ({peak / weight:.1f} x body weight)")
    print(f"settled pelvis height = {heights[-1]:.3f} m "
          f"(nominal {model.nominal_standing_height:.3f} m)")
    print(f"still upright and finite: {np.all(np.isfinite(state.q))}")


def main():
    model = default_model()
    ballistic(model)
    standing(model)
    drop_test(model)


if __name__ == "__main__":
    main()
