import numpy as np
import pytest
from scipy.stats import vonmises

from stairwalk import gait
from stairwalk.gait import (DELTA_BOUNDS, NOMINAL_PHASE_DELTA, GaitClock,
                            IndicatorTable, PhaseIndicatorSpec, RewardInputs,
                            RewardWeights, advance_phase, boundary_cdf,
                            clamp_delta, clock_inputs,
                            default_indicator_specs, indicator_expectation,
                            indicator_tables, orientation_error, reward)


def test_clock_antiphase():
    phi = np.linspace(0.0, 1.0, 257)
    p1, p2 = clock_inputs(phi)
    assert np.allclose(p2, -p1, atol=1e-12)


def test_advance_phase_wraps():
    # increment equal to the nominal delta passes through unchanged
    phi = advance_phase(0.98, NOMINAL_PHASE_DELTA)
    assert phi == pytest.approx((0.98 + NOMINAL_PHASE_DELTA) % 1.0)
    assert 0.0 <= phi < 1.0


def test_delta_clamp_band():
    base = NOMINAL_PHASE_DELTA
    assert clamp_delta(0.0) == pytest.approx(DELTA_BOUNDS[0] * base)
    assert clamp_delta(10.0) == pytest.approx(DELTA_BOUNDS[1] * base)
    mid = 1.1 * base
    assert clamp_delta(mid) == pytest.approx(mid)


def test_gait_clock_cycle_duration():
    clk = GaitClock()
    n = 0
    # nominal delta at 40 Hz completes a 0.7 s cycle in 28 steps
    while True:
        prev = clk.phi
        clk.advance(clk.nominal_delta)
        n += 1
        if clk.phi < prev:
            break
    # 28 increments of 1/28 with float accumulation may need one extra step
    assert n in (28, 29)


def test_indicator_spec_validation():
    with pytest.raises(ValueError):
        PhaseIndicatorSpec(0.6, 0.4)
    with pytest.raises(ValueError):
        PhaseIndicatorSpec(0.0, 0.5, kappa=-1.0)


def test_boundary_cdf_symmetry():
    # symmetric jitter: P(d) + P(-d) = 1
    d = np.linspace(-0.4, 0.4, 33)
    assert np.allclose(boundary_cdf(d, 32) + boundary_cdf(-d, 32), 1.0,
                       atol=1e-12)


def test_indicator_expectation_midpoint_high():
    spec = PhaseIndicatorSpec(0.0, 0.5, kappa=32)
    assert indicator_expectation(spec, 0.25) > 0.99
    assert indicator_expectation(spec, 0.75) < 0.01
    # boundary value is cdf(0) * cdf(interval length) ~ 0.5
    assert indicator_expectation(spec, 0.0) == pytest.approx(0.5, abs=1e-3)


def test_indicator_periodicity():
    spec = PhaseIndicatorSpec(0.1, 0.6, kappa=20)
    phi = np.linspace(0, 1, 101)
    assert np.allclose(indicator_expectation(spec, phi),
                       indicator_expectation(spec, phi + 3.0), atol=1e-12)


def test_indicator_table_matches_exact():
    specs = default_indicator_specs(32.0)
    tables = indicator_tables(specs)
    phi = np.random.default_rng(0).uniform(0, 1, 500)
    for name, spec in specs.items():
        exact = indicator_expectation(spec, phi)
        approx = tables[name](phi)
        assert np.max(np.abs(exact - approx)) < 1e-5


def test_default_specs_complementary():
    specs = default_indicator_specs()
    phi = np.linspace(0, 1, 101)
    lf = indicator_expectation(specs["left_force"], phi)
    rf = indicator_expectation(specs["right_force"], phi)
    # half-cycle shift symmetry between the legs
    assert np.allclose(lf, indicator_expectation(specs["right_force"],
                                                 phi + 0.5), atol=1e-9)
    del rf


def test_reward_weights_sum():
    w = RewardWeights()
    assert w.total == pytest.approx(1.002, abs=1e-12)


def _unit_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def test_orientation_error_requires_unit_quaternions():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        orientation_error(q * 2.0, q, q, q)


def test_orientation_error_perfect_alignment():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    assert orientation_error(q, q, q, q) == 0.0


def _inputs(n=1, rng=None, **over):
    rng = rng or np.random.default_rng(0)
    base = dict(
        f_left=rng.uniform(0, 400, n), f_right=rng.uniform(0, 400, n),
        v_left=rng.uniform(0, 2, n), v_right=rng.uniform(0, 2, n),
        q_target=_unit_quats(rng, n), q_body=_unit_quats(rng, n),
        q_left=_unit_quats(rng, n), q_right=_unit_quats(rng, n),
        xdot_desired=rng.uniform(-0.3, 1.5, n), xdot_actual=rng.uniform(-1, 2, n),
        ydot_desired=np.zeros(n), ydot_actual=np.zeros(n),
        action=rng.uniform(-1, 1, (n, 7)), prev_action=rng.uniform(-1, 1, (n, 7)),
        torque=rng.uniform(-100, 100, (n, 6)),
        pelvis_rot=rng.uniform(0, 5, n), pelvis_acc=rng.uniform(0, 20, n))
    base.update(over)
    return RewardInputs(**base)


def test_reward_rejects_nonfinite():
    bad = _inputs(1)
    bad.f_left = np.array([np.nan])
    with pytest.raises(ValueError):
        reward(bad, 0.3)


def test_reward_batched_matches_scalar():
    rng = np.random.default_rng(3)
    inp = _inputs(16, rng)
    phi = rng.uniform(0, 1, 16)
    r_batch, terms = reward(inp, phi)
    for i in range(16):
        single = RewardInputs(**{
            k: np.asarray(getattr(inp, k))[i] for k in vars(inp)})
        r_i, _ = reward(single, phi[i])
        assert r_batch[i] == pytest.approx(float(r_i), abs=1e-12)


def test_reward_tables_match_exact_path():
    rng = np.random.default_rng(4)
    inp = _inputs(64, rng)
    phi = rng.uniform(0, 1, 64)
    specs = default_indicator_specs()
    r_exact, _ = reward(inp, phi, specs=specs)
    r_table, _ = reward(inp, phi, specs=specs, tables=indicator_tables(specs))
    assert np.max(np.abs(r_exact - r_table)) < 1e-5
