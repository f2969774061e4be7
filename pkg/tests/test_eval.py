import numpy as np
import pytest

from stairwalk.env import BipedEnv, EpisodeConfig
from stairwalk.evaluation import (EvaluationError, PolicyRunner, TrialLog,
                                  TrialSpec, cost_of_transport,
                                  foot_trajectories, grf_analysis,
                                  motor_energy, run_trial, stance_windows,
                                  success_sweep, swing_metrics, trial_success,
                                  wilson_interval, write_json,
                                  write_sweep_csv, zero_policy)
from stairwalk.model import default_model
from stairwalk.terrain import single_step_profile


@pytest.fixture(scope="module")
def model():
    return default_model()


@pytest.fixture(scope="module")
def short_log(model):
    env = BipedEnv(EpisodeConfig(variant="flat", horizon=250,
                                 fixed_command=0.0), model, seed=1)
    return run_trial(env, zero_policy, seed=1)


def test_trial_spec_terrain_config():
    spec = TrialSpec()
    cfg = spec.terrain_config()
    assert cfg.rise_range == (0.17, 0.17)
    assert cfg.run_range == (0.30, 0.30)
    assert cfg.step_count_range == (5, 5)
    assert cfg.per_step_noise == 0.0
    assert cfg.direction == "ascend"
    assert cfg.on_top_probability == 0.0


def test_run_trial_logs_consistent(short_log):
    T = len(short_log)
    assert T > 0
    assert short_log.q.shape == (T, 9)
    assert short_log.grf.shape == (T, 2, 2)
    assert short_log.torque.shape == (T, 6)
    assert np.all(np.diff(short_log.time) > 0)
    assert short_log.termination in ("fall", "horizon")


def test_trial_log_jsonl_round_trip(short_log, tmp_path):
    path = tmp_path / "trial.jsonl"
    short_log.save_jsonl(path)
    back = TrialLog.load_jsonl(path)
    assert np.allclose(short_log.q, back.q)
    assert np.allclose(short_log.grf, back.grf)
    assert back.termination == short_log.termination


def test_trial_success_requires_passing_margin():
    prof = single_step_profile(1.0, 0.15)
    base = dict(qd=np.zeros((3, 9)), grf=np.zeros((3, 2, 2)),
                torque=np.zeros((3, 6)), energy=np.zeros(3),
                reward=np.zeros(3), action=np.zeros((3, 7)),
                time=np.array([0.0, 1.0, 2.0]))
    q_short = np.zeros((3, 9)); q_short[:, 0] = [0.0, 0.5, 1.2]
    q_past = np.zeros((3, 9)); q_past[:, 0] = [0.0, 1.0, 1.6]
    assert not trial_success(TrialLog(q=q_short, termination="horizon", **base), prof)
    assert trial_success(TrialLog(q=q_past, termination="horizon", **base), prof)
    assert not trial_success(TrialLog(q=q_past, termination="fall", **base), prof)


def test_policy_that_falls_immediately_scores_zero(model):
    def faceplant(obs):
        return np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0])
    spec = TrialSpec(n_trials=5, speeds=(1.0,), horizon=200)
    res = success_sweep(faceplant, spec, model, seed=0)
    assert res["per_speed"][0]["successes"] == 0
    assert res["per_speed"][0]["rate"] == 0.0


def test_success_sweep_structure(model):
    spec = TrialSpec(n_trials=2, speeds=(0.5, 1.0), horizon=60)
    res = success_sweep(zero_policy, spec, model, seed=3)
    assert [r["speed"] for r in res["per_speed"]] == [0.5, 1.0]
    for r in res["per_speed"]:
        assert 0.0 <= r["ci_low"] <= r["rate"] <= r["ci_high"] <= 1.0


def test_descend_sweep_mirrors_geometry(model):
    spec = TrialSpec(n_trials=1, speeds=(0.5,), horizon=10,
                     direction="descend")
    cfg = spec.terrain_config()
    from stairwalk.terrain import generate
    prof = generate(cfg, 0)
    assert all(r < 0 for r in prof.metadata["rises"])


def test_wilson_interval_known_values():
    p, lo, hi = wilson_interval(0, 150)
    assert p == 0.0 and lo == 0.0 and hi < 0.05
    p, lo, hi = wilson_interval(150, 150)
    assert p == 1.0 and hi == 1.0 and lo > 0.95
    p, lo, hi = wilson_interval(75, 150)
    assert lo < 0.5 < hi


def test_motor_energy_refinement_converges():
    """Trapezoid estimate is stable under 10x grid refinement."""
    om_max = np.array([12.0, 16.0])
    p_max = np.array([700.0, 350.0])
    def sample(n):
        t = np.linspace(0, 2, n)
        tau = np.stack([60 * np.sin(2 * np.pi * t), 40 * np.cos(3 * t)], 1)
        om = np.stack([3 * np.cos(2 * np.pi * t), 2 * np.sin(3 * t)], 1)
        return tau, om, t
    coarse = motor_energy(*sample(401), om_max, p_max)
    fine = motor_energy(*sample(4001), om_max, p_max)
    assert coarse == pytest.approx(fine, rel=1e-3)
    assert fine > 0


def test_motor_energy_resistive_term_only():
    # constant torque at zero speed: purely resistive loss tau^2 * om_max/p_max
    t = np.linspace(0, 1, 11)
    tau = np.full((11, 1), 10.0)
    om = np.zeros((11, 1))
    e = motor_energy(tau, om, t, np.array([12.0]), np.array([700.0]))
    assert e == pytest.approx(100.0 * 12.0 / 700.0)


def test_negative_work_not_recovered():
    t = np.linspace(0, 1, 11)
    tau = np.full((11, 1), 10.0)
    om = np.full((11, 1), -2.0)  # opposing motion
    om_max, p_max = np.array([1e9]), np.array([1e18])  # kill resistive term
    e = motor_energy(tau, om, t, om_max, p_max)
    assert e == pytest.approx(0.0, abs=1e-6)


def test_cost_of_transport_errors(short_log, model):
    # standing trial: displacement ~ 0 -> must refuse
    with pytest.raises(EvaluationError):
        cost_of_transport(short_log, model)
    tiny = TrialLog(time=np.array([0.0, 0.1]), q=np.zeros((2, 9)),
                    qd=np.zeros((2, 9)), grf=np.zeros((2, 2, 2)),
                    torque=np.zeros((2, 6)), energy=np.zeros(2),
                    reward=np.zeros(2), action=np.zeros((2, 7)),
                    termination="horizon")
    with pytest.raises(EvaluationError):
        cost_of_transport(tiny, model)


def test_cost_of_transport_synthetic():
    model = default_model()
    T = 400
    t = np.arange(T) * 0.025
    q = np.zeros((T, 9))
    q[:, 0] = 1.0 * t  # 1 m/s
    log = TrialLog(time=t, q=q, qd=np.zeros((T, 9)), grf=np.zeros((T, 2, 2)),
                   torque=np.zeros((T, 6)),
                   energy=np.full(T, 2.0),  # 2 J per 25 ms step = 80 W
                   reward=np.zeros(T), action=np.zeros((T, 7)),
                   termination="horizon")
    out = cost_of_transport(log, model)
    # 80 W at 1 m/s, weight 32 kg * 9.81
    assert out["cot"] == pytest.approx(80.0 / (32.0 * 9.81), rel=0.02)


def test_stance_windows():
    fn = np.array([0, 0, 10, 12, 9, 0, 0, 7, 8, 0], dtype=float)
    assert stance_windows(fn, 5.0) == [(2, 5), (7, 9)]
    assert stance_windows(np.full(4, 20.0), 5.0) == [(0, 4)]
    assert stance_windows(np.zeros(4), 5.0) == []


def test_grf_analysis_static_weight(model):
    from stairwalk.physics import DynRandConfig
    frozen = DynRandConfig(damping_range=(1.0, 1.0), mass_range=(1.0, 1.0),
                           friction_range=(0.9, 0.9),
                           encoder_offset_range=(0.0, 0.0),
                           rate_range=(40.0, 40.0))
    env = BipedEnv(EpisodeConfig(variant="flat", horizon=120,
                                 fixed_command=0.0, init_jitter=0.0,
                                 dynrand=frozen),
                   model, seed=0)
    log = run_trial(env, zero_policy, seed=5)
    g = grf_analysis(log, model)
    total_mean = sum(f["mean_force"] for f in g["feet"])
    weight = model.total_mass * model.gravity
    # standing: combined mean vertical force near body weight
    assert total_mean == pytest.approx(weight, rel=0.1)
    assert g["total_impulse"] > 0


def test_foot_trajectories_shape(short_log, model):
    paths = foot_trajectories(short_log, model)
    assert paths.shape == (len(short_log), 2, 2)
    assert np.all(np.isfinite(paths))


def test_swing_metrics_structure(short_log, model):
    env_profile = single_step_profile(5.0, 0.1)
    out = swing_metrics(short_log, model, env_profile)
    assert len(out["feet"]) == 2
    for f in out["feet"]:
        for ph in f["swing_phases"]:
            assert ph["duration"] > 0


def test_emitters(tmp_path, model):
    spec = TrialSpec(n_trials=1, speeds=(0.5,), horizon=20)
    res = success_sweep(zero_policy, spec, model, seed=0, keep_logs=True)
    write_sweep_csv(res, tmp_path / "sweep.csv")
    write_json(res, tmp_path / "sweep.json")
    text = (tmp_path / "sweep.csv").read_text()
    assert text.splitlines()[0] == "speed,trials,successes,rate,ci_low,ci_high"
    import json
    obj = json.loads((tmp_path / "sweep.json").read_text())
    assert "logs" not in obj["per_speed"][0]
