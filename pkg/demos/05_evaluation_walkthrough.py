"""Evaluation suite walkthrough on a placeholder policy.

Runs the same machinery the `stairwalk eval` CLI uses -- success sweeps with
Wilson confidence intervals, cost of transport, ground-reaction analysis,
swing metrics -- but drives it with the zero (stand-still) policy so it
finishes in seconds.  With a trained checkpoint, substitute a PolicyRunner.

Run:  python demos/05_evaluation_walkthrough.py
"""

import numpy as np

from stairwalk.env import BipedEnv, EpisodeConfig
from stairwalk.evaluation import (TrialSpec, cost_of_transport, grf_analysis,
                                  run_trial, success_sweep, swing_metrics,
                                  wilson_interval, zero_policy)
from stairwalk.model import default_model
from stairwalk.physics import DynRandConfig
from stairwalk.terrain import flat_profile


def main():
    model = default_model()

    print("=== success sweep: 17 cm x 5 stairs, 10 trials/speed ===")
    spec = TrialSpec(n_trials=10, speeds=(0.25, 0.75, 1.25), horizon=300)
    res = success_sweep(zero_policy, spec, model, seed=0)
    print(f"{'speed':>6} {'succ':>5} {'rate':>6}  95% Wilson CI")
    for row in res["per_speed"]:
        print(f"{row['speed']:6.2f} {row['successes']:3d}/{row['trials']:<2d}"
              f" {row['rate']:6.2f}  [{row['ci_low']:.2f}, {row['ci_high']:.2f}]")
    print("(a stand-still policy never reaches the top -- all zeros, as it should)")
    print()

    print("=== Wilson interval at the full 150-trial budget ===")
    for k in (0, 75, 150):
        p, lo, hi = wilson_interval(k, 150)
        print(f"  {k:3d}/150 successes -> rate {p:.2f}, CI [{lo:.3f}, {hi:.3f}]")
    print()

    print("=== gait metrics on a quiet-standing trial ===")
    frozen = DynRandConfig(damping_range=(1.0, 1.0), mass_range=(1.0, 1.0),
                           friction_range=(0.9, 0.9),
                           encoder_offset_range=(0.0, 0.0),
                           rate_range=(40.0, 40.0))
    env = BipedEnv(EpisodeConfig(variant="flat", horizon=200,
                                 fixed_command=0.0, init_jitter=0.0,
                                 dynrand=frozen), model, seed=0)
    log = run_trial(env, zero_policy, seed=0)
    g = grf_analysis(log, model)
    weight = model.total_mass * model.gravity
    for i, foot in enumerate(g["feet"]):
        print(f"  foot {i}: {len(foot['stance_phases'])} stance phase(s), "
              f"mean force {foot['mean_force']:.1f} N "
              f"({foot['mean_force'] / weight:.2f} x Mg)")
    sw = swing_metrics(log, model, flat_profile())
    n_swings = sum(len(f["swing_phases"]) for f in sw["feet"])
    print(f"  swing phases while standing: {n_swings} (expected 0)")
    print()

    print("=== cost of transport needs forward travel to mean anything ===")
    try:
        out = cost_of_transport(log, model)
        print(f"  standing trial drifted {out['distance']:.4f} m; "
              f"CoT {out['cot']:.1f} is meaningless at that distance")
    except Exception as exc:
        print(f"  refused as designed: {exc}")
    print()
    print("CoT on a real trial is the trimmed motor energy integral")
    print("E = sum over joints of max(tau*omega, 0) + (omega_max/P_max) tau^2,")
    print("divided by M g d.")


if __name__ == "__main__":
    main()
