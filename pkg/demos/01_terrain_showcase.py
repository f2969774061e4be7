"""Terrain generation walkthrough: seeded stair profiles and their statistics.

Run:  python demos/01_terrain_showcase.py
"""

import numpy as np

from stairwalk.terrain import StairGenConfig, generate, stair_profile


def ascii_profile(prof, x0=-2.0, x1=8.0, width=78, height=14):
    xs = np.linspace(x0, x1, width)
    hs = np.array([prof.height_at(x) for x in xs])
    lo, hi = hs.min(), hs.max()
    span = max(hi - lo, 1e-6)
    rows = []
    for r in range(height, -1, -1):
        level = lo + span * r / height
        rows.append("".join("#" if h >= level else " " for h in hs))
    return "\n".join(rows)


def main():
    print("=== one seeded staircase ===")
    cfg = StairGenConfig(direction="ascend")
    prof = generate(cfg, seed=7)
    md = prof.metadata
    print(f"seed 7: {md['n_steps']} steps, direction {md['direction']}, "
          f"incline {md['incline']:+.3f} rad")
    print("rises:", np.round(md["rises"], 3))
    print(ascii_profile(prof))
    print()

    print("=== determinism: same seed, same geometry ===")
    again = generate(cfg, seed=7)
    print("identical:", np.array_equal(prof.xs, again.xs)
          and np.array_equal(prof.h_hi, again.h_hi))
    print()

    print("=== population statistics over 2000 seeds ===")
    rises, runs, counts = [], [], []
    for seed in range(2000):
        p = generate(StairGenConfig(), seed)
        rises.extend(abs(r) for r in p.metadata["rises"])
        runs.extend(p.metadata["runs"])
        counts.append(p.metadata["n_steps"])
    print(f"rise  range [{min(rises):.3f}, {max(rises):.3f}] m")
    print(f"run   range [{min(runs):.3f}, {max(runs):.3f}] m")
    print(f"steps range [{min(counts)}, {max(counts)}]")
    print()

    print("=== the trial staircase used by the evaluation suite ===")
    trial = stair_profile([0.17] * 5, [0.30] * 4, start_x=1.0, landing=2.0)
    print(ascii_profile(trial, x0=0.0, x1=5.0))
    print("riser positions:", np.round(trial.riser_xs, 2))


if __name__ == "__main__":
    main()
