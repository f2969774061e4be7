"""Command-line entry point.

Subcommands: train, eval, gen-terrain, gradcheck.  Exit codes: 0 on success,
2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _parse_speeds(text: str) -> tuple:
    try:
        return tuple(float(s) for s in text.split(","))
    except ValueError as e:
        raise ConfigError(f"bad speed list {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stairwalk",
        description="Blind bipedal stair traversal: training, evaluation, "
                    "terrain generation, gradient checks.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run PPO training")
    t.add_argument("--variant", default="stair-lstm",
                   help="stair-lstm | stair-ff | flat-lstm | proximity-lstm")
    t.add_argument("--run-dir", required=True)
    t.add_argument("--iterations", type=int, default=1000)
    t.add_argument("--buffer-size", type=int, default=50000)
    t.add_argument("--horizon", type=int, default=300)
    t.add_argument("--workers", type=int, default=8,
                   help="environments stepped in lockstep")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--resume", default=None, help="checkpoint to resume from")
    t.add_argument("--model", default=None, help="biped model JSON")

    e = sub.add_parser("eval", help="evaluate a trained policy")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--trials", type=int, default=150)
    e.add_argument("--speeds", default="0.25,0.5,0.75,1.0,1.25,1.5")
    e.add_argument("--rise", type=float, default=0.17)
    e.add_argument("--run", type=float, default=0.30)
    e.add_argument("--steps", type=int, default=5)
    e.add_argument("--horizon", type=int, default=1200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--analysis", action="store_true",
                   help="also emit cost-of-transport / GRF / swing reports")
    e.add_argument("--model", default=None)

    g = sub.add_parser("gen-terrain", help="generate stair terrain files")
    g.add_argument("--out", required=True, help="output JSON path")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--rise-min", type=float, default=0.10)
    g.add_argument("--rise-max", type=float, default=0.21)
    g.add_argument("--run-min", type=float, default=0.24)
    g.add_argument("--run-max", type=float, default=0.30)
    g.add_argument("--steps-min", type=int, default=1)
    g.add_argument("--steps-max", type=int, default=8)
    g.add_argument("--direction", default="both",
                   choices=("ascend", "descend", "both"))

    c = sub.add_parser("gradcheck", help="finite-difference gradient check")
    c.add_argument("--policy", default="lstm", choices=("lstm", "ff"))
    c.add_argument("--tolerance", type=float, default=1e-4)
    c.add_argument("--seed", type=int, default=0)
    return p


def cmd_train(args) -> int:
    import torch
    from .env import EpisodeConfig
    from .model import BipedModel
    from .ppo import PPOConfig, VARIANT_PRESETS, train
    if args.variant not in VARIANT_PRESETS:
        raise ConfigError(f"unknown variant {args.variant!r}; choose from "
                          f"{sorted(VARIANT_PRESETS)}")
    preset = VARIANT_PRESETS[args.variant]
    config = PPOConfig(
        buffer_size=args.buffer_size, iterations=args.iterations,
        num_envs=args.workers, seed=args.seed,
        episode=EpisodeConfig(horizon=args.horizon, variant=preset["variant"]),
        **preset)
    model = BipedModel.load(args.model) if args.model else None
    try:
        train(config, args.run_dir, model=model, resume=args.resume)
    except (FloatingPointError, torch._C._LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_eval(args) -> int:
    from . import nets
    from .env import ACTION_DIM, observation_dim
    from .evaluation import (PolicyRunner, TrialSpec, success_sweep,
                             run_trial, trial_success, cost_of_transport,
                             grf_analysis, swing_metrics, write_sweep_csv,
                             write_json, EvaluationError)
    from .env import BipedEnv, EpisodeConfig
    from .model import BipedModel, default_model
    from .ppo import PPOConfig
    from dataclasses import replace as dc_replace

    header = nets.read_checkpoint_header(args.checkpoint)
    cfg_meta = header["extra"].get("config", {})
    variant = cfg_meta.get("variant", "stair")
    kind = cfg_meta.get("policy_kind", "lstm")
    policy = nets.make_policy(kind, observation_dim(variant), ACTION_DIM)
    value = nets.make_value(kind, observation_dim(variant))
    nets.load_checkpoint(args.checkpoint, {"policy": policy, "value": value})
    model = BipedModel.load(args.model) if args.model else default_model()

    spec = TrialSpec(rise=args.rise, run=args.run, n_steps=args.steps,
                     n_trials=args.trials, speeds=_parse_speeds(args.speeds),
                     horizon=args.horizon)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eval_config.json", "w") as f:
        json.dump({"spec": asdict(spec), "checkpoint": args.checkpoint,
                   "variant": variant, "policy_kind": kind}, f, indent=2)

    runner = PolicyRunner(policy)
    episode = EpisodeConfig(variant=variant)
    results = success_sweep(runner, spec, model, seed=args.seed,
                            episode=episode)
    write_sweep_csv(results, out / "success_sweep.csv")
    write_json(results, out / "success_sweep.json")
    for row in results["per_speed"]:
        print(f"speed {row['speed']:.2f}  success {row['successes']}/"
              f"{row['trials']}  rate {row['rate']:.3f} "
              f"[{row['ci_low']:.3f}, {row['ci_high']:.3f}]")

    if args.analysis:
        env = BipedEnv(dc_replace(episode, horizon=spec.horizon,
                                  terrain=spec.terrain_config(),
                                  fixed_command=1.0), model, seed=args.seed)
        log = run_trial(env, runner, seed=args.seed)
        report = {"termination": log.termination,
                  "success": trial_success(log, env.profile),
                  "grf": grf_analysis(log, model),
                  "swing": swing_metrics(log, model, env.profile)}
        try:
            report["cost_of_transport"] = cost_of_transport(log, model)
        except EvaluationError as e:
            report["cost_of_transport"] = {"error": str(e)}
        write_json(report, out / "analysis.json")
        log.save_jsonl(out / "analysis_trial.jsonl")
    return EXIT_OK


def cmd_gen_terrain(args) -> int:
    from .terrain import StairGenConfig, TerrainConfigError, generate
    try:
        config = StairGenConfig(
            rise_range=(args.rise_min, args.rise_max),
            run_range=(args.run_min, args.run_max),
            step_count_range=(args.steps_min, args.steps_max),
            direction=args.direction)
        config.validate()
    except TerrainConfigError as e:
        raise ConfigError(str(e)) from e
    out = Path(args.out)
    if args.count == 1:
        generate(config, args.seed).save(out)
        print(f"wrote {out}")
    else:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(args.count):
            path = out / f"terrain_{args.seed + i:06d}.json"
            generate(config, args.seed + i).save(path)
        print(f"wrote {args.count} profiles to {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    import torch
    from . import nets
    torch.manual_seed(args.seed)
    # small dimensions keep the finite-difference sweep fast
    if args.policy == "lstm":
        net = torch.nn.LSTM(6, 8, 2, batch_first=True).to(torch.float64)
        x = torch.randn(3, 4, 6, dtype=torch.float64)
        def loss():
            out, _ = net(x)
            return (out**2).sum()
    else:
        net = torch.nn.Sequential(
            torch.nn.Linear(6, 16), torch.nn.Tanh(),
            torch.nn.Linear(16, 4)).to(torch.float64)
        x = torch.randn(5, 6, dtype=torch.float64)
        def loss():
            return (torch.tanh(net(x))**2).sum()
    err = nets.gradient_check(loss, net)
    print(f"max relative gradient error: {err:.3e} (tolerance {args.tolerance:.0e})")
    if not np.isfinite(err) or err > args.tolerance:
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": cmd_train, "eval": cmd_eval,
                "gen-terrain": cmd_gen_terrain, "gradcheck": cmd_gradcheck}
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
