import json

import numpy as np
import pytest

from stairwalk.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, build_parser,
                           main)
from stairwalk.terrain import TerrainProfile


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_gen_terrain_single(tmp_path):
    out = tmp_path / "terrain.json"
    rc = main(["gen-terrain", "--out", str(out), "--seed", "3"])
    assert rc == EXIT_OK
    prof = TerrainProfile.load(out)
    assert prof.metadata["seed"] == 3


def test_gen_terrain_batch(tmp_path):
    out = tmp_path / "profiles"
    rc = main(["gen-terrain", "--out", str(out), "--seed", "0",
               "--count", "4"])
    assert rc == EXIT_OK
    files = sorted(out.glob("terrain_*.json"))
    assert len(files) == 4


def test_gen_terrain_bad_config_exit_code(tmp_path):
    rc = main(["gen-terrain", "--out", str(tmp_path / "x.json"),
               "--rise-min", "0.5", "--rise-max", "0.2"])
    assert rc == EXIT_CONFIG


def test_gen_terrain_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["gen-terrain", "--out", str(a), "--seed", "9"])
    main(["gen-terrain", "--out", str(b), "--seed", "9"])
    assert a.read_text() == b.read_text()


def test_gradcheck_both_architectures():
    assert main(["gradcheck", "--policy", "ff"]) == EXIT_OK
    assert main(["gradcheck", "--policy", "lstm"]) == EXIT_OK


def test_gradcheck_impossible_tolerance_is_numerical_failure():
    rc = main(["gradcheck", "--policy", "ff", "--tolerance", "1e-30"])
    assert rc == EXIT_NUMERICAL


def test_train_unknown_variant(tmp_path):
    rc = main(["train", "--variant", "moonwalk",
               "--run-dir", str(tmp_path / "run")])
    assert rc == EXIT_CONFIG


def test_train_writes_resolved_config(tmp_path):
    run = tmp_path / "run"
    rc = main(["train", "--variant", "flat-lstm", "--run-dir", str(run),
               "--iterations", "1", "--buffer-size", "200", "--workers", "2",
               "--horizon", "40", "--seed", "0"])
    assert rc == EXIT_OK
    cfg = json.loads((run / "config.json").read_text())
    assert cfg["variant"] == "flat"
    assert cfg["policy_kind"] == "lstm"
    assert cfg["buffer_size"] == 200
    assert (run / "metrics.jsonl").exists()
    assert (run / "ckpt_latest.bin").exists()


def test_eval_round_trip(tmp_path, capsys):
    run = tmp_path / "run"
    main(["train", "--variant", "flat-lstm", "--run-dir", str(run),
          "--iterations", "1", "--buffer-size", "200", "--workers", "2",
          "--horizon", "40", "--seed", "0"])
    out = tmp_path / "eval"
    rc = main(["eval", "--checkpoint", str(run / "ckpt_latest.bin"),
               "--out-dir", str(out), "--trials", "1", "--speeds", "1.0",
               "--horizon", "30"])
    assert rc == EXIT_OK
    assert (out / "success_sweep.csv").exists()
    sweep = json.loads((out / "success_sweep.json").read_text())
    assert sweep["per_speed"][0]["trials"] == 1


def test_eval_missing_checkpoint(tmp_path):
    rc = main(["eval", "--checkpoint", str(tmp_path / "nope.bin"),
               "--out-dir", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG
