import json

import numpy as np
import pytest

from stairwalk.terrain import (StairGenConfig, TerrainConfigError,
                               TerrainParseError, TerrainProfile,
                               flat_profile, generate, single_step_profile,
                               stair_profile)


def test_flat_profile_height():
    prof = flat_profile(height=0.3, slope=0.02)
    assert prof.height_at(0.0) == pytest.approx(0.3)
    assert prof.height_at(5.0) == pytest.approx(0.3 + 0.1)
    assert prof.height_at(-5.0) == pytest.approx(0.3 - 0.1)
    assert prof.riser_xs.size == 0
    assert prof.distance_to_next_elevation_change(0.0) == np.inf


def test_single_step_closed_above():
    prof = single_step_profile(1.0, 0.15)
    assert prof.height_at(0.999) == pytest.approx(0.0)
    # exactly at the riser edge the foot stands on the upper tread
    assert prof.height_at(1.0) == pytest.approx(0.15)
    assert prof.height_at(1.001) == pytest.approx(0.15)


def test_single_step_drop():
    prof = single_step_profile(2.0, -0.1)
    assert prof.height_at(1.9) == pytest.approx(0.0)
    assert prof.height_at(2.0) == pytest.approx(0.0)  # max of both sides
    assert prof.height_at(2.1) == pytest.approx(-0.1)


def test_stair_profile_geometry():
    rises = [0.15, 0.18, 0.12]
    runs = [0.28, 0.30]
    prof = stair_profile(rises, runs, start_x=2.0, landing=1.0)
    assert np.allclose(prof.riser_xs, [2.0, 2.28, 2.58])
    # tread heights accumulate
    assert prof.height_at(2.1) == pytest.approx(0.15)
    assert prof.height_at(2.4) == pytest.approx(0.33)
    assert prof.height_at(3.0) == pytest.approx(0.45)
    assert prof.height_at(1.0) == pytest.approx(0.0)


def test_stair_profile_incline():
    prof = stair_profile([0.2], [], start_x=1.0, pre_slope=0.03,
                         post_slope=0.03, landing=1.0)
    assert prof.height_at(0.0) == pytest.approx(0.0)
    assert prof.height_at(1.0 - 1e-9) == pytest.approx(0.03, abs=1e-6)


def test_breakpoints_strictly_increasing_validation():
    with pytest.raises(ValueError):
        TerrainProfile(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        TerrainProfile(np.array([0.0]), np.zeros(1), np.zeros(1))


def test_generate_is_pure_function_of_seed():
    cfg = StairGenConfig()
    a = generate(cfg, 42)
    b = generate(cfg, 42)
    assert np.array_equal(a.xs, b.xs)
    assert np.array_equal(a.h_lo, b.h_lo)
    assert np.array_equal(a.h_hi, b.h_hi)
    c = generate(cfg, 43)
    assert not np.array_equal(a.xs, c.xs)


def test_generate_anchors_spawn_height():
    for seed in range(50):
        prof = generate(StairGenConfig(), seed)
        assert abs(prof.height_at(0.0)) < 1e-9


def test_generate_direction_control():
    ups = generate(StairGenConfig(direction="ascend"), 7)
    downs = generate(StairGenConfig(direction="descend"), 7)
    assert all(r > 0 for r in ups.metadata["rises"])
    assert all(r < 0 for r in downs.metadata["rises"])


def test_generate_on_top_puts_stairs_behind():
    cfg = StairGenConfig(on_top_probability=1.0, direction="ascend")
    for seed in range(30):
        prof = generate(cfg, seed)
        assert prof.metadata["on_top"]
        assert np.all(prof.riser_xs < 0.0)


def test_config_validation():
    with pytest.raises(TerrainConfigError):
        StairGenConfig(rise_range=(0.3, 0.1)).validate()
    with pytest.raises(TerrainConfigError):
        StairGenConfig(rise_range=(-0.1, 0.2)).validate()
    with pytest.raises(TerrainConfigError):
        StairGenConfig(direction="sideways").validate()
    with pytest.raises(TerrainConfigError):
        StairGenConfig(per_step_noise=-0.01).validate()
    with pytest.raises(TerrainConfigError):
        StairGenConfig(on_top_probability=1.5).validate()


def test_json_round_trip_preserves_risers(tmp_path):
    prof = generate(StairGenConfig(direction="ascend"), 11)
    path = tmp_path / "terrain.json"
    prof.save(path)
    back = TerrainProfile.load(path)
    assert np.allclose(prof.xs, back.xs)
    assert np.allclose(prof.h_lo, back.h_lo)
    assert np.allclose(prof.h_hi, back.h_hi)
    xs = np.linspace(-5, 10, 1001)
    assert np.allclose(prof.height_at(xs), back.height_at(xs))


def test_parse_errors():
    with pytest.raises(TerrainParseError):
        TerrainProfile.from_json("not json at all {")
    with pytest.raises(TerrainParseError):
        TerrainProfile.from_json(json.dumps({"breakpoints": []}))
    with pytest.raises(TerrainParseError):
        TerrainProfile.from_json(json.dumps({"version": 999, "breakpoints": []}))


def test_proximity_bit():
    prof = single_step_profile(2.0, 0.15)
    assert prof.proximity_bit(1.5, horizon=1.0) == 1
    assert prof.proximity_bit(0.5, horizon=1.0) == 0
    assert prof.proximity_bit(3.5, horizon=1.0) == 0
