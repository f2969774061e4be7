"""Procedural stair-like 1-D ground profiles.

A profile is a piecewise-linear height function h(x) made of gentle incline
segments joined by exactly-vertical risers.  Risers are encoded as a height
discontinuity at a breakpoint, so breakpoint x-coordinates stay strictly
increasing.  At a riser x-coordinate the profile is closed above: a foot
exactly at the edge stands on the upper tread.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

TERRAIN_FORMAT_VERSION = 1

# x-extent the profile is explicitly tiled over; beyond this it extrapolates
# along the boundary incline.
_BACK_EXTENT = 30.0
_FRONT_EXTENT = 30.0


class TerrainConfigError(ValueError):
    """Raised for invalid generation configs."""


class TerrainParseError(ValueError):
    """Raised for malformed or version-mismatched serialized profiles."""


@dataclass
class StairGenConfig:
    rise_range: tuple = (0.10, 0.21)
    run_range: tuple = (0.24, 0.30)
    per_step_noise: float = 0.01
    step_count_range: tuple = (1, 8)
    approach_distance_range: tuple = (0.0, 10.0)
    incline_range: tuple = (-0.03, 0.03)
    landing_length_range: tuple = (0.5, 2.0)
    direction: str = "both"          # "ascend" | "descend" | "both"
    on_top_probability: float = 0.2  # episode may start already on the landing
    inclined_steps: bool = False     # per-step pitch extension, off by default

    def validate(self):
        for name in ("rise_range", "run_range", "step_count_range",
                     "approach_distance_range", "incline_range",
                     "landing_length_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise TerrainConfigError(f"{name} must be an ordered finite pair, got {(lo, hi)}")
        if self.rise_range[0] <= 0:
            raise TerrainConfigError("rise_range must be positive")
        if self.per_step_noise < 0:
            raise TerrainConfigError("per_step_noise must be >= 0")
        if self.step_count_range[0] < 0:
            raise TerrainConfigError("step_count_range must be nonnegative")
        if self.direction not in ("ascend", "descend", "both"):
            raise TerrainConfigError(f"unknown direction {self.direction!r}")
        if not 0.0 <= self.on_top_probability <= 1.0:
            raise TerrainConfigError("on_top_probability must be in [0, 1]")


@dataclass
class TerrainProfile:
    """Piecewise-linear ground with optional height jumps at breakpoints.

    xs:    strictly increasing breakpoint coordinates.
    h_lo:  height approaching breakpoint i from the left.
    h_hi:  height leaving breakpoint i to the right (h_lo != h_hi marks a riser).
    Between breakpoints the height interpolates linearly from h_hi[i] to
    h_lo[i+1]; outside the breakpoint span it extrapolates the boundary slope.
    """

    xs: np.ndarray
    h_lo: np.ndarray
    h_hi: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=np.float64)
        self.h_lo = np.asarray(self.h_lo, dtype=np.float64)
        self.h_hi = np.asarray(self.h_hi, dtype=np.float64)
        if not (len(self.xs) == len(self.h_lo) == len(self.h_hi)):
            raise ValueError("xs/h_lo/h_hi length mismatch")
        if len(self.xs) < 2:
            raise ValueError("profile needs at least two breakpoints")
        if not np.all(np.diff(self.xs) > 0):
            raise ValueError("breakpoint x must be strictly increasing")

    @property
    def riser_xs(self) -> np.ndarray:
        """x-coordinates where the height jumps."""
        jump = np.abs(self.h_hi - self.h_lo) > 1e-12
        return self.xs[jump]

    def height_at(self, x) -> np.ndarray | float:
        x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = np.empty_like(x_arr)
        for k, xv in enumerate(x_arr):
            out[k] = _height_at_scalar(self.xs, self.h_lo, self.h_hi, xv)
        return out if np.ndim(x) else float(out[0])

    def distance_to_next_elevation_change(self, x: float) -> float:
        """Horizontal distance to the nearest riser edge; +inf on flat ground."""
        risers = self.riser_xs
        if len(risers) == 0:
            return float("inf")
        return float(np.min(np.abs(risers - x)))

    def proximity_bit(self, x: float, horizon: float = 1.0) -> int:
        return int(self.distance_to_next_elevation_change(x) <= horizon)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        breakpoints = []
        for x, lo, hi in zip(self.xs, self.h_lo, self.h_hi):
            breakpoints.append([float(x), float(lo)])
            if abs(hi - lo) > 1e-12:
                # riser: duplicate x with the post-jump height
                breakpoints.append([float(x), float(hi)])
        return json.dumps(
            {
                "version": TERRAIN_FORMAT_VERSION,
                "seed": self.metadata.get("seed"),
                "breakpoints": breakpoints,
                "metadata": _jsonable(self.metadata),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str | bytes) -> "TerrainProfile":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise TerrainParseError(f"malformed terrain JSON: {e}") from e
        if not isinstance(obj, dict) or "version" not in obj:
            raise TerrainParseError("terrain JSON missing version field")
        if obj["version"] != TERRAIN_FORMAT_VERSION:
            raise TerrainParseError(f"unsupported terrain format version {obj['version']}")
        try:
            bps = obj["breakpoints"]
            xs, h_lo, h_hi = [], [], []
            for x, h in bps:
                if xs and abs(x - xs[-1]) < 1e-15:
                    h_hi[-1] = h
                else:
                    xs.append(x)
                    h_lo.append(h)
                    h_hi.append(h)
            return cls(np.array(xs), np.array(h_lo), np.array(h_hi),
                       metadata=obj.get("metadata", {}))
        except (KeyError, TypeError, ValueError) as e:
            raise TerrainParseError(f"bad terrain payload: {e}") from e

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "TerrainProfile":
        with open(path) as f:
            return cls.from_json(f.read())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _height_at_scalar(xs, h_lo, h_hi, x) -> float:
    n = len(xs)
    if x <= xs[0]:
        if x == xs[0]:
            return float(max(h_lo[0], h_hi[0]))
        slope = (h_lo[1] - h_hi[0]) / (xs[1] - xs[0])
        return float(h_hi[0] + slope * (x - xs[0]))
    if x >= xs[-1]:
        if x == xs[-1]:
            return float(max(h_lo[-1], h_hi[-1]))
        slope = (h_lo[-1] - h_hi[-2]) / (xs[-1] - xs[-2])
        return float(h_hi[-1] + slope * (x - xs[-1]))
    i = int(np.searchsorted(xs, x, side="right")) - 1
    if x == xs[i]:
        return float(max(h_lo[i], h_hi[i]))
    t = (x - xs[i]) / (xs[i + 1] - xs[i])
    return float(h_hi[i] + t * (h_lo[i + 1] - h_hi[i]))


def flat_profile(height: float = 0.0, slope: float = 0.0,
                 extent: float = _FRONT_EXTENT) -> TerrainProfile:
    """Single incline through x=0 at the given height and slope."""
    xs = np.array([-extent, extent])
    hs = height + slope * xs
    return TerrainProfile(xs, hs.copy(), hs.copy(),
                          metadata={"kind": "flat", "slope": slope,
                                    "rises": [], "runs": [], "n_steps": 0})


def single_step_profile(step_x: float, rise: float, base_height: float = 0.0) -> TerrainProfile:
    """One vertical step; negative rise makes a drop."""
    xs = np.array([-_BACK_EXTENT, step_x, _FRONT_EXTENT])
    h_lo = np.array([base_height, base_height, base_height + rise])
    h_hi = np.array([base_height, base_height + rise, base_height + rise])
    return TerrainProfile(xs, h_lo, h_hi,
                          metadata={"kind": "single_step", "rises": [rise],
                                    "runs": [], "n_steps": 1, "riser_x": step_x})


def stair_profile(rises, runs, start_x: float, pre_slope: float = 0.0,
                  post_slope: float = 0.0, landing: float = 1.0,
                  metadata: dict | None = None) -> TerrainProfile:
    """Explicit staircase: risers of the given heights, treads of the given runs.

    rises has n entries, runs has n-1 (tread depths between risers) plus the
    landing length after the final riser.  Ground before the stairs follows
    pre_slope through (0, 0); after the landing it follows post_slope.
    """
    rises = np.asarray(rises, dtype=np.float64)
    runs = np.asarray(runs, dtype=np.float64)
    n = len(rises)
    if n >= 1 and len(runs) != n - 1:
        raise ValueError("need n-1 tread depths for n risers")

    xs = [start_x - _BACK_EXTENT]
    base = pre_slope * start_x
    h_lo = [base + pre_slope * (-_BACK_EXTENT)]
    h_hi = [h_lo[0]]

    x = start_x
    h = base
    for i in range(n):
        xs.append(x)
        h_lo.append(h)
        h += rises[i]
        h_hi.append(h)
        x += runs[i] if i < n - 1 else landing
    # end of landing, then exit incline
    xs.append(x)
    h_lo.append(h)
    h_hi.append(h)
    xs.append(x + _FRONT_EXTENT)
    h_end = h + post_slope * _FRONT_EXTENT
    h_lo.append(h_end)
    h_hi.append(h_end)

    md = {"kind": "stairs", "rises": rises.tolist(), "runs": runs.tolist(),
          "n_steps": n, "start_x": start_x, "landing": landing,
          "pre_slope": pre_slope, "post_slope": post_slope}
    if metadata:
        md.update(metadata)
    return TerrainProfile(np.array(xs), np.array(h_lo), np.array(h_hi), metadata=md)


def generate(config: StairGenConfig, seed: int) -> TerrainProfile:
    """Seeded stair terrain draw; pure function of (config, seed)."""
    config.validate()
    rng = np.random.default_rng(seed)

    n_lo, n_hi = config.step_count_range
    n_steps = int(rng.integers(n_lo, n_hi + 1))
    approach = float(rng.uniform(*config.approach_distance_range))
    incline = float(rng.uniform(*config.incline_range))
    landing = float(rng.uniform(*config.landing_length_range))
    on_top = bool(rng.random() < config.on_top_probability)

    if config.direction == "both":
        direction = "descend" if rng.random() < 0.5 else "ascend"
    else:
        direction = config.direction

    if n_steps == 0:
        prof = flat_profile(slope=incline)
        prof.metadata.update({"seed": seed, "direction": direction, "on_top": False})
        return prof

    rises = rng.uniform(*config.rise_range, size=n_steps)
    rises += rng.uniform(-config.per_step_noise, config.per_step_noise, size=n_steps)
    runs = rng.uniform(*config.run_range, size=max(n_steps - 1, 0))
    if len(runs):
        runs += rng.uniform(-config.per_step_noise, config.per_step_noise, size=len(runs))

    if direction == "descend":
        rises = -rises

    if on_top:
        # spawn on the landing with the staircase just behind
        total_run = float(np.sum(runs)) + landing
        start_x = -total_run + float(rng.uniform(0.0, landing))
    else:
        start_x = approach

    prof = stair_profile(rises, runs, start_x, pre_slope=incline,
                         post_slope=incline, landing=landing)
    # anchor spawn-point height at zero so episodes start on the ground plane
    h0 = prof.height_at(0.0)
    prof.h_lo -= h0
    prof.h_hi -= h0
    prof.metadata.update({"seed": seed, "direction": direction, "on_top": on_top,
                          "approach": approach, "incline": incline})
    return prof
