"""Blind stair traversal for a planar biped: terrain, sim, reward, RL, eval."""

__version__ = "0.1.0"

from . import terrain, gait, model, physics, env  # noqa: F401
