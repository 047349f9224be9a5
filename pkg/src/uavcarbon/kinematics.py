"""UAV and user geometry: motion updates, distances, coverage predicates.

Everything here is a pure function over value types, so rollouts can run in
parallel without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TaskSpec:
    """One user's task for the current slot."""

    size_bits: float
    cycles_per_bit: float

    def __post_init__(self) -> None:
        if not (self.size_bits > 0 and self.cycles_per_bit > 0):
            raise ValueError("task size and density must be positive")


@dataclass(frozen=True)
class UavControl:
    """Heading in [0, 2*pi) radians and speed in [0, v_max] m/s."""

    heading_rad: float
    speed_mps: float


@dataclass
class WorldState:
    """Simulator ground truth for one slot."""

    uav_pos: np.ndarray  # (M, 3), z fixed at the scenario altitude
    user_pos: np.ndarray  # (K, 3), z = 0
    slot: int  # 1-based, in [1, num_slots]
    tasks: tuple[TaskSpec, ...]  # one per user

    def validate(self, altitude_m: float, num_slots: int) -> None:
        if not np.all(np.isfinite(self.uav_pos)) or not np.all(
            np.isfinite(self.user_pos)
        ):
            raise ValueError("positions must be finite")
        if not np.allclose(self.uav_pos[:, 2], altitude_m):
            raise ValueError("all UAV z-coordinates must equal the altitude")
        if not 1 <= self.slot <= num_slots:
            raise ValueError("slot index out of range")
        if len(self.tasks) != self.user_pos.shape[0]:
            raise ValueError("one task per user required")


def advance_uav(
    pos: np.ndarray,
    ctrl: UavControl,
    slot_duration_s: float,
    area: tuple[float, float],
) -> tuple[np.ndarray, float]:
    """Move one UAV for a slot; clamp to the area and report the overshoot.

    Returns the new (x, y, z) position and the Euclidean distance between the
    unclamped and clamped planar positions (0.0 when the move stays inside).
    """
    x = pos[0] + slot_duration_s * ctrl.speed_mps * math.cos(ctrl.heading_rad)
    y = pos[1] + slot_duration_s * ctrl.speed_mps * math.sin(ctrl.heading_rad)
    cx = min(max(x, 0.0), area[0])
    cy = min(max(y, 0.0), area[1])
    violation = math.hypot(x - cx, y - cy)
    return np.array([cx, cy, pos[2]]), violation


def pairwise_min_distance(
    uav_pos: np.ndarray,
) -> tuple[float, tuple[int, int] | None]:
    """Minimum distance over unordered UAV pairs (0-based index pair).

    A single UAV cannot collide, so M < 2 returns (+inf, None).  Ties break
    toward the lowest index pair.
    """
    m = uav_pos.shape[0]
    if m < 2:
        return math.inf, None
    best = math.inf
    best_pair: tuple[int, int] | None = None
    for i in range(m):
        for j in range(i + 1, m):
            d = float(np.linalg.norm(uav_pos[i] - uav_pos[j]))
            if d < best:
                best = d
                best_pair = (i, j)
    return best, best_pair


def in_coverage(
    uav: np.ndarray, user: np.ndarray, coverage_radius_m: float, altitude_m: float
) -> tuple[bool, float]:
    """Coverage test plus the squared 3-D slant distance for channel reuse."""
    diff = uav - user
    d_sq = float(diff @ diff)
    return d_sq <= coverage_radius_m**2 + altitude_m**2, d_sq


def sample_users(seed: int, num_users: int, area: tuple[float, float]) -> np.ndarray:
    """Uniform i.i.d. user positions in the area, z = 0; same seed, same draw."""
    rng = np.random.default_rng(seed)
    out = np.zeros((num_users, 3))
    if num_users:
        out[:, 0] = rng.uniform(0.0, area[0], size=num_users)
        out[:, 1] = rng.uniform(0.0, area[1], size=num_users)
    return out
