"""The simulator wrapped as an episodic MDP.

State: UAV positions then per-user task specs (users themselves are not
observed, matching the problem's information model).  Actions are flat
vectors in [-1, 1] decoded into offload targets, CPU allocations, and UAV
controls; bounded constraints hold by construction of the decoding, the four
remaining constraints are priced into the reward as hinge penalties.

Tasks regenerate every slot from a counter-based stream keyed on (episode
seed, slot), so stepping is deterministic given (world, action, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import allocate_bandwidth, link_budget
from .energy import SlotEnergyReport, carbon, slot_energy
from .kinematics import (
    TaskSpec,
    UavControl,
    WorldState,
    advance_uav,
    in_coverage,
    pairwise_min_distance,
    sample_users,
)
from .scenario import Scenario

# sub-stream tags so one episode seed drives independent draws
_STREAM_USERS = 11
_STREAM_TASKS = 13


@dataclass(frozen=True)
class PenaltyWeights:
    """Per-unit-violation prices and the overall reward scale."""

    area: float = 1.0
    collision: float = 1.0
    coverage: float = 1.0
    capacity: float = 1.0
    reward_scale: float = 100.0

    def __post_init__(self) -> None:
        for name in ("area", "collision", "coverage", "capacity"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"penalty weight {name} must be >= 0")


@dataclass(frozen=True)
class StateVec:
    """Raw observation plus its [0, 1]-normalized copy for the networks."""

    raw: np.ndarray
    normalized: np.ndarray


@dataclass(frozen=True)
class DecodedAction:
    assignment: np.ndarray  # (K,) serving UAV index per user
    f_alloc: np.ndarray  # (K, M) cycles/s; only assigned entries are consumed
    controls: tuple[UavControl, ...]


@dataclass(frozen=True)
class ViolationReport:
    """Unweighted violation magnitudes for one step."""

    area_overshoot_m: float
    collision_depth_m: float
    coverage_count: int
    capacity_overload: float

    def weighted(self, weights: PenaltyWeights) -> float:
        return (
            weights.area * self.area_overshoot_m
            + weights.collision * self.collision_depth_m
            + weights.coverage * self.coverage_count
            + weights.capacity * self.capacity_overload
        )


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass(frozen=True)
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


def state_dim(scenario: Scenario) -> int:
    return 3 * scenario.config.num_uavs + 2 * scenario.config.num_users


def action_dim(scenario: Scenario) -> int:
    m, k = scenario.config.num_uavs, scenario.config.num_users
    return 2 * m + k * (m + 1)


def encode_state(world: WorldState, scenario: Scenario) -> StateVec:
    c = scenario.config
    cp = scenario.compute
    raw = np.concatenate(
        [
            world.uav_pos.reshape(-1),
            np.array([(t.size_bits, t.cycles_per_bit) for t in world.tasks]).reshape(
                -1
            )
            if world.tasks
            else np.zeros(0),
        ]
    )
    norm = raw.copy()
    m = world.uav_pos.shape[0]
    norm[0 : 3 * m : 3] /= c.area_x_max_m
    norm[1 : 3 * m : 3] /= c.area_y_max_m
    norm[2 : 3 * m : 3] /= c.altitude_m
    d_lo = cp.task_size_mb_lo * cp.bits_per_mb
    d_hi = cp.task_size_mb_hi * cp.bits_per_mb
    if d_hi > d_lo:
        norm[3 * m :: 2] = (norm[3 * m :: 2] - d_lo) / (d_hi - d_lo)
    else:
        norm[3 * m :: 2] = 0.0
    if cp.task_density_hi > cp.task_density_lo:
        norm[3 * m + 1 :: 2] = (norm[3 * m + 1 :: 2] - cp.task_density_lo) / (
            cp.task_density_hi - cp.task_density_lo
        )
    else:
        norm[3 * m + 1 :: 2] = 0.0
    return StateVec(raw=raw, normalized=norm)


def decode_action(raw: np.ndarray, scenario: Scenario) -> DecodedAction:
    """Map a raw [-1, 1] vector onto offloading, CPU, and motion controls.

    The offload selector uses equal-width bins over the UAV index with the
    boundary rounding up; speeds and frequencies map linearly onto their
    admissible ranges, so the bound constraints cannot be violated.
    """
    c = scenario.config
    m, k = c.num_uavs, c.num_users
    expected = 2 * m + k * (m + 1)
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (expected,):
        raise ValueError(f"action length {raw.shape} != ({expected},)")
    raw = np.clip(raw, -1.0, 1.0)
    selectors = raw[:k]
    fractions = raw[k : k + k * m].reshape(k, m)
    speeds = raw[k + k * m : k + k * m + m]
    headings = raw[k + k * m + m :]

    assignment = np.minimum(
        m - 1, np.floor((selectors + 1.0) / 2.0 * m).astype(int)
    )
    f_alloc = (fractions + 1.0) / 2.0 * scenario.compute.max_cpu_freq_hz
    controls = tuple(
        UavControl(
            heading_rad=float(((headings[i] + 1.0) * math.pi) % (2.0 * math.pi)),
            speed_mps=float((speeds[i] + 1.0) / 2.0 * c.max_speed_mps),
        )
        for i in range(m)
    )
    return DecodedAction(assignment=assignment, f_alloc=f_alloc, controls=controls)


class UavMecEnv:
    """One episode = num_slots steps; users fixed per episode, tasks per slot."""

    def __init__(self, scenario: Scenario, penalties: PenaltyWeights | None = None):
        self.scenario = scenario
        self.penalties = penalties if penalties is not None else PenaltyWeights()
        self.state_dim = state_dim(scenario)
        self.action_dim = action_dim(scenario)
        self.world: WorldState | None = None
        self._seed: int | None = None
        self._done = True

    def _draw_tasks(self, slot: int) -> tuple[TaskSpec, ...]:
        cp = self.scenario.compute
        rng = np.random.default_rng(
            np.random.SeedSequence([self._seed, _STREAM_TASKS, slot])
        )
        k = self.scenario.config.num_users
        sizes_mb = rng.uniform(cp.task_size_mb_lo, cp.task_size_mb_hi, size=k)
        densities = rng.uniform(cp.task_density_lo, cp.task_density_hi, size=k)
        return tuple(
            TaskSpec(size_bits=s * cp.bits_per_mb, cycles_per_bit=d)
            for s, d in zip(sizes_mb, densities)
        )

    def reset(self, seed: int) -> StateVec:
        c = self.scenario.config
        self._seed = int(seed)
        self._done = False
        users = sample_users(
            np.random.SeedSequence([self._seed, _STREAM_USERS]),
            c.num_users,
            (c.area_x_max_m, c.area_y_max_m),
        )
        uavs = np.array(
            [[x, y, c.altitude_m] for x, y in c.uav_init_positions_m], dtype=float
        )
        self.world = WorldState(
            uav_pos=uavs, user_pos=users, slot=1, tasks=self._draw_tasks(1)
        )
        return encode_state(self.world, self.scenario)

    def step(
        self, raw_action: np.ndarray
    ) -> tuple[StateVec, float, bool, SlotEnergyReport, ViolationReport]:
        if self.world is None:
            raise RuntimeError("reset the environment before stepping")
        if self._done:
            raise RuntimeError("step after episode end")
        sc = self.scenario
        c = sc.config
        world = self.world
        decoded = decode_action(raw_action, sc)

        bandwidths = allocate_bandwidth(
            decoded.assignment, c.num_uavs, sc.channel.max_g2a_bandwidth_hz
        )
        budgets = [
            link_budget(
                world.uav_pos[decoded.assignment[k]],
                world.user_pos[k],
                bandwidths[k],
                sc.channel,
            )
            for k in range(c.num_users)
        ]
        report = slot_energy(
            world, decoded.assignment, decoded.f_alloc, decoded.controls, budgets, sc
        )

        # constraint accounting: coverage/capacity at the current geometry
        # where transmission happens, area/collision on the caused positions
        coverage_count = 0
        for k in range(c.num_users):
            ok, _ = in_coverage(
                world.uav_pos[decoded.assignment[k]],
                world.user_pos[k],
                c.coverage_radius_m,
                c.altitude_m,
            )
            coverage_count += 0 if ok else 1

        capacity_overload = 0.0
        f_max = sc.compute.max_cpu_freq_hz
        for m in range(c.num_uavs):
            served = decoded.assignment == m
            f_sum = float(decoded.f_alloc[served, m].sum())
            capacity_overload += max(0.0, f_sum - f_max) / f_max
            capacity_overload += max(0.0, float(served.sum()) - c.user_cap_per_uav)

        new_pos = np.empty_like(world.uav_pos)
        area_overshoot = 0.0
        for m in range(c.num_uavs):
            new_pos[m], overshoot = advance_uav(
                world.uav_pos[m],
                decoded.controls[m],
                c.slot_duration_s,
                (c.area_x_max_m, c.area_y_max_m),
            )
            area_overshoot += overshoot

        collision_depth = 0.0
        for i in range(c.num_uavs):
            for j in range(i + 1, c.num_uavs):
                d = float(np.linalg.norm(new_pos[i] - new_pos[j]))
                collision_depth += max(0.0, c.min_uav_separation_m - d)

        violations = ViolationReport(
            area_overshoot_m=area_overshoot,
            collision_depth_m=collision_depth,
            coverage_count=coverage_count,
            capacity_overload=capacity_overload,
        )
        reward = self.penalties.reward_scale * (
            -report.carbon_kg - violations.weighted(self.penalties)
        )

        done = world.slot == c.num_slots
        self.world = WorldState(
            uav_pos=new_pos,
            user_pos=world.user_pos,
            slot=world.slot + 1,
            tasks=self._draw_tasks(world.slot + 1),
        )
        self._done = done
        return (
            encode_state(self.world, self.scenario),
            float(reward),
            done,
            report,
            violations,
        )


def slot_log_line(
    slot: int, reward: float, report: SlotEnergyReport, violations: ViolationReport
) -> str:
    """One JSON line of the per-slot episode log."""
    return json.dumps(
        {
            "slot": slot,
            "reward": reward,
            "carbon_kg": report.carbon_kg,
            "energy_j": report.total_j,
            "violations": {
                "area_overshoot_m": violations.area_overshoot_m,
                "collision_depth_m": violations.collision_depth_m,
                "coverage_count": violations.coverage_count,
                "capacity_overload": violations.capacity_overload,
            },
        },
        sort_keys=True,
    )


class ReplayBuffer:
    """FIFO ring buffer with uniform without-replacement minibatch sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self._size = 0
        self._pos = 0
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self._size

    def push(
        self,
        state: np.ndarray,
        action: np.ndarray,
        reward: float,
        next_state: np.ndarray,
        done: bool,
    ) -> None:
        i = self._pos
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self._pos = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> TransitionBatch:
        if batch_size > self._size:
            raise ValueError(
                f"cannot sample {batch_size} transitions from a buffer of {self._size}"
            )
        idx = self._rng.choice(self._size, size=batch_size, replace=False)
        return TransitionBatch(
            states=self.states[idx].copy(),
            actions=self.actions[idx].copy(),
            rewards=self.rewards[idx].copy(),
            next_states=self.next_states[idx].copy(),
            dones=self.dones[idx].copy(),
        )
