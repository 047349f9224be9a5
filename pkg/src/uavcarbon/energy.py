"""Energy and carbon accounting for one slot.

Transmission is charged as p * D / R with no per-slot deadline (the
optimization problem carries no latency constraint), computation follows the
switch-capacitance model, and propulsion uses the rotary-wing power curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import LinkBudget
from .kinematics import UavControl, WorldState
from .scenario import CarbonParams, PropulsionParams, Scenario


@dataclass(frozen=True)
class SlotEnergyReport:
    """Per-slot breakdown; totals include only assigned links."""

    tx_j: np.ndarray  # (K,) uplink energy per user
    compute_j: np.ndarray  # (K,) onboard compute energy per user
    fly_j: np.ndarray  # (M,) propulsion energy per UAV
    total_j: float
    carbon_kg: float


def tx_energy(tx_power_w: float, size_bits: float, rate_bps: float) -> float:
    """Uplink energy p * D / R."""
    if rate_bps <= 0.0:
        raise ValueError("zero rate with nonzero task")
    return tx_power_w * size_bits / rate_bps


def compute_energy(
    switch_capacitance: float,
    size_bits: float,
    cycles_per_bit: float,
    cpu_freq_hz: float,
) -> float:
    """Compute energy eps * D * C * f^2."""
    if cpu_freq_hz < 0.0:
        raise ValueError("allocated CPU frequency must be non-negative")
    return switch_capacitance * size_bits * cycles_per_bit * cpu_freq_hz**2


def propulsion_energy(
    speed_mps: float, slot_duration_s: float, params: PropulsionParams
) -> float:
    """Rotary-wing propulsion energy over one slot.

    Blade-profile and parasite terms grow with speed; the induced term decays
    from its hover value.  At v = 0 the power is exactly P0 + P1.
    """
    if speed_mps < 0.0:
        raise ValueError("speed must be non-negative")
    v = speed_mps
    profile = params.blade_power_w * (1.0 + 3.0 * v**2 / params.tip_speed_mps**2)
    parasite = (
        0.5
        * params.drag_ratio
        * params.air_density_kgm3
        * params.rotor_solidity
        * params.disk_area_m2
        * v**3
    )
    v0 = params.induced_speed_mps
    inner = math.sqrt(1.0 + v**4 / (4.0 * v0**4)) - v**2 / (2.0 * v0**2)
    # sqrt(1 + x^2) >= x holds in floating point as well
    assert inner >= 0.0, "induced-power radical went negative"
    induced = params.induced_power_w * math.sqrt(inner)
    return slot_duration_s * (profile + parasite + induced)


def carbon(energy_j: float, params: CarbonParams) -> float:
    """Carbon in kg for the given energy; linear, so slots sum freely."""
    if energy_j < 0.0:
        raise ValueError("energy must be non-negative")
    return params.kg_per_wh * (params.wh_per_joule * energy_j)


def slot_energy(
    world: WorldState,
    assignment: np.ndarray,
    f_alloc: np.ndarray,
    controls: Sequence[UavControl],
    link_budgets: Sequence[LinkBudget],
    scenario: Scenario,
) -> SlotEnergyReport:
    """Total slot energy: assigned-link tx + compute plus all-UAV propulsion.

    ``assignment[k]`` is the UAV serving user k (exactly one per user),
    ``f_alloc`` is the (K, M) frequency matrix of which only the assigned
    entries are consumed, and ``link_budgets[k]`` describes user k's assigned
    link at the current geometry.
    """
    num_users = world.user_pos.shape[0]
    num_uavs = world.uav_pos.shape[0]
    tx = np.zeros(num_users)
    comp = np.zeros(num_users)
    for k in range(num_users):
        task = world.tasks[k]
        tx[k] = tx_energy(
            scenario.channel.tx_power_w, task.size_bits, link_budgets[k].rate_bps
        )
        comp[k] = compute_energy(
            scenario.compute.switch_capacitance,
            task.size_bits,
            task.cycles_per_bit,
            f_alloc[k, assignment[k]],
        )
    fly = np.array(
        [
            propulsion_energy(
                controls[m].speed_mps,
                scenario.config.slot_duration_s,
                scenario.propulsion,
            )
            for m in range(num_uavs)
        ]
    )
    total = float(tx.sum() + comp.sum() + fly.sum())
    return SlotEnergyReport(
        tx_j=tx,
        compute_j=comp,
        fly_j=fly,
        total_j=total,
        carbon_kg=carbon(total, scenario.carbon),
    )


def write_energy_ledger(path: str, reports: Sequence[SlotEnergyReport]) -> None:
    """CSV export of per-slot component totals and carbon."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("slot,tx_j,compute_j,fly_j,total_j,carbon_kg\n")
        for slot, report in enumerate(reports, start=1):
            handle.write(
                f"{slot},{repr(float(report.tx_j.sum()))},"
                f"{repr(float(report.compute_j.sum()))},"
                f"{repr(float(report.fly_j.sum()))},"
                f"{repr(report.total_j)},{repr(report.carbon_kg)}\n"
            )
