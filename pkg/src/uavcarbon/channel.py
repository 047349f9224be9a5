"""Probabilistic air-ground path loss and uplink rates.

The LoS/NLoS mix is the elevation-angle sigmoid model; the average path loss
is converted from dB to linear before it enters the SNR (the printed formula
divides a linear power by a dB quantity, which cannot be meant literally).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ChannelParams


@dataclass(frozen=True)
class LinkBudget:
    """Everything derived for one user-to-UAV link in one slot."""

    elevation_deg: float
    p_los: float
    fspl_db: float
    avg_path_loss_db: float
    bandwidth_hz: float
    rate_bps: float


def los_probability(uav: np.ndarray, user: np.ndarray, params: ChannelParams) -> float:
    """P(LoS) from the elevation-angle sigmoid."""
    diff = uav - user
    slant = math.sqrt(float(diff @ diff))
    if slant <= 0.0:
        raise ValueError("coincident endpoints")
    # arcsin argument can overshoot 1 by an ulp at nadir
    arg = min(1.0, (uav[2] - user[2]) / slant)
    elevation_deg = math.degrees(math.asin(arg))
    return 1.0 / (1.0 + params.los_a * math.exp(-params.los_b * (elevation_deg - params.los_a)))


def free_space_path_loss(distance_m: float, params: ChannelParams) -> float:
    """Ideal-propagation attenuation in dB."""
    if distance_m <= 0.0:
        raise ValueError("distance must be positive")
    return 20.0 * (
        math.log10(distance_m)
        + math.log10(params.carrier_freq_hz)
        + math.log10(4.0 * math.pi / params.light_speed_mps)
    )


def average_path_loss(uav: np.ndarray, user: np.ndarray, params: ChannelParams) -> float:
    """LoS/NLoS-weighted path loss in dB."""
    diff = uav - user
    slant = math.sqrt(float(diff @ diff))
    p = los_probability(uav, user, params)
    fspl = free_space_path_loss(slant, params)
    return p * (fspl + params.eta_los_db) + (1.0 - p) * (fspl + params.eta_nlos_db)


def uplink_rate(avg_path_loss_db: float, bandwidth_hz: float, params: ChannelParams) -> float:
    """Shannon uplink rate in bits/s for the given budget."""
    if bandwidth_hz < 0.0:
        raise ValueError("bandwidth must be non-negative")
    if bandwidth_hz == 0.0:
        return 0.0
    pl_linear = 10.0 ** (avg_path_loss_db / 10.0)
    snr = params.tx_power_w / (pl_linear * params.noise_power_w)
    return bandwidth_hz * math.log2(1.0 + snr)


def link_budget(
    uav: np.ndarray, user: np.ndarray, bandwidth_hz: float, params: ChannelParams
) -> LinkBudget:
    """Assemble the full budget for one link."""
    diff = uav - user
    slant = math.sqrt(float(diff @ diff))
    if slant <= 0.0:
        raise ValueError("coincident endpoints")
    arg = min(1.0, (uav[2] - user[2]) / slant)
    elevation_deg = math.degrees(math.asin(arg))
    p = 1.0 / (1.0 + params.los_a * math.exp(-params.los_b * (elevation_deg - params.los_a)))
    fspl = free_space_path_loss(slant, params)
    avg_pl = p * (fspl + params.eta_los_db) + (1.0 - p) * (fspl + params.eta_nlos_db)
    return LinkBudget(
        elevation_deg=elevation_deg,
        p_los=p,
        fspl_db=fspl,
        avg_path_loss_db=avg_pl,
        bandwidth_hz=bandwidth_hz,
        rate_bps=uplink_rate(avg_pl, bandwidth_hz, params),
    )


def allocate_bandwidth(assignment: np.ndarray, num_uavs: int, b_max_hz: float) -> np.ndarray:
    """Equal split of each UAV's uplink budget among its assigned users.

    The per-UAV sum equals b_max exactly whenever the UAV serves anyone, so
    the total-bandwidth constraint holds by construction.
    """
    assignment = np.asarray(assignment, dtype=int)
    counts = np.bincount(assignment, minlength=num_uavs)
    return np.array([b_max_hz / counts[m] for m in assignment], dtype=float)
