"""Scenario constants and validation.

Every physical, channel, compute, propulsion, and carbon constant lives here.
Scenario files are flat ``key = value`` text with units spelled out in the key
names, which keeps them diffable and bit-exact under round-trips.  Powers are
accepted either as ``tx_power_dbm`` / ``noise_power_dbm`` (the unit link
budgets are usually quoted in) or as linear ``*_w`` keys; they are stored in
watts, all physics code consumes watts, and the serializer emits watts so
that serialize/parse round-trips are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields


class ScenarioError(ValueError):
    """A scenario file failed to parse or violated an invariant."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    if watt <= 0.0:
        raise ScenarioError("power must be positive to express in dBm")
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Topology and mobility constants."""

    num_uavs: int
    num_users: int
    num_slots: int
    slot_duration_s: float
    area_x_max_m: float
    area_y_max_m: float
    altitude_m: float
    max_speed_mps: float
    min_uav_separation_m: float
    coverage_radius_m: float
    uav_init_positions_m: tuple[tuple[float, float], ...]
    user_cap_per_uav: int


@dataclass(frozen=True)
class ChannelParams:
    """Probabilistic air-ground channel constants (powers stored linear)."""

    los_a: float
    los_b: float
    carrier_freq_hz: float
    light_speed_mps: float
    eta_los_db: float
    eta_nlos_db: float
    max_g2a_bandwidth_hz: float
    tx_power_w: float
    noise_power_w: float


@dataclass(frozen=True)
class ComputeParams:
    """Onboard CPU constants and per-slot task distribution bounds."""

    switch_capacitance: float  # joule * s^2 / cycle^3
    max_cpu_freq_hz: float
    task_size_mb_lo: float
    task_size_mb_hi: float
    task_density_lo: float  # cycles/bit
    task_density_hi: float
    bits_per_mb: float


@dataclass(frozen=True)
class PropulsionParams:
    """Rotary-wing power model constants."""

    blade_power_w: float
    induced_power_w: float
    tip_speed_mps: float
    drag_ratio: float
    air_density_kgm3: float
    rotor_solidity: float
    disk_area_m2: float
    induced_speed_mps: float


@dataclass(frozen=True)
class CarbonParams:
    """Energy-to-carbon conversion constants."""

    kg_per_wh: float
    wh_per_joule: float


@dataclass(frozen=True)
class Scenario:
    """Validated bundle of all parameter groups."""

    config: ScenarioConfig
    channel: ChannelParams
    compute: ComputeParams
    propulsion: PropulsionParams
    carbon: CarbonParams


def default_scenario() -> Scenario:
    """The reference setup: 2 UAVs serving 10 users in a 1000 x 1000 m area."""
    return Scenario(
        config=ScenarioConfig(
            num_uavs=2,
            num_users=10,
            num_slots=100,
            slot_duration_s=1.0,
            area_x_max_m=1000.0,
            area_y_max_m=1000.0,
            altitude_m=100.0,
            max_speed_mps=60.0,
            min_uav_separation_m=10.0,
            coverage_radius_m=100.0,
            uav_init_positions_m=((400.0, 400.0), (600.0, 600.0)),
            user_cap_per_uav=5,
        ),
        channel=ChannelParams(
            los_a=9.61,
            los_b=0.16,
            carrier_freq_hz=2.0e9,
            light_speed_mps=3.0e8,
            eta_los_db=1.0,
            eta_nlos_db=20.0,
            max_g2a_bandwidth_hz=20.0e6,
            tx_power_w=dbm_to_watt(23.0),
            noise_power_w=dbm_to_watt(-100.0),
        ),
        compute=ComputeParams(
            switch_capacitance=1e-27,
            max_cpu_freq_hz=5.0e9,
            task_size_mb_lo=100.0,
            task_size_mb_hi=300.0,
            task_density_lo=100.0,
            task_density_hi=200.0,
            bits_per_mb=8.0e6,
        ),
        propulsion=PropulsionParams(
            blade_power_w=79.8563,
            induced_power_w=88.6279,
            tip_speed_mps=120.0,
            drag_ratio=0.6,
            air_density_kgm3=1.225,
            rotor_solidity=0.05,
            disk_area_m2=0.503,
            induced_speed_mps=4.03,
        ),
        carbon=CarbonParams(kg_per_wh=3.773e-4, wh_per_joule=1.0 / 3600.0),
    )


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def validate_scenario(sc: Scenario) -> Scenario:
    """Check every invariant; returns the bundle for chaining."""
    c = sc.config
    _require(c.num_uavs >= 1, "num_uavs must be >= 1")
    _require(c.num_users >= 1, "num_users must be >= 1")
    _require(c.num_slots >= 1, "num_slots must be >= 1")
    _require(c.slot_duration_s > 0, "slot_duration_s must be > 0")
    _require(c.area_x_max_m > 0, "area_x_max_m must be > 0")
    _require(c.area_y_max_m > 0, "area_y_max_m must be > 0")
    _require(c.altitude_m > 0, "altitude_m must be > 0")
    _require(c.max_speed_mps > 0, "max_speed_mps must be > 0")
    _require(c.min_uav_separation_m > 0, "min_uav_separation_m must be > 0")
    _require(c.coverage_radius_m > 0, "coverage_radius_m must be > 0")
    _require(c.user_cap_per_uav >= 1, "user_cap_per_uav must be >= 1")
    _require(
        len(c.uav_init_positions_m) == c.num_uavs,
        "uav_init_positions_m must list one (x, y) per UAV",
    )
    for i, (x, y) in enumerate(c.uav_init_positions_m):
        _require(
            0.0 <= x <= c.area_x_max_m and 0.0 <= y <= c.area_y_max_m,
            f"uav_init_positions_m[{i}] lies outside the area",
        )
    for i in range(c.num_uavs):
        for j in range(i + 1, c.num_uavs):
            xi, yi = c.uav_init_positions_m[i]
            xj, yj = c.uav_init_positions_m[j]
            d = math.hypot(xi - xj, yi - yj)
            _require(
                d >= c.min_uav_separation_m,
                f"uav_init_positions_m[{i}] and [{j}] closer than min_uav_separation_m",
            )

    ch = sc.channel
    _require(ch.los_a > 0, "los_a must be > 0")
    _require(ch.los_b > 0, "los_b must be > 0")
    _require(ch.carrier_freq_hz > 0, "carrier_freq_hz must be > 0")
    _require(ch.light_speed_mps > 0, "light_speed_mps must be > 0")
    _require(ch.max_g2a_bandwidth_hz > 0, "max_g2a_bandwidth_hz must be > 0")
    _require(ch.tx_power_w > 0, "tx_power_w must be > 0")
    _require(ch.noise_power_w > 0, "noise_power_w must be > 0")
    _require(
        ch.eta_nlos_db >= ch.eta_los_db >= 0.0,
        "excess path loss must satisfy eta_nlos_db >= eta_los_db >= 0",
    )

    cp = sc.compute
    _require(cp.switch_capacitance > 0, "switch_capacitance must be > 0")
    _require(cp.max_cpu_freq_hz > 0, "max_cpu_freq_hz must be > 0")
    _require(
        0 < cp.task_size_mb_lo <= cp.task_size_mb_hi,
        "task size bounds must satisfy 0 < lo <= hi",
    )
    _require(
        0 < cp.task_density_lo <= cp.task_density_hi,
        "task density bounds must satisfy 0 < lo <= hi",
    )
    _require(cp.bits_per_mb > 0, "bits_per_mb must be > 0")

    for f in fields(PropulsionParams):
        _require(
            getattr(sc.propulsion, f.name) > 0, f"{f.name} must be > 0"
        )

    _require(sc.carbon.kg_per_wh > 0, "kg_per_wh must be > 0")
    _require(sc.carbon.wh_per_joule > 0, "wh_per_joule must be > 0")
    return sc


# File keys follow the dataclass field names except for the two powers, which
# are written in dBm, and the UAV start list.
_INT_KEYS = {
    "num_uavs",
    "num_users",
    "num_slots",
    "user_cap_per_uav",
}
_SECTIONS = (
    ("config", ScenarioConfig),
    ("channel", ChannelParams),
    ("compute", ComputeParams),
    ("propulsion", PropulsionParams),
    ("carbon", CarbonParams),
)


def serialize_scenario(sc: Scenario) -> str:
    lines = []
    for section, cls in _SECTIONS:
        group = getattr(sc, section)
        for f in fields(cls):
            value = getattr(group, f.name)
            if f.name == "uav_init_positions_m":
                text = "; ".join(f"{repr(x)}, {repr(y)}" for x, y in value)
            else:
                text = repr(value)
            lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> Scenario:
    """Parse the flat key/value format and validate the result."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in raw:
            raise ScenarioError(f"line {lineno}: duplicate key '{key}'")
        raw[key] = value.strip()

    def take(key: str) -> str:
        try:
            return raw.pop(key)
        except KeyError:
            raise ScenarioError(f"missing key '{key}'") from None

    def number(key: str) -> float:
        value = take(key)
        try:
            return float(value)
        except ValueError:
            raise ScenarioError(f"key '{key}': not a number: {value!r}") from None

    def integer(key: str) -> int:
        value = take(key)
        try:
            return int(value)
        except ValueError:
            raise ScenarioError(f"key '{key}': not an integer: {value!r}") from None

    def positions(key: str) -> tuple[tuple[float, float], ...]:
        value = take(key)
        out = []
        for part in value.split(";"):
            part = part.strip()
            if not part:
                continue
            coords = [p.strip() for p in part.split(",")]
            if len(coords) != 2:
                raise ScenarioError(f"key '{key}': expected 'x, y' pairs")
            try:
                out.append((float(coords[0]), float(coords[1])))
            except ValueError:
                raise ScenarioError(f"key '{key}': not a number in {part!r}") from None
        return tuple(out)

    def power(key_w: str) -> float:
        # accepted in dBm (Table-style) or directly in watts; stored in watts
        key_dbm = key_w[:-2] + "_dbm"
        if key_dbm in raw and key_w in raw:
            raise ScenarioError(f"give '{key_dbm}' or '{key_w}', not both")
        if key_dbm in raw:
            return dbm_to_watt(number(key_dbm))
        return number(key_w)

    groups: dict[str, object] = {}
    for section, cls in _SECTIONS:
        kwargs = {}
        for f in fields(cls):
            if f.name == "uav_init_positions_m":
                kwargs[f.name] = positions(f.name)
            elif f.name in ("tx_power_w", "noise_power_w"):
                kwargs[f.name] = power(f.name)
            elif f.name in _INT_KEYS:
                kwargs[f.name] = integer(f.name)
            else:
                kwargs[f.name] = number(f.name)
        groups[section] = cls(**kwargs)
    if raw:
        raise ScenarioError(f"unknown keys: {', '.join(sorted(raw))}")
    return validate_scenario(Scenario(**groups))


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario(text)


def save_scenario(sc: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_scenario(sc))
