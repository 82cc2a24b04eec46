"""Per-agent hourly load and PV profiles plus static fleet configuration.

Profiles are kWh per hourly step; at a one-hour resolution kW and kWh are
numerically interchangeable.  Scenarios can be synthesized (seeded, with
twice-daily milking peaks and a daylight PV bell) or loaded from a TOML
config referencing CSV profile files.
"""

from __future__ import annotations

import csv
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .battery import BatterySpec
from .pricing import TariffSchedule

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

HOURS_PER_DAY = 24


class ScenarioError(ValueError):
    """Raised for invalid scenario configs or profile data."""


@dataclass(frozen=True)
class FarmConfig:
    """Static per-agent parameters: herd size, PV rating, equipment flags."""

    agent_id: int
    herd_size: int
    pv_capacity_kw: float
    has_battery: bool = True
    has_re: bool = True
    battery: BatterySpec = field(default_factory=BatterySpec)

    def __post_init__(self) -> None:
        if self.herd_size <= 0:
            raise ScenarioError(f"agent {self.agent_id}: herd_size must be > 0")
        if self.pv_capacity_kw < 0:
            raise ScenarioError(f"agent {self.agent_id}: pv_capacity_kw must be >= 0")


@dataclass(frozen=True)
class TimeSeries:
    """Hourly energy values (kWh), whole days only, no gaps, no negatives."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1:
            raise ScenarioError(f"series must be 1-D, got shape {arr.shape}")
        if len(arr) == 0 or len(arr) % HOURS_PER_DAY != 0:
            raise ScenarioError(
                f"series length must be a positive multiple of 24, got {len(arr)}"
            )
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ScenarioError(f"non-finite value at row {bad + 1}")
        if np.any(arr < 0):
            bad = int(np.flatnonzero(arr < 0)[0])
            raise ScenarioError(f"negative value {arr[bad]} at row {bad + 1}")

    def __len__(self) -> int:
        return len(self.values)


# Default fleet pattern: herd sizes paired with PV ratings, repeated as
# needed for larger communities.
_DEFAULT_HERDS = (30, 30, 40, 40, 50, 50, 60, 60, 70, 70)
_DEFAULT_PV_KW = (10.0, 10.0, 10.0, 10.0, 20.0, 20.0, 20.0, 20.0, 20.0, 20.0)


def default_fleet(n_agents: int) -> tuple[FarmConfig, ...]:
    """Build a fleet of ``n_agents`` prosumers from the default herd/PV table."""
    if n_agents < 1:
        raise ScenarioError(f"n_agents must be >= 1, got {n_agents}")
    return tuple(
        FarmConfig(
            agent_id=i + 1,
            herd_size=_DEFAULT_HERDS[i % len(_DEFAULT_HERDS)],
            pv_capacity_kw=_DEFAULT_PV_KW[i % len(_DEFAULT_PV_KW)],
        )
        for i in range(n_agents)
    )


@dataclass(frozen=True)
class Scenario:
    """A fleet plus matching hourly load and generation series."""

    fleet: tuple[FarmConfig, ...]
    loads: dict[int, TimeSeries]
    generation: dict[int, TimeSeries]
    horizon_hours: int
    rng_seed: int
    tariff: TariffSchedule = field(default_factory=TariffSchedule)

    def __post_init__(self) -> None:
        ids = [f.agent_id for f in self.fleet]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ScenarioError(f"duplicate agent_id(s): {dupes}")
        if self.horizon_hours <= 0 or self.horizon_hours % HOURS_PER_DAY != 0:
            raise ScenarioError(
                f"horizon_hours must be a positive multiple of 24, got {self.horizon_hours}"
            )
        for farm in self.fleet:
            for name, table in (("load", self.loads), ("generation", self.generation)):
                if farm.agent_id not in table:
                    raise ScenarioError(f"agent {farm.agent_id} has no {name} series")
                if len(table[farm.agent_id]) != self.horizon_hours:
                    raise ScenarioError(
                        f"agent {farm.agent_id} {name} series has "
                        f"{len(table[farm.agent_id])} rows, expected {self.horizon_hours}"
                    )

    @property
    def agent_ids(self) -> tuple[int, ...]:
        return tuple(f.agent_id for f in self.fleet)

    def farm(self, agent_id: int) -> FarmConfig:
        for f in self.fleet:
            if f.agent_id == agent_id:
                return f
        raise KeyError(agent_id)

    def without_batteries(self) -> "Scenario":
        """Copy of the scenario with every battery removed (baseline runs)."""
        fleet = tuple(replace(f, has_battery=False) for f in self.fleet)
        return replace(self, fleet=fleet)


@dataclass(frozen=True)
class ShapeParams:
    """Knobs for the synthetic profile generator.

    The load is a herd-scaled base with morning (06:00-09:00) and evening
    (16:00-19:00) milking bumps plus seeded noise, floored at ``min_load_kwh``.
    PV is a clipped half-sine over the daylight window with a seasonal
    factor, scaled to the farm's PV rating; the load is then rescaled so the
    annual PV/load energy ratio lands on a per-agent target drawn from
    ``pv_load_ratio_range``.
    """

    base_load_kwh: float = 2.0
    morning_peak_kwh: float = 3.0
    evening_peak_kwh: float = 4.0
    morning_center: float = 7.5
    evening_center: float = 18.0
    bump_width_hours: float = 1.1
    noise_sd: float = 0.15
    min_load_kwh: float = 0.1
    daylight: tuple[int, int] = (7, 19)
    seasonal_min: float = 0.35
    summer_peak_day: int = 172
    pv_load_ratio_range: tuple[float, float] = (0.40, 0.50)

    def __post_init__(self) -> None:
        lo, hi = self.pv_load_ratio_range
        if not 0 < lo <= hi:
            raise ScenarioError(f"bad pv_load_ratio_range {self.pv_load_ratio_range}")
        if self.min_load_kwh < 0:
            raise ScenarioError("min_load_kwh must be >= 0")


def _pv_series(days: int, capacity_kw: float, shape: ShapeParams) -> np.ndarray:
    hours = np.arange(days * HOURS_PER_DAY)
    hod = hours % HOURS_PER_DAY
    day = hours // HOURS_PER_DAY
    start, end = shape.daylight
    bell = np.sin(np.pi * (hod - start) / (end - start))
    bell = np.where((hod >= start) & (hod < end), np.clip(bell, 0.0, None), 0.0)
    seasonal = shape.seasonal_min + (1.0 - shape.seasonal_min) * 0.5 * (
        1.0 + np.cos(2.0 * np.pi * (day - shape.summer_peak_day) / 365.0)
    )
    return capacity_kw * bell * seasonal


def _load_series(
    days: int, herd_size: int, shape: ShapeParams, rng: np.random.Generator
) -> np.ndarray:
    hours = np.arange(days * HOURS_PER_DAY)
    hod = hours % HOURS_PER_DAY
    herd_scale = herd_size / 30.0
    # mild per-agent jitter so community members do not move in lockstep
    m_scale = rng.uniform(0.85, 1.15)
    e_scale = rng.uniform(0.85, 1.15)
    width = shape.bump_width_hours
    base = shape.base_load_kwh
    morning = shape.morning_peak_kwh * m_scale * np.exp(
        -0.5 * ((hod - shape.morning_center) / width) ** 2
    )
    evening = shape.evening_peak_kwh * e_scale * np.exp(
        -0.5 * ((hod - shape.evening_center) / width) ** 2
    )
    load = herd_scale * (base + morning + evening)
    load = load * rng.normal(1.0, shape.noise_sd, size=len(load)).clip(0.2, None)
    return np.clip(load, shape.min_load_kwh, None)


def synthesize_scenario(
    n_agents: int,
    days: int,
    seed: int,
    shape: Optional[ShapeParams] = None,
    fleet: Optional[Sequence[FarmConfig]] = None,
    tariff: Optional[TariffSchedule] = None,
) -> Scenario:
    """Generate a deterministic synthetic scenario.

    Parameters
    ----------
    n_agents, days : int
        Community size and horizon; both must be >= 1.
    seed : int
        RNG seed; identical arguments reproduce identical scenarios.
    shape : ShapeParams, optional
        Profile-shape knobs; defaults give dairy-style double-peaked loads
        with an annual PV/load energy ratio in the 0.40-0.50 band.
    fleet : sequence of FarmConfig, optional
        Explicit fleet; defaults to :func:`default_fleet`.
    """
    if n_agents < 1:
        raise ScenarioError(f"n_agents must be >= 1, got {n_agents}")
    if days < 1:
        raise ScenarioError(f"days must be >= 1, got {days}")
    shape = shape or ShapeParams()
    farms = tuple(fleet) if fleet is not None else default_fleet(n_agents)
    if len(farms) != n_agents:
        raise ScenarioError(f"fleet has {len(farms)} entries for n_agents={n_agents}")
    rng = np.random.default_rng(seed)
    lo, hi = shape.pv_load_ratio_range

    loads: dict[int, TimeSeries] = {}
    gens: dict[int, TimeSeries] = {}
    for farm in farms:
        ratio_target = rng.uniform(lo, hi)
        load = _load_series(days, farm.herd_size, shape, rng)
        pv_cap = farm.pv_capacity_kw if farm.has_re else 0.0
        pv = _pv_series(days, pv_cap, shape)
        if pv_cap > 0 and pv.sum() > 0:
            # pin the PV/load energy ratio to the drawn target
            load = load * (pv.sum() / ratio_target / load.sum())
            load = np.clip(load, shape.min_load_kwh, None)
        loads[farm.agent_id] = TimeSeries(load)
        gens[farm.agent_id] = TimeSeries(pv)

    return Scenario(
        fleet=farms,
        loads=loads,
        generation=gens,
        horizon_hours=days * HOURS_PER_DAY,
        rng_seed=seed,
        tariff=tariff or TariffSchedule(),
    )


# ----------------------------------------------------------------------
# Scenario config I/O
# ----------------------------------------------------------------------

_CONFIG_NAME = "scenario.toml"


def _read_profile_csv(
    path: Path, agent_ids: Sequence[int], kind: str
) -> dict[int, list[float]]:
    if not path.exists():
        raise ScenarioError(f"{kind} profile file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ScenarioError(f"{path.name}: empty file") from None
        expected = ["hour"] + [f"agent_{i}" for i in agent_ids]
        if header != expected:
            raise ScenarioError(
                f"{path.name}: header {header!r} does not match fleet, expected {expected!r}"
            )
        columns: dict[int, list[float]] = {i: [] for i in agent_ids}
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(expected):
                raise ScenarioError(
                    f"{path.name}: row {row_no} has {len(row)} fields, expected {len(expected)}"
                )
            for agent_id, cell in zip(agent_ids, row[1:]):
                if cell.strip() == "":
                    raise ScenarioError(
                        f"{path.name}: missing value at row {row_no}, column agent_{agent_id}"
                    )
                try:
                    value = float(cell)
                except ValueError:
                    raise ScenarioError(
                        f"{path.name}: non-numeric value {cell!r} at row {row_no}, "
                        f"column agent_{agent_id}"
                    ) from None
                if not math.isfinite(value) or value < 0:
                    raise ScenarioError(
                        f"{path.name}: negative or non-finite value {value} at "
                        f"row {row_no}, column agent_{agent_id}"
                    )
                columns[agent_id].append(value)
    return columns


def _battery_from_table(table: dict) -> BatterySpec:
    kwargs = {}
    mapping = {
        "total_capacity_kwh": "total_capacity_kwh",
        "max_rate_kwh_per_step": "max_rate_kwh_per_step",
        "soc_floor_pct": "soc_floor_pct",
        "soc_ceiling_pct": "soc_ceiling_pct",
        "charge_target_pct": "charge_target_pct",
        "reserve_pct": "reserve_pct",
    }
    for key, attr in mapping.items():
        if key in table:
            kwargs[attr] = float(table[key])
    return BatterySpec(**kwargs)


def _tariff_from_table(table: dict) -> TariffSchedule:
    kwargs: dict = {}
    for key in ("peak_price", "day_price", "night_price", "fit_price"):
        if key in table:
            kwargs[key] = float(table[key])
    if "peak_hours" in table:
        kwargs["peak_hours"] = tuple(int(h) for h in table["peak_hours"])
    if "night_windows" in table:
        kwargs["night_windows"] = tuple(
            tuple(int(h) for h in w) for w in table["night_windows"]
        )
    if "near_peak_hours" in table:
        kwargs["near_peak_hours"] = tuple(int(h) for h in table["near_peak_hours"])
    return TariffSchedule(**kwargs)


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario from a TOML config (or its directory).

    The config names the fleet and two CSV profile files; see the repo
    README for the exact schema.  Raises :class:`ScenarioError` with
    row/column context on any invalid input.
    """
    path = Path(path)
    if path.is_dir():
        path = path / _CONFIG_NAME
    if not path.exists():
        raise ScenarioError(f"scenario config not found: {path}")
    with path.open("rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioError(f"{path.name}: invalid TOML: {exc}") from None

    try:
        meta = doc["scenario"]
        horizon = int(meta["horizon_hours"])
        seed = int(meta.get("rng_seed", 0))
        loads_csv = meta["loads_csv"]
        generation_csv = meta["generation_csv"]
        farm_tables = doc["farm"]
    except KeyError as exc:
        raise ScenarioError(f"{path.name}: missing required key {exc}") from None

    fleet = []
    for table in farm_tables:
        try:
            battery = _battery_from_table(table.get("battery", {}))
            fleet.append(
                FarmConfig(
                    agent_id=int(table["agent_id"]),
                    herd_size=int(table["herd_size"]),
                    pv_capacity_kw=float(table["pv_capacity_kw"]),
                    has_battery=bool(table.get("has_battery", True)),
                    has_re=bool(table.get("has_re", True)),
                    battery=battery,
                )
            )
        except KeyError as exc:
            raise ScenarioError(f"{path.name}: farm entry missing key {exc}") from None
    ids = [f.agent_id for f in fleet]
    if len(ids) != len(set(ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ScenarioError(f"{path.name}: duplicate agent_id(s): {dupes}")

    base = path.parent
    load_cols = _read_profile_csv(base / loads_csv, ids, "load")
    gen_cols = _read_profile_csv(base / generation_csv, ids, "generation")

    def build(cols: dict[int, list[float]], name: str) -> dict[int, TimeSeries]:
        out = {}
        for agent_id, values in cols.items():
            if len(values) != horizon:
                raise ScenarioError(
                    f"agent {agent_id} {name} series has {len(values)} rows, "
                    f"expected horizon_hours={horizon}"
                )
            out[agent_id] = TimeSeries(np.asarray(values))
        return out

    tariff = _tariff_from_table(doc.get("tariff", {}))
    return Scenario(
        fleet=tuple(fleet),
        loads=build(load_cols, "load"),
        generation=build(gen_cols, "generation"),
        horizon_hours=horizon,
        rng_seed=seed,
        tariff=tariff,
    )


def _format_float(x: float) -> str:
    return repr(float(x))


def _write_profile_csv(path: Path, series: dict[int, TimeSeries], agent_ids: Sequence[int]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour"] + [f"agent_{i}" for i in agent_ids])
        horizon = len(series[agent_ids[0]])
        for hour in range(horizon):
            writer.writerow(
                [hour] + [_format_float(series[i].values[hour]) for i in agent_ids]
            )


def write_scenario(scenario: Scenario, out_dir: str | Path) -> Path:
    """Write a scenario as scenario.toml plus loads.csv and generation.csv.

    Values are serialized with full float precision, so a load/write
    round-trip reproduces identical series.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = scenario.agent_ids

    lines = [
        "[scenario]",
        f"horizon_hours = {scenario.horizon_hours}",
        f"rng_seed = {scenario.rng_seed}",
        'loads_csv = "loads.csv"',
        'generation_csv = "generation.csv"',
        "",
        "[tariff]",
        f"peak_price = {_format_float(scenario.tariff.peak_price)}",
        f"day_price = {_format_float(scenario.tariff.day_price)}",
        f"night_price = {_format_float(scenario.tariff.night_price)}",
        f"fit_price = {_format_float(scenario.tariff.fit_price)}",
        f"peak_hours = [{scenario.tariff.peak_hours[0]}, {scenario.tariff.peak_hours[1]}]",
        "night_windows = ["
        + ", ".join(f"[{a}, {b}]" for a, b in scenario.tariff.night_windows)
        + "]",
        f"near_peak_hours = [{scenario.tariff.near_peak_hours[0]}, "
        f"{scenario.tariff.near_peak_hours[1]}]",
        "",
    ]
    for farm in scenario.fleet:
        lines += [
            "[[farm]]",
            f"agent_id = {farm.agent_id}",
            f"herd_size = {farm.herd_size}",
            f"pv_capacity_kw = {_format_float(farm.pv_capacity_kw)}",
            f"has_battery = {str(farm.has_battery).lower()}",
            f"has_re = {str(farm.has_re).lower()}",
        ]
        if farm.battery != BatterySpec():
            b = farm.battery
            lines += [
                "[farm.battery]",
                f"total_capacity_kwh = {_format_float(b.total_capacity_kwh)}",
                f"max_rate_kwh_per_step = {_format_float(b.max_rate_kwh_per_step)}",
                f"soc_floor_pct = {_format_float(b.soc_floor_pct)}",
                f"soc_ceiling_pct = {_format_float(b.soc_ceiling_pct)}",
                f"charge_target_pct = {_format_float(b.charge_target_pct)}",
                f"reserve_pct = {_format_float(b.reserve_pct)}",
            ]
        lines.append("")
    (out / _CONFIG_NAME).write_text("\n".join(lines))

    _write_profile_csv(out / "loads.csv", scenario.loads, ids)
    _write_profile_csv(out / "generation.csv", scenario.generation, ids)
    return out / _CONFIG_NAME
