"""Battery state and charge/discharge arithmetic shared by all policies.

State of charge is tracked as a percentage of usable capacity.  The model
is lossless with a symmetric per-step rate cap; capacity defaults match a
residential wall battery (13.5 kWh usable, 5 kW continuous).
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class BatterySpec:
    """Static battery parameters.

    ``charge_target_pct`` and ``reserve_pct`` are thresholds used by the
    rule-based policy only; the physical bounds are ``soc_floor_pct`` and
    ``soc_ceiling_pct``.
    """

    total_capacity_kwh: float = 13.5
    max_rate_kwh_per_step: float = 5.0
    soc_floor_pct: float = 0.0
    soc_ceiling_pct: float = 100.0
    charge_target_pct: float = 90.0
    reserve_pct: float = 20.0

    def __post_init__(self) -> None:
        if self.total_capacity_kwh <= 0:
            raise ValueError(f"capacity must be > 0, got {self.total_capacity_kwh}")
        if self.max_rate_kwh_per_step <= 0:
            raise ValueError(f"max rate must be > 0, got {self.max_rate_kwh_per_step}")
        if not 0 <= self.soc_floor_pct < self.soc_ceiling_pct <= 100:
            raise ValueError(
                f"need 0 <= floor < ceiling <= 100, got "
                f"floor={self.soc_floor_pct}, ceiling={self.soc_ceiling_pct}"
            )


DEFAULT_BATTERY = BatterySpec()


@dataclass(frozen=True)
class BatteryState:
    """State of charge in percent of total capacity."""

    soc_pct: float = 100.0


def stored_energy(state: BatteryState, spec: BatterySpec = DEFAULT_BATTERY) -> float:
    """Energy currently held (kWh)."""
    return state.soc_pct / 100.0 * spec.total_capacity_kwh


def usable_energy(state: BatteryState, spec: BatterySpec = DEFAULT_BATTERY) -> float:
    """Energy deliverable this step (kWh): stored energy capped at the
    per-step discharge rate."""
    return min(stored_energy(state, spec), spec.max_rate_kwh_per_step)


def apply_charge(
    state: BatteryState, energy_kwh: float, spec: BatterySpec = DEFAULT_BATTERY
) -> tuple[BatteryState, float]:
    """Charge the battery with up to ``energy_kwh``.

    Returns ``(new_state, accepted_kwh)`` where the accepted energy is
    limited by the per-step rate and by headroom to the SoC ceiling.
    """
    if energy_kwh < 0:
        raise ValueError(f"charge energy must be >= 0, got {energy_kwh}")
    headroom_kwh = (spec.soc_ceiling_pct - state.soc_pct) / 100.0 * spec.total_capacity_kwh
    accepted = min(energy_kwh, spec.max_rate_kwh_per_step, max(headroom_kwh, 0.0))
    new_soc = state.soc_pct + accepted * 100.0 / spec.total_capacity_kwh
    new_soc = min(max(new_soc, spec.soc_floor_pct), spec.soc_ceiling_pct)
    return replace(state, soc_pct=new_soc), accepted


def apply_discharge(
    state: BatteryState, energy_kwh: float, spec: BatterySpec = DEFAULT_BATTERY
) -> tuple[BatteryState, float]:
    """Discharge up to ``energy_kwh`` from the battery.

    Returns ``(new_state, delivered_kwh)`` with delivery limited by
    :func:`usable_energy` (stored energy and the rate cap).
    """
    if energy_kwh < 0:
        raise ValueError(f"discharge energy must be >= 0, got {energy_kwh}")
    floor_kwh = spec.soc_floor_pct / 100.0 * spec.total_capacity_kwh
    available = max(min(stored_energy(state, spec) - floor_kwh, spec.max_rate_kwh_per_step), 0.0)
    delivered = min(energy_kwh, available)
    new_soc = state.soc_pct - delivered * 100.0 / spec.total_capacity_kwh
    new_soc = min(max(new_soc, spec.soc_floor_pct), spec.soc_ceiling_pct)
    return replace(state, soc_pct=new_soc), delivered
