"""Rule-based baseline policy: hourly battery and trade decisions per farm.

Surplus hours charge the battery toward a 90% target and sell the
remainder; deficit hours buy from the market, optionally discharging the
battery (day/peak, above the 20% reserve threshold) or grid-charging it
(night below 50%, or off-peak at/below the reserve).  Decisions are pure
functions of the farm's own state and the tariff period; the policy never
reacts to market prices beyond the period label.
"""

from __future__ import annotations

from dataclasses import dataclass

from .battery import BatterySpec, BatteryState, usable_energy
from .pricing import TariffPeriod
from .profiles import FarmConfig

# Night-tariff SoC threshold below which grid charging is worthwhile.
NIGHT_CHARGE_BELOW_PCT = 50.0


@dataclass(frozen=True)
class RuleDecision:
    """One farm-hour decision: battery flags plus market quantities (kWh).

    ``charge_kwh``/``discharge_kwh`` carry the battery quantities implied
    by the flags so callers can apply them without re-deriving.
    """

    charge: bool
    discharge: bool
    buy_kwh: float
    sell_kwh: float
    charge_kwh: float = 0.0
    discharge_kwh: float = 0.0

    def __post_init__(self) -> None:
        if self.charge and self.discharge:
            raise ValueError("cannot charge and discharge in the same step")
        if self.buy_kwh > 0 and self.sell_kwh > 0:
            raise ValueError("cannot buy and sell in the same step")
        if min(self.buy_kwh, self.sell_kwh, self.charge_kwh, self.discharge_kwh) < 0:
            raise ValueError("flow quantities must be >= 0")


NO_OP = RuleDecision(charge=False, discharge=False, buy_kwh=0.0, sell_kwh=0.0)


def total_generation(e_pv: float, e_w: float, b_uc: float) -> float:
    """Total available energy: PV plus wind plus usable battery energy."""
    if min(e_pv, e_w, b_uc) < 0:
        raise ValueError(f"generation terms must be >= 0: ({e_pv}, {e_w}, {b_uc})")
    return e_pv + e_w + b_uc


def _buy(kwh: float) -> RuleDecision:
    return RuleDecision(charge=False, discharge=False, buy_kwh=kwh, sell_kwh=0.0)


def _charge_room(state: BatteryState, spec: BatterySpec) -> float:
    room_pct = max(spec.charge_target_pct - state.soc_pct, 0.0)
    return room_pct / 100.0 * spec.total_capacity_kwh


def decide(
    farm: FarmConfig,
    e_pv: float,
    e_w: float,
    load: float,
    battery: BatteryState,
    period: TariffPeriod,
    spec: BatterySpec,
    night_charge_priority: bool = True,
) -> RuleDecision:
    """Evaluate the rule table for one farm-hour.

    Parameters
    ----------
    night_charge_priority : bool
        The night rules overlap for SoC in (reserve, 50): one says buy
        without charging, the other says buy and charge.  True (default)
        lets the charge rule win; False restricts night grid-charging to
        SoC at or below the reserve threshold.

    Every branch balances exactly: load is covered by generation plus
    discharge plus purchase, and any surplus splits into charge plus sale.
    """
    if min(e_pv, e_w, load) < 0:
        raise ValueError("e_pv, e_w, and load must be >= 0")
    gen = e_pv + e_w

    if not farm.has_battery:
        if not farm.has_re:
            return _buy(load) if load > 0 else NO_OP
        if gen > load:
            return RuleDecision(charge=False, discharge=False, buy_kwh=0.0, sell_kwh=gen - load)
        if gen < load:
            return _buy(load - gen)
        return NO_OP

    soc = battery.soc_pct
    surplus = gen - load

    if surplus > 0:
        if soc >= spec.charge_target_pct:
            return RuleDecision(
                charge=False, discharge=False, buy_kwh=0.0, sell_kwh=surplus
            )
        charge = min(spec.max_rate_kwh_per_step, surplus, _charge_room(battery, spec))
        return RuleDecision(
            charge=charge > 0,
            discharge=False,
            buy_kwh=0.0,
            sell_kwh=surplus - charge,
            charge_kwh=charge,
        )

    deficit = load - gen
    if deficit <= 0:
        return NO_OP

    def grid_charge() -> RuleDecision:
        charge = min(spec.max_rate_kwh_per_step, _charge_room(battery, spec))
        return RuleDecision(
            charge=charge > 0,
            discharge=False,
            buy_kwh=deficit + charge,
            sell_kwh=0.0,
            charge_kwh=charge,
        )

    def discharge_then_buy() -> RuleDecision:
        discharge = min(deficit, usable_energy(battery, spec))
        return RuleDecision(
            charge=False,
            discharge=discharge > 0,
            buy_kwh=deficit - discharge,
            sell_kwh=0.0,
            discharge_kwh=discharge,
        )

    if period is TariffPeriod.NIGHT:
        charge_below = (
            NIGHT_CHARGE_BELOW_PCT if night_charge_priority else spec.reserve_pct
        )
        if soc < charge_below or soc <= spec.reserve_pct:
            return grid_charge()
        return _buy(deficit)
    if period is TariffPeriod.DAY:
        if soc <= spec.reserve_pct:
            return grid_charge()
        return discharge_then_buy()
    # peak: never grid-charge; discharge above the reserve threshold
    if soc > spec.reserve_pct:
        return discharge_then_buy()
    return _buy(deficit)
