"""Multi-agent trading environment: 6-dim observations, 8 discrete actions.

Each agent observes (load, generation, SoC, hour, ISP, IBP) and picks one
of eight actions combining battery moves with market moves.  Rewards are
binary: 1 when the action's guard condition holds, 0 otherwise.  Actions
whose guards fail produce no state change and no flows, except that a
guard-failed charge-and-buy still buys the bare deficit.

Quoted prices in observations lag one hour: the hour-t observation carries
the advisor quote computed from hour t-1 flows, breaking the simultaneity
between acting and pricing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional

from .battery import BatterySpec, BatteryState, apply_charge, apply_discharge
from .pricing import (
    GridTag,
    PriceQuote,
    TariffPeriod,
    TariffSchedule,
    compute_sdr,
    grid_tag,
    internal_prices,
    passthrough_quote,
    tariff_period,
)
from .profiles import Scenario

# Tolerance (kWh) for "generation matches load" in the self-use rules.
SELF_USE_TOLERANCE_KWH = 0.1


class Action(IntEnum):
    """Discrete agent actions with stable wire codes."""

    CHARGE_AND_BUY = 0
    BUY = 1
    SELL = 2
    DISCHARGE_AND_SELL = 3
    DISCHARGE_AND_BUY = 4
    SELF_USE = 5
    SELF_AND_CHARGE = 6
    SELF_AND_DISCHARGE = 7


@dataclass(frozen=True)
class Observation:
    load_kwh: float
    generation_kwh: float
    soc_pct: float
    hour: int
    isp: float
    ibp: float

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (
            self.load_kwh,
            self.generation_kwh,
            self.soc_pct,
            float(self.hour),
            self.isp,
            self.ibp,
        )


@dataclass(frozen=True)
class StepOutcome:
    """Per-agent result of one transition: reward, flows, new SoC, period."""

    reward: int
    buy_kwh: float
    sell_kwh: float
    new_soc_pct: float
    period: TariffPeriod


def reward(
    obs: Observation,
    action: Action,
    spec: BatterySpec,
    schedule: Optional[TariffSchedule] = None,
    priming_on: bool = True,
) -> int:
    """Binary reward: 1 iff the action's guard condition holds.

    The near-peak tag counts alongside night for the charge-and-buy rule,
    which is what primes batteries ahead of the evening peak.
    """
    schedule = schedule or TariffSchedule()
    g = obs.generation_kwh
    l = obs.load_kwh
    soc = obs.soc_pct
    tag = _tag(obs.hour, schedule, priming_on)
    rate = spec.max_rate_kwh_per_step
    tol = SELF_USE_TOLERANCE_KWH

    if action is Action.CHARGE_AND_BUY:
        return int((soc <= 50 and g < l) or (soc <= 50 and tag in (GridTag.NIGHT, GridTag.NEAR_PEAK)))
    if action is Action.BUY:
        return int(g < l and soc < 10 and tag is not GridTag.NIGHT)
    if action is Action.SELL:
        return int(g > l and (soc >= 90 or (soc >= 20 and tag is GridTag.PEAK)))
    if action is Action.DISCHARGE_AND_SELL:
        excess = (g - l) + min(rate, soc * spec.total_capacity_kwh / 100.0)
        return int(
            g > l
            and (
                (soc >= 20 and tag is GridTag.PEAK)
                or (soc >= 90 and tag is not GridTag.PEAK)
            )
            and excess > 0
        )
    if action is Action.DISCHARGE_AND_BUY:
        return int(g < l and soc >= 10 and min(rate, l - g) > 0)
    if action is Action.SELF_USE:
        return int(abs(g - l) <= tol)
    if action is Action.SELF_AND_CHARGE:
        return int(min(rate, g - l) > 0 and g > l and soc <= 80 and tag is not GridTag.PEAK)
    if action is Action.SELF_AND_DISCHARGE:
        discharge = min(rate, l - g, soc * spec.total_capacity_kwh / 100.0)
        return int(g < l and soc >= 20 and abs(discharge - (l - g)) <= tol)
    raise ValueError(f"unknown action {action!r}")


def _tag(hour: int, schedule: TariffSchedule, priming_on: bool) -> GridTag:
    return grid_tag(hour, schedule, priming_on)


def transition(
    obs: Observation,
    action: Action,
    spec: BatterySpec,
    schedule: Optional[TariffSchedule] = None,
    priming_on: bool = True,
) -> StepOutcome:
    """Apply one action: returns flows, the new SoC, and the reward.

    Total over all (observation, action) pairs; guard-failed actions are
    no-ops apart from the charge-and-buy fallback purchase of the bare
    deficit.
    """
    schedule = schedule or TariffSchedule()
    g = obs.generation_kwh
    l = obs.load_kwh
    tag = _tag(obs.hour, schedule, priming_on)
    state = BatteryState(soc_pct=obs.soc_pct)
    rate = spec.max_rate_kwh_per_step
    buy = 0.0
    sell = 0.0

    if action is Action.CHARGE_AND_BUY:
        if (obs.soc_pct <= 50 and g < l) or (
            obs.soc_pct <= 50 and tag in (GridTag.NIGHT, GridTag.NEAR_PEAK)
        ):
            # the purchased charge block goes into the battery
            state, _ = apply_charge(state, rate, spec)
            buy = max(l - g, 0.0) + rate
        else:
            buy = max(l - g, 0.0)
    elif action is Action.BUY:
        if g < l and obs.soc_pct < 10 and tag is not GridTag.NIGHT:
            buy = l - g
    elif action is Action.SELL:
        if g > l and (obs.soc_pct >= 90 or (obs.soc_pct >= 20 and tag is GridTag.PEAK)):
            sell = g - l
    elif action is Action.DISCHARGE_AND_SELL:
        if g >= l and (
            (obs.soc_pct >= 20 and tag is GridTag.PEAK)
            or (obs.soc_pct >= 90 and tag is not GridTag.PEAK)
        ):
            state, delivered = apply_discharge(state, rate, spec)
            sell = (g - l) + delivered
    elif action is Action.DISCHARGE_AND_BUY:
        if g < l and obs.soc_pct >= 10:
            deficit = l - g
            state, delivered = apply_discharge(state, min(rate, deficit), spec)
            buy = deficit - delivered
    elif action is Action.SELF_USE:
        pass
    elif action is Action.SELF_AND_CHARGE:
        if g > l and obs.soc_pct <= 80 and tag is not GridTag.PEAK:
            state, _ = apply_charge(state, g - l, spec)
    elif action is Action.SELF_AND_DISCHARGE:
        if g < l and obs.soc_pct >= 20:
            need = l - g
            state, delivered = apply_discharge(state, min(rate, need), spec)
            buy = max(need - delivered, 0.0)
    else:
        raise ValueError(f"unknown action {action!r}")

    return StepOutcome(
        reward=reward(obs, action, spec, schedule, priming_on),
        buy_kwh=buy,
        sell_kwh=sell,
        new_soc_pct=state.soc_pct,
        period=tariff_period(obs.hour, schedule),
    )


class TradingEnv:
    """Shared environment stepping all agents through a scenario hour by hour.

    One policy is typically applied across agents; the env itself only
    exposes per-agent observations and outcomes.  The advisor quote for the
    next observation is computed from this hour's aggregate flows (or passed
    through from grid prices when the advisor is disabled).
    """

    def __init__(
        self,
        scenario: Scenario,
        advisor_on: bool = True,
        priming_on: bool = True,
        initial_soc_pct: float = 100.0,
    ):
        for farm in scenario.fleet:
            if not farm.has_battery:
                raise ValueError(
                    f"agent {farm.agent_id} has no battery; RL policies require one"
                )
        self.scenario = scenario
        self.schedule = scenario.tariff
        self.advisor_on = advisor_on
        self.priming_on = priming_on
        self.initial_soc_pct = initial_soc_pct
        self._soc: dict[int, float] = {}
        self._t = 0
        self._quote: PriceQuote = passthrough_quote(0, self.schedule)

    @property
    def horizon(self) -> int:
        return self.scenario.horizon_hours

    @property
    def t(self) -> int:
        return self._t

    @property
    def last_quote(self) -> PriceQuote:
        """Quote computed from the most recent step's flows."""
        return self._quote

    def _observe(self, agent_id: int) -> Observation:
        return self._observe_at(agent_id, self._t)

    def reset(self) -> dict[int, Observation]:
        """Start a new episode: full batteries, hour 0, pass-through quote."""
        self._t = 0
        self._quote = passthrough_quote(0, self.schedule)
        self._soc = {a: self.initial_soc_pct for a in self.scenario.agent_ids}
        return {a: self._observe(a) for a in self.scenario.agent_ids}

    def step(
        self, actions: dict[int, Action]
    ) -> tuple[dict[int, StepOutcome], dict[int, Observation], bool]:
        """Advance one hour with the given joint actions.

        Returns per-agent outcomes, next observations, and a done flag for
        the final hour of the horizon.  The returned observations after the
        final hour wrap to hour 0 values only through :meth:`reset`.
        """
        if self._t >= self.horizon:
            raise IndexError(f"episode horizon {self.horizon} exceeded")
        outcomes: dict[int, StepOutcome] = {}
        for agent_id in self.scenario.agent_ids:
            obs = self._observe(agent_id)
            outcome = transition(
                obs,
                actions[agent_id],
                self.scenario.farm(agent_id).battery,
                self.schedule,
                self.priming_on,
            )
            outcomes[agent_id] = outcome
            self._soc[agent_id] = outcome.new_soc_pct

        hour = self._t % 24
        if self.advisor_on:
            tsp = sum(o.sell_kwh for o in outcomes.values())
            tbp = sum(o.buy_kwh for o in outcomes.values())
            sdr = compute_sdr(tsp, tbp)
            self._quote = internal_prices(
                sdr, self.schedule.buy_price(hour), self.schedule.fit_price
            )
        else:
            self._quote = passthrough_quote(hour, self.schedule)

        self._t += 1
        done = self._t >= self.horizon
        next_t = self._t if not done else self.horizon - 1
        next_obs = {}
        for agent_id in self.scenario.agent_ids:
            if done:
                # terminal marker: repeat last state with the advanced hour
                obs = self._observe_at(agent_id, next_t)
                next_obs[agent_id] = replace(obs, hour=(self._t % 24))
            else:
                next_obs[agent_id] = self._observe(agent_id)
        return outcomes, next_obs, done

    def _observe_at(self, agent_id: int, t: int) -> Observation:
        return Observation(
            load_kwh=float(self.scenario.loads[agent_id].values[t]),
            generation_kwh=float(self.scenario.generation[agent_id].values[t]),
            soc_pct=self._soc[agent_id],
            hour=t % 24,
            isp=self._quote.isp,
            ibp=self._quote.ibp,
        )
