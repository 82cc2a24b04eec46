"""Hourly simulation loop: decisions, price advisory, auction, settlement.

Each hour the per-agent policy produces buy/sell intentions, the advisor
quotes internal prices from the aggregate supply/demand ratio, intentions
become orders, the double auction clears, and residuals settle with the
grid.  Grid-only mode skips the market and settles every flow at grid
prices.  KPI totals (purchase cost, sale revenue, peak-window grid demand)
accumulate into a ledger with per-agent breakdowns and an hourly trace.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .battery import BatteryState, apply_charge, apply_discharge
from .env import Action, Observation, TradingEnv
from .market import TradeRecord, clear, default_orders
from .pricing import TariffPeriod, compute_sdr, internal_prices, passthrough_quote
from .profiles import HOURS_PER_DAY, Scenario, TimeSeries
from .rulebased import decide

PolicyFn = Callable[[Observation], Action]


class Mode(str, Enum):
    P2P = "p2p"
    GRID_ONLY = "gridonly"


class PolicyKind(str, Enum):
    RULE_BASED = "rulebased"
    QTABLE = "qtable"
    DQN = "dqn"
    PPO = "ppo"


@dataclass(frozen=True)
class Ablations:
    """Feature toggles for the ablation suite.

    ``advisor_on=False`` keeps quantity matching but removes internal price
    discovery: matched energy is billed at grid prices on both sides.
    ``priming_on=False`` disables the near-peak reward tag.
    ``dairy_constraints_on=False`` flattens each load profile to its daily
    mean (equal daily energy, no milking peaks).
    """

    advisor_on: bool = True
    priming_on: bool = True
    dairy_constraints_on: bool = True


@dataclass(frozen=True)
class RunConfig:
    mode: Mode
    policy: PolicyKind = PolicyKind.RULE_BASED
    ablations: Ablations = field(default_factory=Ablations)
    horizon_hours: Optional[int] = None  # default: the scenario's horizon
    seed: int = 0
    night_charge_priority: bool = True
    strict_paper_mode: bool = False
    label: str = ""

    def family_label(self) -> str:
        """Identity of the policy/ablation combination, mode left out."""
        parts = [self.policy.value]
        if not self.ablations.advisor_on:
            parts.append("noadvisor")
        if not self.ablations.priming_on:
            parts.append("nopriming")
        if not self.ablations.dairy_constraints_on:
            parts.append("nodairy")
        return "-".join(parts)

    def resolved_label(self) -> str:
        if self.label:
            return self.label
        parts = [self.policy.value, self.mode.value]
        if not self.ablations.advisor_on:
            parts.append("noadvisor")
        if not self.ablations.priming_on:
            parts.append("nopriming")
        if not self.ablations.dairy_constraints_on:
            parts.append("nodairy")
        return "-".join(parts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["policy"] = self.policy.value
        d["label"] = self.resolved_label()
        return d


@dataclass
class AgentKpis:
    cost_eur: float = 0.0
    revenue_eur: float = 0.0
    peak_grid_kwh: float = 0.0
    grid_buy_kwh: float = 0.0
    grid_sell_kwh: float = 0.0
    p2p_buy_kwh: float = 0.0
    p2p_sell_kwh: float = 0.0


@dataclass
class TraceRow:
    hour: int
    agent: int
    action: str
    buy_kwh: float
    sell_kwh: float
    soc_pct: float
    price: float


@dataclass
class KpiLedger:
    """Accumulated community KPIs plus per-agent breakdowns and a trace."""

    cost_bought_eur: float = 0.0
    revenue_sold_eur: float = 0.0
    peak_hour_demand_kwh: float = 0.0
    per_agent: dict[int, AgentKpis] = field(default_factory=dict)
    trace: list[TraceRow] = field(default_factory=list)

    def agent(self, agent_id: int) -> AgentKpis:
        if agent_id not in self.per_agent:
            self.per_agent[agent_id] = AgentKpis()
        return self.per_agent[agent_id]

    def kpis(self) -> dict[str, float]:
        return {
            "cost_bought_eur": self.cost_bought_eur,
            "revenue_sold_eur": self.revenue_sold_eur,
            "peak_hour_demand_kwh": self.peak_hour_demand_kwh,
        }


@dataclass
class RunResult:
    config: RunConfig
    ledger: KpiLedger
    trades: list[TradeRecord] = field(default_factory=list)
    clearing_seconds: list[float] = field(default_factory=list)
    scenario_seed: int = 0


def _flatten_loads(scenario: Scenario) -> Scenario:
    """Replace each load series by its per-day mean (dairy ablation)."""
    flat = {}
    for agent_id, series in scenario.loads.items():
        values = series.values.reshape(-1, HOURS_PER_DAY)
        daily = values.mean(axis=1, keepdims=True)
        flat[agent_id] = TimeSeries(np.repeat(daily, HOURS_PER_DAY, axis=1).reshape(-1))
    return replace(scenario, loads=flat)


def _rule_label(decision) -> str:
    parts = []
    if decision.charge:
        parts.append("charge")
    if decision.discharge:
        parts.append("discharge")
    if decision.buy_kwh > 0:
        parts.append("buy")
    if decision.sell_kwh > 0:
        parts.append("sell")
    return "+".join(parts) if parts else "idle"


def _check_balance(load, gen, decision) -> None:
    lhs = load + decision.charge_kwh + decision.sell_kwh
    rhs = gen + decision.discharge_kwh + decision.buy_kwh
    if abs(lhs - rhs) > 1e-6:
        raise RuntimeError(
            f"rule-based energy balance violated: load+charge+sell={lhs} "
            f"vs gen+discharge+buy={rhs}"
        )


def run(
    scenario: Scenario,
    config: RunConfig,
    policy: Optional[PolicyFn] = None,
) -> RunResult:
    """Simulate one scenario under one configuration.

    A trained policy callable is required for non-rule-based configs.
    Deterministic: identical (scenario, config, policy) reproduce identical
    ledgers.
    """
    if config.policy is not PolicyKind.RULE_BASED and policy is None:
        raise ValueError(f"policy {config.policy.value} requires a trained policy")
    if not scenario.agent_ids:
        raise ValueError("scenario has no agents")
    horizon = config.horizon_hours or scenario.horizon_hours
    if horizon > scenario.horizon_hours or horizon <= 0:
        raise ValueError(
            f"run horizon {horizon} does not fit scenario profiles of "
            f"{scenario.horizon_hours} hours"
        )

    if not config.ablations.dairy_constraints_on:
        scenario = _flatten_loads(scenario)

    schedule = scenario.tariff
    ledger = KpiLedger()
    result = RunResult(config=config, ledger=ledger, scenario_seed=scenario.rng_seed)
    p2p = config.mode is Mode.P2P
    advisor_on = config.ablations.advisor_on

    use_env = config.policy is not PolicyKind.RULE_BASED
    env: Optional[TradingEnv] = None
    obs: dict[int, Observation] = {}
    states: dict[int, BatteryState] = {}
    if use_env:
        env = TradingEnv(
            scenario,
            advisor_on=advisor_on and p2p,
            priming_on=config.ablations.priming_on,
        )
        obs = env.reset()
    else:
        states = {a: BatteryState(soc_pct=100.0) for a in scenario.agent_ids}

    for t in range(horizon):
        hour = t % HOURS_PER_DAY
        period = schedule.period(hour)
        buy_price = schedule.buy_price(hour)
        fit = schedule.fit_price

        flows: dict[int, tuple[float, float]] = {}
        socs: dict[int, float] = {}
        labels: dict[int, str] = {}
        if use_env:
            assert env is not None
            actions = {a: policy(obs[a]) for a in scenario.agent_ids}
            outcomes, obs, _ = env.step(actions)
            for a in scenario.agent_ids:
                flows[a] = (outcomes[a].buy_kwh, outcomes[a].sell_kwh)
                socs[a] = outcomes[a].new_soc_pct
                labels[a] = actions[a].name.lower()
        else:
            for a in scenario.agent_ids:
                farm = scenario.farm(a)
                load = float(scenario.loads[a].values[t])
                gen = float(scenario.generation[a].values[t])
                state = states[a]
                decision = decide(
                    farm,
                    gen,
                    0.0,
                    load,
                    state,
                    period,
                    farm.battery,
                    night_charge_priority=config.night_charge_priority,
                )
                _check_balance(load, gen, decision)
                if decision.charge:
                    state, _ = apply_charge(state, decision.charge_kwh, farm.battery)
                elif decision.discharge:
                    state, _ = apply_discharge(state, decision.discharge_kwh, farm.battery)
                states[a] = state
                flows[a] = (decision.buy_kwh, decision.sell_kwh)
                socs[a] = state.soc_pct
                labels[a] = _rule_label(decision)

        # --- advisory and settlement -----------------------------------
        p2p_cost: dict[int, float] = {a: 0.0 for a in scenario.agent_ids}
        p2p_rev: dict[int, float] = {a: 0.0 for a in scenario.agent_ids}
        if p2p:
            if advisor_on:
                tsp = sum(s for _, s in flows.values())
                tbp = sum(b for b, _ in flows.values())
                quote = internal_prices(compute_sdr(tsp, tbp), buy_price, fit)
            else:
                quote = passthrough_quote(hour, schedule)
            bids, asks = default_orders(flows, quote)
            started = time.perf_counter()
            settlement = clear(
                bids, asks, t, schedule, strict_paper_mode=config.strict_paper_mode
            )
            result.clearing_seconds.append(time.perf_counter() - started)
            result.trades.extend(settlement.trades)
            for trade in settlement.trades:
                buyer_unit = trade.price if advisor_on else buy_price
                seller_unit = trade.price if advisor_on else fit
                p2p_cost[trade.buyer_id] += buyer_unit * trade.quantity
                p2p_rev[trade.seller_id] += seller_unit * trade.quantity
                buyer = ledger.agent(trade.buyer_id)
                seller = ledger.agent(trade.seller_id)
                buyer.p2p_buy_kwh += trade.quantity
                seller.p2p_sell_kwh += trade.quantity
            grid_buys = settlement.grid_buys
            grid_sells = settlement.grid_sells
        else:
            grid_buys = {a: b for a, (b, _) in flows.items() if b > 0}
            grid_sells = {a: s for a, (_, s) in flows.items() if s > 0}

        for a, kwh in grid_buys.items():
            kpis = ledger.agent(a)
            cost = buy_price * kwh
            kpis.cost_eur += cost
            kpis.grid_buy_kwh += kwh
            ledger.cost_bought_eur += cost
            if period is TariffPeriod.PEAK:
                kpis.peak_grid_kwh += kwh
                ledger.peak_hour_demand_kwh += kwh
        for a, kwh in grid_sells.items():
            kpis = ledger.agent(a)
            revenue = fit * kwh
            kpis.revenue_eur += revenue
            kpis.grid_sell_kwh += kwh
            ledger.revenue_sold_eur += revenue
        for a in scenario.agent_ids:
            if p2p_cost[a]:
                ledger.agent(a).cost_eur += p2p_cost[a]
                ledger.cost_bought_eur += p2p_cost[a]
            if p2p_rev[a]:
                ledger.agent(a).revenue_eur += p2p_rev[a]
                ledger.revenue_sold_eur += p2p_rev[a]

        for a in scenario.agent_ids:
            buy_kwh, sell_kwh = flows[a]
            if buy_kwh > 0:
                unit = (p2p_cost[a] + buy_price * grid_buys.get(a, 0.0)) / buy_kwh
            elif sell_kwh > 0:
                unit = (p2p_rev[a] + fit * grid_sells.get(a, 0.0)) / sell_kwh
            else:
                unit = 0.0
            ledger.trace.append(
                TraceRow(
                    hour=t,
                    agent=a,
                    action=labels[a],
                    buy_kwh=buy_kwh,
                    sell_kwh=sell_kwh,
                    soc_pct=socs[a],
                    price=unit,
                )
            )

    return result


def compare(
    scenario: Scenario,
    configs: Sequence[RunConfig],
    policies: Optional[Mapping[str, PolicyFn]] = None,
    jobs: int = 1,
) -> dict:
    """Run several configs on one scenario and report KPIs plus deltas.

    ``policies`` maps config labels to trained policy callables (rule-based
    configs need none).  Runs execute on a small thread pool bounded by
    ``jobs``; results are assembled in config order, so the report is
    deterministic for a fixed seed.
    """
    policies = policies or {}
    labels = [c.resolved_label() for c in configs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate config labels: {labels}")

    def _one(config: RunConfig) -> RunResult:
        return run(scenario, config, policies.get(config.resolved_label()))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, configs))
    else:
        results = [_one(c) for c in configs]

    runs = []
    for config, res in zip(configs, results):
        runs.append(
            {
                "label": config.resolved_label(),
                "config": config.to_dict(),
                "kpis": res.ledger.kpis(),
            }
        )

    deltas = []
    by_label = {r["label"]: r for r in runs}
    for config in configs:
        if config.mode is not Mode.P2P:
            continue
        base_cfg = replace(config, mode=Mode.GRID_ONLY, label="")
        base = by_label.get(base_cfg.resolved_label())
        this = by_label[config.resolved_label()]
        if base is None:
            continue
        for metric in ("cost_bought_eur", "revenue_sold_eur", "peak_hour_demand_kwh"):
            base_v = base["kpis"][metric]
            new_v = this["kpis"][metric]
            pct = 0.0 if base_v == 0 else (new_v - base_v) / base_v * 100.0
            deltas.append(
                {
                    "metric": metric,
                    "gridonly_label": base["label"],
                    "p2p_label": this["label"],
                    "gridonly": base_v,
                    "p2p": new_v,
                    "pct_change": pct,
                }
            )

    # rows: metric x mode; columns: policy/ablation families
    metric_names = {
        "cost_bought_eur": "Electricity cost (bought) (EUR)",
        "revenue_sold_eur": "Electricity revenue (sold) (EUR)",
        "peak_hour_demand_kwh": "Peak hour demand (kWh)",
    }
    families: list[str] = []
    for config in configs:
        name = config.family_label()
        if name not in families:
            families.append(name)
    table = []
    for metric, title in metric_names.items():
        for mode in (Mode.GRID_ONLY, Mode.P2P):
            values = {}
            for config, r in zip(configs, runs):
                if config.mode is mode:
                    values[config.family_label()] = r["kpis"][metric]
            if not values:
                continue
            table.append(
                {
                    "metric": f"{title} [{'with P2P' if mode is Mode.P2P else 'w/o P2P'}]",
                    "values": values,
                }
            )

    return {
        "kind": "farmgrid-compare-report",
        "version": 1,
        "scenario": {
            "agents": len(scenario.agent_ids),
            "horizon_hours": scenario.horizon_hours,
            "rng_seed": scenario.rng_seed,
        },
        "columns": families,
        "runs": runs,
        "deltas": deltas,
        "table": table,
    }


def render_markdown(report: dict) -> str:
    """Render a compare report as a small markdown table."""
    labels = report["columns"]
    lines = ["| Metric | " + " | ".join(labels) + " |"]
    lines.append("|" + "---|" * (len(labels) + 1))
    for row in report["table"]:
        cells = []
        for label in labels:
            value = row["values"].get(label)
            cells.append("" if value is None else f"{value:.2f}")
        lines.append(f"| {row['metric']} | " + " | ".join(cells) + " |")
    if report["deltas"]:
        lines.append("")
        lines.append("| Delta metric | Grid-only | P2P | Change (%) |")
        lines.append("|---|---|---|---|")
        for d in report["deltas"]:
            lines.append(
                f"| {d['metric']} ({d['p2p_label']}) | {d['gridonly']:.2f} "
                f"| {d['p2p']:.2f} | {d['pct_change']:+.2f} |"
            )
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Artifact writers
# ----------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def write_ledger_json(path: str | Path, result: RunResult) -> None:
    """Ledger JSON with the full config echo for reproducibility."""
    doc = {
        "kind": "farmgrid-run-ledger",
        "version": 1,
        "config": result.config.to_dict(),
        "scenario_seed": result.scenario_seed,
        "kpis": result.ledger.kpis(),
        "per_agent": {
            str(a): asdict(k) for a, k in sorted(result.ledger.per_agent.items())
        },
        "trades": len(result.trades),
        "matched_kwh": sum(t.quantity for t in result.trades),
    }
    _atomic_write(Path(path), json.dumps(doc, sort_keys=True, indent=2) + "\n")


def write_trace_csv(path: str | Path, result: RunResult) -> None:
    header = json.dumps(result.config.to_dict(), sort_keys=True)
    lines = [f"# farmgrid-run config={header}"]
    lines.append("hour,agent,action,buy,sell,soc,price")
    for row in result.ledger.trace:
        lines.append(
            f"{row.hour},{row.agent},{row.action},{row.buy_kwh!r},"
            f"{row.sell_kwh!r},{row.soc_pct!r},{row.price!r}"
        )
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def write_trades_csv(path: str | Path, result: RunResult) -> None:
    header = json.dumps(result.config.to_dict(), sort_keys=True)
    lines = [f"# farmgrid-run config={header}"]
    lines.append("hour,buyer,seller,price,quantity")
    for t in result.trades:
        lines.append(f"{t.hour},{t.buyer_id},{t.seller_id},{t.price!r},{t.quantity!r}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")
