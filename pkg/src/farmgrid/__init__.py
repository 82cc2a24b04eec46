"""farmgrid: peer-to-peer energy trading simulator for farm prosumers.

Deterministic, seeded simulation of a small community of farms with PV and
batteries: an SDR-based internal price advisor, hourly double-auction
clearing, a rule-based baseline dispatch policy, and desk-scale RL agents
(tabular Q-learning, DQN, PPO), reporting purchase cost, sale revenue, and
peak-window grid demand with and without P2P trading.
"""

from .battery import BatterySpec, BatteryState, apply_charge, apply_discharge, usable_energy
from .env import Action, Observation, StepOutcome, TradingEnv, reward, transition
from .market import MarketError, Order, Settlement, Side, TradeRecord, clear, default_orders
from .pricing import (
    DEFAULT_TARIFF,
    GridTag,
    PriceQuote,
    TariffPeriod,
    TariffSchedule,
    compute_sdr,
    grid_tag,
    internal_prices,
    tariff_period,
)
from .profiles import (
    FarmConfig,
    Scenario,
    ScenarioError,
    ShapeParams,
    TimeSeries,
    default_fleet,
    load_scenario,
    synthesize_scenario,
    write_scenario,
)
from .rulebased import RuleDecision, decide, total_generation
from .sim import (
    Ablations,
    KpiLedger,
    Mode,
    PolicyKind,
    RunConfig,
    RunResult,
    compare,
    render_markdown,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "Ablations",
    "Action",
    "BatterySpec",
    "BatteryState",
    "DEFAULT_TARIFF",
    "FarmConfig",
    "GridTag",
    "KpiLedger",
    "MarketError",
    "Mode",
    "Observation",
    "Order",
    "PolicyKind",
    "PriceQuote",
    "RuleDecision",
    "RunConfig",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "Settlement",
    "ShapeParams",
    "Side",
    "StepOutcome",
    "TariffPeriod",
    "TariffSchedule",
    "TimeSeries",
    "TradeRecord",
    "TradingEnv",
    "apply_charge",
    "apply_discharge",
    "clear",
    "compare",
    "compute_sdr",
    "decide",
    "default_fleet",
    "default_orders",
    "grid_tag",
    "internal_prices",
    "load_scenario",
    "render_markdown",
    "reward",
    "run",
    "synthesize_scenario",
    "tariff_period",
    "total_generation",
    "transition",
    "usable_energy",
    "write_scenario",
]
