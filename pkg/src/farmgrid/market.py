"""Order books, double-auction clearing, and grid settlement of residuals.

Bids sort by price descending, asks by price ascending, FIFO within a
price level.  Matching walks both books pairwise: each trade moves the
minimum of the two remaining quantities at the bid/ask midpoint.  Whatever
does not match is settled with the grid at the time-of-use price (buyers)
or the feed-in tariff (sellers).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .pricing import DEFAULT_TARIFF, PriceQuote, TariffSchedule


class MarketError(ValueError):
    """Raised for orders violating price bounds or quantity constraints."""


class Side(str, Enum):
    BID = "bid"
    ASK = "ask"


@dataclass(frozen=True)
class Order:
    """A bid or ask: price in EUR/kWh, quantity in kWh, FIFO sequence index."""

    agent_id: int
    side: Side
    price: float
    quantity: float
    seq: int = 0


@dataclass(frozen=True)
class TradeRecord:
    buyer_id: int
    seller_id: int
    price: float
    quantity: float
    hour: int


@dataclass
class Settlement:
    """Clearing outcome: matched trades plus per-agent grid residuals (kWh)."""

    trades: list[TradeRecord] = field(default_factory=list)
    grid_buys: dict[int, float] = field(default_factory=dict)
    grid_sells: dict[int, float] = field(default_factory=dict)

    @property
    def matched_kwh(self) -> float:
        return sum(t.quantity for t in self.trades)

    def buyer_spend(self) -> float:
        return sum(t.price * t.quantity for t in self.trades)

    def seller_revenue(self) -> float:
        return sum(t.price * t.quantity for t in self.trades)


def _validate(order: Order, low: float, high: float) -> None:
    if order.quantity <= 0:
        raise MarketError(
            f"agent {order.agent_id}: order quantity must be > 0, got {order.quantity}"
        )
    if not low <= order.price <= high:
        raise MarketError(
            f"agent {order.agent_id}: price {order.price} outside "
            f"[{low}, {high}] (FiT..ToU bounds)"
        )


def clear(
    bids: Iterable[Order],
    asks: Iterable[Order],
    hour: int,
    schedule: TariffSchedule = DEFAULT_TARIFF,
    strict_paper_mode: bool = False,
) -> Settlement:
    """Run one hourly double auction and settle residuals with the grid.

    Parameters
    ----------
    bids, asks : iterable of Order
        Orders for this hour; prices must lie within the FiT..ToU band for
        ``hour`` (taken modulo 24, so an absolute simulation hour works and
        is recorded in the trades).
    strict_paper_mode : bool
        When True, the stop-on-uncrossed-books check is disabled and
        matching continues until one side empties, pricing trades at the
        midpoint even when the best bid is below the best ask.  Default
        False: matching stops once the best bid no longer meets the best
        ask, keeping every trade price inside [ask, bid].
    """
    low = schedule.fit_price
    high = schedule.buy_price(hour % 24)

    bid_list = sorted(bids, key=lambda o: (-o.price, o.seq))
    ask_list = sorted(asks, key=lambda o: (o.price, o.seq))
    for order in bid_list:
        if order.side is not Side.BID:
            raise MarketError(f"agent {order.agent_id}: ask passed in bids")
        _validate(order, low, high)
    for order in ask_list:
        if order.side is not Side.ASK:
            raise MarketError(f"agent {order.agent_id}: bid passed in asks")
        _validate(order, low, high)

    remaining_bid = [o.quantity for o in bid_list]
    remaining_ask = [o.quantity for o in ask_list]
    settlement = Settlement()
    i = j = 0
    while i < len(bid_list) and j < len(ask_list):
        bid, ask = bid_list[i], ask_list[j]
        if not strict_paper_mode and bid.price < ask.price:
            break
        quantity = min(remaining_bid[i], remaining_ask[j])
        price = (bid.price + ask.price) / 2.0
        settlement.trades.append(
            TradeRecord(
                buyer_id=bid.agent_id,
                seller_id=ask.agent_id,
                price=price,
                quantity=quantity,
                hour=hour,
            )
        )
        remaining_bid[i] -= quantity
        remaining_ask[j] -= quantity
        if remaining_bid[i] <= 0:
            i += 1
        if remaining_ask[j] <= 0:
            j += 1

    for k, order in enumerate(bid_list):
        if remaining_bid[k] > 0:
            settlement.grid_buys[order.agent_id] = (
                settlement.grid_buys.get(order.agent_id, 0.0) + remaining_bid[k]
            )
    for k, order in enumerate(ask_list):
        if remaining_ask[k] > 0:
            settlement.grid_sells[order.agent_id] = (
                settlement.grid_sells.get(order.agent_id, 0.0) + remaining_ask[k]
            )
    return settlement


def default_orders(
    flows: Mapping[int, tuple[float, float]], quote: PriceQuote
) -> tuple[list[Order], list[Order]]:
    """Turn per-agent (buy_kwh, sell_kwh) flows into advisor-priced orders.

    Buyers bid the internal buying price, sellers ask the internal selling
    price; agents adopt the advisor's quote by default.  Returns
    ``(bids, asks)``; idle quotes (``market_open=False``) produce none.
    """
    bids: list[Order] = []
    asks: list[Order] = []
    if not quote.market_open:
        return bids, asks
    seq = 0
    for agent_id in flows:
        buy_kwh, sell_kwh = flows[agent_id]
        if buy_kwh < 0 or sell_kwh < 0:
            raise MarketError(f"agent {agent_id}: negative flow")
        if buy_kwh > 0:
            bids.append(Order(agent_id, Side.BID, quote.ibp, buy_kwh, seq))
            seq += 1
        if sell_kwh > 0:
            asks.append(Order(agent_id, Side.ASK, quote.isp, sell_kwh, seq))
            seq += 1
    return bids, asks
