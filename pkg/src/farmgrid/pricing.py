"""Time-of-use tariff schedule and the SDR-based internal price advisor.

The community price advisor quotes an internal selling price (ISP) and an
internal buying price (IBP) each hour from the supply/demand ratio (SDR),
bounded below by the feed-in tariff and above by the time-of-use grid price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class TariffPeriod(str, Enum):
    """Grid billing period for one hour of the day."""

    PEAK = "peak"
    DAY = "day"
    NIGHT = "night"


class GridTag(str, Enum):
    """Hour classification seen by reward shaping.

    Identical to :class:`TariffPeriod` except that the pre-peak priming
    window is tagged ``NEAR_PEAK`` instead of ``NIGHT`` when priming is
    enabled.  Billing never uses ``NEAR_PEAK``; it is an optimization tag,
    not a grid tariff.
    """

    PEAK = "P"
    DAY = "D"
    NIGHT = "N"
    NEAR_PEAK = "NP"


HourWindow = tuple[int, int]  # [start, end) with end <= 24


def _in_window(hour: int, window: HourWindow) -> bool:
    start, end = window
    return start <= hour < end


@dataclass(frozen=True)
class TariffSchedule:
    """Time-of-use prices and the hour windows they apply to.

    Prices are EUR/kWh.  ``night_windows`` includes the 15:00-17:00
    pre-peak window, which is billed at the night rate but additionally
    tagged near-peak (see :func:`grid_tag`) so reward shaping can prime
    batteries ahead of the evening peak.

    Ordering invariant: ``fit_price < night_price < day_price < peak_price``.
    """

    peak_price: float = 0.66
    day_price: float = 0.44
    night_price: float = 0.22
    fit_price: float = 0.135
    peak_hours: HourWindow = (17, 19)
    night_windows: tuple[HourWindow, ...] = ((15, 17), (23, 24), (0, 8))
    near_peak_hours: HourWindow = (15, 17)

    def __post_init__(self) -> None:
        if not (0.0 < self.fit_price < self.night_price < self.day_price < self.peak_price):
            raise ValueError(
                "tariff prices must satisfy 0 < fit < night < day < peak, got "
                f"fit={self.fit_price}, night={self.night_price}, "
                f"day={self.day_price}, peak={self.peak_price}"
            )
        for window in (self.peak_hours, self.near_peak_hours, *self.night_windows):
            start, end = window
            if not (0 <= start < end <= 24):
                raise ValueError(f"hour window {window} not within [0, 24)")
        for hour in range(24):
            if _in_window(hour, self.peak_hours) and any(
                _in_window(hour, w) for w in self.night_windows
            ):
                raise ValueError(f"hour {hour} is in both peak and night windows")

    def period(self, hour: int) -> TariffPeriod:
        return tariff_period(hour, self)

    def buy_price(self, hour: int) -> float:
        """Grid purchase price (EUR/kWh) at the given hour."""
        period = self.period(hour)
        if period is TariffPeriod.PEAK:
            return self.peak_price
        if period is TariffPeriod.NIGHT:
            return self.night_price
        return self.day_price

    @property
    def sell_price(self) -> float:
        """Feed-in tariff paid for exports to the grid (EUR/kWh)."""
        return self.fit_price


DEFAULT_TARIFF = TariffSchedule()


def tariff_period(hour: int, schedule: TariffSchedule = DEFAULT_TARIFF) -> TariffPeriod:
    """Classify an hour of day as Peak, Day, or Night for billing.

    Defaults: peak 17:00-19:00, night 15:00-17:00, 23:00-24:00 and
    00:00-08:00, day otherwise.
    """
    if not isinstance(hour, int) or isinstance(hour, bool):
        raise TypeError(f"hour must be an int, got {type(hour).__name__}")
    if not 0 <= hour <= 23:
        raise ValueError(f"hour must be in [0, 23], got {hour}")
    if _in_window(hour, schedule.peak_hours):
        return TariffPeriod.PEAK
    if any(_in_window(hour, w) for w in schedule.night_windows):
        return TariffPeriod.NIGHT
    return TariffPeriod.DAY


def grid_tag(
    hour: int,
    schedule: TariffSchedule = DEFAULT_TARIFF,
    priming_on: bool = True,
) -> GridTag:
    """Hour tag used by the reward rules: P, D, N, or NP.

    With ``priming_on`` the near-peak window reports ``NP``; with priming
    disabled those hours fall back to their billing period (night), so
    nothing is ever tagged ``NP``.
    """
    period = tariff_period(hour, schedule)
    if priming_on and _in_window(hour, schedule.near_peak_hours):
        if period is not TariffPeriod.PEAK:
            return GridTag.NEAR_PEAK
    return {
        TariffPeriod.PEAK: GridTag.PEAK,
        TariffPeriod.DAY: GridTag.DAY,
        TariffPeriod.NIGHT: GridTag.NIGHT,
    }[period]


#: Sentinel SDR for an hour with supply but zero demand (ratio diverges).
SURPLUS = math.inf


def compute_sdr(tsp_kwh: float, tbp_kwh: float) -> Optional[float]:
    """Supply/demand ratio: total selling power over total buying power.

    Returns ``math.inf`` (:data:`SURPLUS`) when there is supply but no
    demand, and ``None`` when both sides are zero (idle hour, no internal
    market).
    """
    if tsp_kwh < 0 or tbp_kwh < 0:
        raise ValueError(f"TSP/TBP must be >= 0, got tsp={tsp_kwh}, tbp={tbp_kwh}")
    if tbp_kwh == 0.0:
        return SURPLUS if tsp_kwh > 0.0 else None
    return tsp_kwh / tbp_kwh


@dataclass(frozen=True)
class PriceQuote:
    """Advisor quote for one hour: internal sell/buy prices and the SDR.

    ``market_open`` is False only for idle hours (no supply and no demand),
    where the quote passes grid prices through and no internal trades occur.
    """

    isp: float
    ibp: float
    sdr: Optional[float] = None
    market_open: bool = True

    @property
    def midpoint(self) -> float:
        return (self.isp + self.ibp) / 2.0


def internal_prices(
    sdr: Optional[float], lambda_buy: float, lambda_sell: float
) -> PriceQuote:
    """Quote ISP and IBP for the community given the hour's SDR.

    Piecewise in the ratio: at 0 both prices collapse to the grid buy
    price, at 1 both collapse to the feed-in tariff, above 1 (including the
    surplus sentinel) sellers get the feed-in tariff while buyers pay the
    grid price.  ``sdr=None`` marks an idle hour and yields a pass-through
    quote with ``market_open=False``.
    """
    if not 0.0 < lambda_sell < lambda_buy:
        raise ValueError(
            f"need 0 < lambda_sell < lambda_buy, got sell={lambda_sell}, buy={lambda_buy}"
        )
    if sdr is None:
        return PriceQuote(isp=lambda_sell, ibp=lambda_buy, sdr=None, market_open=False)
    if sdr < 0:
        raise ValueError(f"SDR must be >= 0, got {sdr}")
    if sdr > 1.0:
        return PriceQuote(isp=lambda_sell, ibp=lambda_buy, sdr=sdr)
    isp = (lambda_sell * lambda_buy) / ((lambda_buy - lambda_sell) * sdr + lambda_sell)
    ibp = isp * sdr + lambda_buy * (1.0 - sdr)
    return PriceQuote(isp=isp, ibp=ibp, sdr=sdr)


def passthrough_quote(hour: int, schedule: TariffSchedule = DEFAULT_TARIFF) -> PriceQuote:
    """Grid pass-through quote: ISP at the feed-in tariff, IBP at the
    time-of-use price.  Used for grid-only runs, the advisor-off ablation,
    and the initial observation before any clearing has happened."""
    return PriceQuote(
        isp=schedule.fit_price, ibp=schedule.buy_price(hour), sdr=None, market_open=True
    )
