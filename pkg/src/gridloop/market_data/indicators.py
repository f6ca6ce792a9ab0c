"""Technical indicators over a look-back window ending at an execution time.

Every indicator has the signature ``(series, t_e, window_ms) -> Decimal`` and
is looked up by name so the reflection optimizer can swap implementations.
"""

from __future__ import annotations

import logging
from decimal import Decimal
from typing import Callable

from gridloop.market_data.candles import PairSeries

log = logging.getLogger(__name__)

Indicator = Callable[[PairSeries, int, int], Decimal]


class InsufficientDataError(LookupError):
    """The series does not fully cover the requested window."""


class UnknownIndicatorError(KeyError):
    def __init__(self, name: str, available: list[str]):
        super().__init__(f"unknown indicator {name!r}; registered: {', '.join(available)}")
        self.name = name
        self.available = available


def align(series: PairSeries, t_e: int) -> int:
    """Round ``t_e`` down to the previous candle boundary."""
    i = series.floor_index(t_e)
    if i is None:
        raise InsufficientDataError(f"{series.pair_id}: no candle at or before {t_e}")
    aligned = series.candles[i].timestamp
    if aligned != t_e:
        log.debug("%s: t_e %d aligned down to %d", series.pair_id, t_e, aligned)
    return aligned


def window_bounds(series: PairSeries, t_e: int, window_ms: int) -> tuple[int, int]:
    """Index range [lo, hi] of candles whose timestamps lie in [t_e - window, t_e]."""
    t_e = align(series, t_e)
    hi = series.index_at(t_e)
    assert hi is not None
    lo = hi - window_ms // series.interval_ms
    if lo < 0:
        raise InsufficientDataError(
            f"{series.pair_id}: window of {window_ms} ms at {t_e} starts before {series.start}"
        )
    return lo, hi


def oc_range_volatility(series: PairSeries, t_e: int, tau_ms: int) -> Decimal:
    """(max of opens/closes - min of opens/closes) / close at t_e."""
    lo, hi = window_bounds(series, t_e, tau_ms)
    top = max(series.oc_high[lo : hi + 1])
    bottom = min(series.oc_low[lo : hi + 1])
    return (top - bottom) / series.candles[hi].close


def hl_range_volatility(series: PairSeries, t_e: int, tau_ms: int) -> Decimal:
    """Wick-inclusive variant: (max high - min low) / close at t_e."""
    lo, hi = window_bounds(series, t_e, tau_ms)
    window = series.candles[lo : hi + 1]
    top = max(c.high for c in window)
    bottom = min(c.low for c in window)
    return (top - bottom) / series.candles[hi].close


def rolling_volume(series: PairSeries, t_e: int, window_ms: int) -> Decimal:
    """Quote turnover of the candles closing in (t_e - window, t_e].

    Uses whatever history exists when the series is shorter than the window.
    """
    t_e = align(series, t_e)
    hi = series.index_at(t_e)
    assert hi is not None
    n = max(1, window_ms // series.interval_ms)
    lo = max(0, hi + 1 - n)
    pre = series.volume_prefix
    return pre[hi + 1] - pre[lo]


_REGISTRY: dict[str, Indicator] = {
    "oc_range_volatility": oc_range_volatility,
    "hl_range_volatility": hl_range_volatility,
    "rolling_volume": rolling_volume,
}

VOLATILITY_ESTIMATORS = ("oc_range_volatility", "hl_range_volatility")


def register_indicator(name: str, fn: Indicator) -> None:
    _REGISTRY[name] = fn


def indicator_registry_lookup(name: str) -> Indicator:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownIndicatorError(name, sorted(_REGISTRY)) from None


def registered_indicators() -> list[str]:
    return sorted(_REGISTRY)


def volatility(series: PairSeries, t_e: int, tau_ms: int) -> Decimal:
    return oc_range_volatility(series, t_e, tau_ms)
