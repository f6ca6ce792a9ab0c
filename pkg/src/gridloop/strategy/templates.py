"""Strategy layer templates: where entry levels go for a qualified pair.

A template only plans (side, level, price, fraction) tuples.  Sizing, gating
and exposure caps are applied uniformly by the engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Protocol

from gridloop.enums import Side
from gridloop.market_data.snapshot import MarketSnapshot
from gridloop.strategy.functions import UnknownComponentError, grid_prices
from gridloop.params import BotParams


@dataclass(frozen=True)
class PlannedLevel:
    side: Side
    level: int
    price: Decimal
    fraction: Decimal


class StrategyTemplate(Protocol):
    name: str

    def plan(self, pair: str, snapshot: MarketSnapshot, phi: Decimal, params: BotParams) -> list[PlannedLevel]:
        ...


def _sides(params: BotParams) -> list[Side]:
    if params.grid_side == "both":
        return [Side.BUY, Side.SELL]
    return [Side(params.grid_side)]


class GridTemplate:
    """Ladder of m limit orders per side at P_recent * (1 -/+ phi)^M_P[i]."""

    name = "grid"

    def plan(self, pair: str, snapshot: MarketSnapshot, phi: Decimal, params: BotParams) -> list[PlannedLevel]:
        quote = snapshot.quotes[pair]
        out = []
        for side in _sides(params):
            prices = grid_prices(
                quote.latest, phi, params.price_exponents, side, quote.filters.tick_size, params.placement
            )
            for i, (price, frac) in enumerate(zip(prices, params.quantity_fractions), 1):
                out.append(PlannedLevel(side, i, price, frac))
        return out


class TrendTemplate:
    """Single entry in the direction of the look-back drift, sized by the summed M_Q.

    Goes long when the window close is above the window's first open by at
    least phi_req (short for a sell-side bot); otherwise stays flat.
    """

    name = "trend"

    def plan(self, pair: str, snapshot: MarketSnapshot, phi: Decimal, params: BotParams) -> list[PlannedLevel]:
        series = snapshot.series.get(pair)
        quote = snapshot.quotes[pair]
        i = series.index_at(snapshot.as_of) if series is not None else None
        back = params.tau_ms // series.interval_ms if series is not None else 0
        if i is None or i - back < 0:
            return []
        first_open = series.candles[i - back].open
        drift = (quote.latest - first_open) / first_open
        side = Side.SELL if params.grid_side == "sell" else Side.BUY
        if side is Side.BUY and drift < params.volatility_req:
            return []
        if side is Side.SELL and -drift < params.volatility_req:
            return []
        price = grid_prices(quote.latest, phi, params.price_exponents[:1], side, quote.filters.tick_size, params.placement)[0]
        return [PlannedLevel(side, 1, price, sum(params.quantity_fractions))]


STRATEGIES: dict[str, StrategyTemplate] = {"grid": GridTemplate(), "trend": TrendTemplate()}


def strategy_lookup(name: str) -> StrategyTemplate:
    try:
        return STRATEGIES[name]
    except KeyError:
        raise UnknownComponentError("strategy", name, sorted(STRATEGIES)) from None
