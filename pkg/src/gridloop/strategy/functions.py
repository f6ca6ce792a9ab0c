"""Function layer: pure, swappable computations the strategy templates call.

Each function reads its tunables from arguments (ultimately from BotParams);
none of them carries a tunable constant of its own.
"""

from __future__ import annotations

from decimal import Decimal
from enum import Enum
from typing import Callable, Sequence

from gridloop.enums import PositionSide, Side
from gridloop.numeric import ONE, ZERO, ceil_to_step, floor_to_step, fx, truncate_to_step
from gridloop.params import FundingCoefficient, MarketCapCoefficient


class DegenerateVolatilityError(ValueError):
    """Volatility so large that a price level would be non-positive."""


class UnknownComponentError(KeyError):
    def __init__(self, kind: str, name: str, available: list[str]):
        super().__init__(f"unknown {kind} {name!r}; registered: {', '.join(available)}")


class Gate(str, Enum):
    PASS = "pass"
    BLOCK = "block"


# -- price placement variants ---------------------------------------------------

def _geometric(base: Decimal, phi: Decimal, exponent: Decimal, direction: int) -> Decimal:
    factor = ONE + direction * phi
    if factor <= 0:
        raise DegenerateVolatilityError(f"volatility {phi} drives price factor to {factor}")
    return base * factor**exponent


def _linear(base: Decimal, phi: Decimal, exponent: Decimal, direction: int) -> Decimal:
    factor = ONE + direction * phi * exponent
    if factor <= 0:
        raise DegenerateVolatilityError(f"volatility {phi} drives price factor to {factor}")
    return base * factor


PLACEMENTS: dict[str, Callable[[Decimal, Decimal, Decimal, int], Decimal]] = {
    "geometric": _geometric,
    "linear": _linear,
}


def placement_lookup(name: str) -> Callable[[Decimal, Decimal, Decimal, int], Decimal]:
    try:
        return PLACEMENTS[name]
    except KeyError:
        raise UnknownComponentError("placement", name, sorted(PLACEMENTS)) from None


def grid_prices(
    p_recent: Decimal,
    phi: Decimal,
    exponents: Sequence[Decimal],
    side: Side | str,
    tick: Decimal | None = None,
    placement: str = "geometric",
) -> list[Decimal]:
    """Grid levels P_recent * (1 -/+ phi)^e, below market for buys, above for sells.

    Prices are rounded to ``tick`` toward the passive side (buys down, sells up).
    """
    side = Side(side)
    if p_recent <= 0 or phi < 0:
        raise ValueError("p_recent must be positive and phi non-negative")
    if side is Side.BUY and phi >= ONE:
        raise DegenerateVolatilityError(f"buy grid undefined for volatility {phi} >= 1")
    fn = placement_lookup(placement)
    direction = -1 if side is Side.BUY else 1
    out = []
    for e in exponents:
        raw = fn(p_recent, phi, e, direction)
        if tick is None:
            out.append(fx(raw))
        elif side is Side.BUY:
            out.append(floor_to_step(raw, tick))
        else:
            out.append(ceil_to_step(raw, tick))
    return out


def order_quantities(
    allocation: Decimal,
    fractions: Sequence[Decimal],
    c_m: Decimal,
    c_f: Decimal,
    price_levels: Sequence[Decimal],
    lot: Decimal | None = None,
    min_notional: Decimal | None = None,
    scale: Decimal = ONE,
) -> list[Decimal]:
    """Base-asset quantity per level: A * M_Q[i] * c_m * c_f * scale / P_i.

    Quantities are rounded down to ``lot``.  A level that ends up below one
    lot or below ``min_notional`` gets quantity 0 (skipped by the caller).
    """
    if allocation <= 0:
        raise ValueError("allocation must be positive")
    out = []
    for frac, price in zip(fractions, price_levels):
        quote = allocation * frac * c_m * c_f * scale
        if quote <= 0 or price <= 0:
            out.append(ZERO)
            continue
        qty = truncate_to_step(quote / price, lot) if lot else fx(quote / price)
        if qty <= 0 or (min_notional is not None and qty * price < min_notional):
            out.append(ZERO)
        else:
            out.append(qty)
    return out


def entry_scaling(price: Decimal, entry_price: Decimal, exponent: Decimal) -> Decimal:
    """(P / P_entry)^c_e."""
    if price <= 0 or entry_price <= 0:
        raise ValueError("prices must be positive")
    if exponent == 0:
        return ONE
    return (price / entry_price) ** exponent


def profit_loss_levels(
    entry_price: Decimal,
    phi: Decimal,
    exponents: Sequence[Decimal],
    side: PositionSide | str,
    tick: Decimal | None = None,
) -> list[tuple[Decimal, Decimal]]:
    """(take_profit, stop) per exit exponent for a position.

    Long: TP at entry*(1+phi)^h, stop at entry*(1-phi)^h; short mirrored.
    Levels round away from the entry price.
    """
    side = PositionSide(side)
    if phi >= ONE:
        raise DegenerateVolatilityError(f"stop levels undefined for volatility {phi} >= 1")
    up = ONE + phi
    down = ONE - phi
    out = []
    for h in exponents:
        hi = entry_price * up**h
        lo = entry_price * down**h
        if tick is not None:
            hi, lo = ceil_to_step(hi, tick), floor_to_step(lo, tick)
        else:
            hi, lo = fx(hi), fx(lo)
        out.append((hi, lo) if side is PositionSide.LONG else (lo, hi))
    return out


def deviation_gate(latest: Decimal, mark: Decimal, tolerance: Decimal) -> Gate:
    """Block when |latest - mark| / mark exceeds the tolerance."""
    if latest <= 0 or mark <= 0:
        raise ValueError("prices must be positive")
    return Gate.BLOCK if abs(latest - mark) / mark > tolerance else Gate.PASS


def market_cap_coefficient(rank: int | None, universe_size: int, cfg: MarketCapCoefficient) -> Decimal:
    """Weight by rank quartile (rank 1 = largest), clamped to [floor, cap]."""
    if rank is None or universe_size <= 0:
        w = cfg.unranked_weight
    else:
        n = len(cfg.quartile_weights)
        bucket = min(n - 1, max(0, (rank - 1) * n // universe_size))
        w = cfg.quartile_weights[bucket]
    return min(cfg.cap, max(cfg.floor, w))


def funding_coefficient(rate: Decimal, cfg: FundingCoefficient) -> Decimal:
    """1 up to |rate| = low, linear to 0 at |rate| = high, 0 beyond."""
    r = abs(rate)
    if r <= cfg.low:
        return ONE
    if r >= cfg.high:
        return ZERO
    return (cfg.high - r) / (cfg.high - cfg.low)
