"""Fixed-point decimal helpers shared by every module on the ledger path.

All prices, quantities and cash amounts are ``decimal.Decimal`` values held at
``SCALE`` fractional digits.  Binary floats never enter the accounting path;
they are only accepted at the edges (parsing, synthetic data) through ``D``.
"""

from __future__ import annotations

from decimal import ROUND_CEILING, ROUND_DOWN, ROUND_FLOOR, ROUND_HALF_EVEN, Decimal
from typing import Union

Number = Union[int, float, str, Decimal]

SCALE = 8
QUANTUM = Decimal(1).scaleb(-SCALE)
ULP = QUANTUM

ZERO = Decimal(0)
ONE = Decimal(1)


def D(value: Number) -> Decimal:
    """Convert to Decimal without inheriting binary-float noise."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(value)


def fx(value: Number, rounding: str = ROUND_HALF_EVEN) -> Decimal:
    """Quantize to the fixed-point scale (half-even by default)."""
    return D(value).quantize(QUANTUM, rounding=rounding)


def fx_ceil(value: Number) -> Decimal:
    return D(value).quantize(QUANTUM, rounding=ROUND_CEILING)


def fx_floor(value: Number) -> Decimal:
    return D(value).quantize(QUANTUM, rounding=ROUND_FLOOR)


def floor_to_step(value: Decimal, step: Decimal) -> Decimal:
    """Largest multiple of ``step`` that is <= value (value >= 0)."""
    if step <= 0:
        return fx(value)
    n = (value / step).to_integral_value(rounding=ROUND_FLOOR)
    return fx(n * step)


def ceil_to_step(value: Decimal, step: Decimal) -> Decimal:
    if step <= 0:
        return fx(value)
    n = (value / step).to_integral_value(rounding=ROUND_CEILING)
    return fx(n * step)


def truncate_to_step(value: Decimal, step: Decimal) -> Decimal:
    """Round toward zero onto the ``step`` grid (lot rounding)."""
    if step <= 0:
        return D(value).quantize(QUANTUM, rounding=ROUND_DOWN)
    n = (value / step).to_integral_value(rounding=ROUND_DOWN)
    return fx(n * step)


def to_str(value: Decimal | None) -> str | None:
    """Canonical text form used in logs (no exponent notation)."""
    if value is None:
        return None
    return format(value, "f")
