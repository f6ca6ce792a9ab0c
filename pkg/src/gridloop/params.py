"""Parameter layer: the single externalized record of every bot tunable.

Nothing in the function or strategy layers may hard-code a tunable value; they
read it from :class:`BotParams`.  This module imports nothing from the rest of
the package so dependencies can only point down into it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping

from gridloop.numeric import D, fx

MINUTE_MS = 60_000
HOUR_MS = 60 * MINUTE_MS
DAY_MS = 24 * HOUR_MS

GRID_SIDES = ("buy", "sell", "both")


class ParamError(ValueError):
    """Raised when a parameter record violates its invariants."""


@dataclass(frozen=True)
class ExecutionSchedule:
    """Periodic set of execution intervals ``[start, start + length]``.

    Interval starts are ``offset_ms + n * period_ms``.  ``length_ms`` is the
    execution window (defaults to one minute).
    """

    period_ms: int = 15 * MINUTE_MS
    length_ms: int = MINUTE_MS
    offset_ms: int = 0

    def __post_init__(self) -> None:
        if self.period_ms <= 0 or self.length_ms <= 0:
            raise ParamError("execution period and length must be positive")
        if self.length_ms > self.period_ms:
            raise ParamError("execution window longer than its period")

    def opens_at(self, clock_ms: int) -> bool:
        return (clock_ms - self.offset_ms) % self.period_ms == 0

    def interval_start(self, clock_ms: int) -> int:
        return clock_ms - (clock_ms - self.offset_ms) % self.period_ms

    def within_interval(self, clock_ms: int) -> bool:
        return clock_ms - self.interval_start(clock_ms) <= self.length_ms


@dataclass(frozen=True)
class MarketCapCoefficient:
    """c_m: piecewise-constant weight by market-cap rank quartile, clamped."""

    quartile_weights: tuple[Decimal, ...] = (D("1"), D("0.75"), D("0.5"), D("0.25"))
    floor: Decimal = D("0.25")
    cap: Decimal = D("1")
    unranked_weight: Decimal = D("1")


@dataclass(frozen=True)
class FundingCoefficient:
    """c_f: 1 below ``low`` absolute funding, linear decay to 0 at ``high``."""

    low: Decimal = D("0.0001")
    high: Decimal = D("0.001")


@dataclass(frozen=True)
class BotParams:
    """Full parameter record of the grid bot.

    ``price_exponents`` (M_P), ``quantity_fractions`` (M_Q) and
    ``exit_exponents`` (H) form the numeric vector the reflection optimizer
    searches over; the registry names select function and strategy variants.
    """

    schedule: ExecutionSchedule = ExecutionSchedule()
    tau_ms: int = 4 * HOUR_MS
    volume_window_ms: int = DAY_MS
    volume_req: Decimal = D("0")
    volatility_req: Decimal = D("0")
    allocation: Decimal = D("1000")
    price_exponents: tuple[Decimal, ...] = (D("1"), D("2"), D("3"))
    quantity_fractions: tuple[Decimal, ...] = (D("0.2"), D("0.3"), D("0.5"))
    exit_exponents: tuple[Decimal, ...] = (D("1"), D("2"))
    partial_close_fractions: tuple[Decimal, ...] | None = None
    market_cap: MarketCapCoefficient = MarketCapCoefficient()
    funding: FundingCoefficient = FundingCoefficient()
    entry_exponent: Decimal = D("1")
    size_divisor: Decimal = D("10")
    deviation_tolerance: Decimal = D("0.01")
    grid_side: str = "buy"
    max_pair_notional: Decimal | None = None
    volatility_estimator: str = "oc_range_volatility"
    placement: str = "geometric"
    strategy: str = "grid"
    provenance: str = "config"

    def __post_init__(self) -> None:
        m = len(self.price_exponents)
        if m < 1 or len(self.quantity_fractions) != m:
            raise ParamError("price_exponents and quantity_fractions need equal length m >= 1")
        if len(self.exit_exponents) < 1:
            raise ParamError("exit_exponents needs k >= 1 entries")
        if any(p <= 0 for p in self.price_exponents):
            raise ParamError("price exponents must be positive")
        if any(b <= a for a, b in zip(self.price_exponents, self.price_exponents[1:])):
            raise ParamError("price exponents must be strictly increasing")
        if any(not (0 < q <= 1) for q in self.quantity_fractions):
            raise ParamError("quantity fractions must lie in (0, 1]")
        if any(h <= 0 for h in self.exit_exponents):
            raise ParamError("exit exponents must be positive")
        if any(b < a for a, b in zip(self.exit_exponents, self.exit_exponents[1:])):
            raise ParamError("exit exponents must be non-decreasing")
        if self.allocation <= 0 or self.size_divisor <= 0:
            raise ParamError("allocation and size_divisor must be positive")
        if self.volatility_req < 0 or self.volume_req < 0 or self.deviation_tolerance < 0:
            raise ParamError("thresholds must be non-negative")
        if self.tau_ms < 0 or self.volume_window_ms <= 0:
            raise ParamError("look-back durations must be non-negative")
        if self.grid_side not in GRID_SIDES:
            raise ParamError(f"grid_side must be one of {GRID_SIDES}")
        fr = self.partial_close_fractions
        if fr is not None:
            if len(fr) != len(self.exit_exponents):
                raise ParamError("partial_close_fractions must have k entries")
            if any(f <= 0 for f in fr) or sum(fr) > 1:
                raise ParamError("partial close fractions must be positive and sum to <= 1")
        if self.max_pair_notional is not None and self.max_pair_notional <= 0:
            raise ParamError("max_pair_notional must be positive")

    @property
    def m(self) -> int:
        return len(self.price_exponents)

    @property
    def k(self) -> int:
        return len(self.exit_exponents)

    def close_fractions(self) -> tuple[Decimal, ...]:
        if self.partial_close_fractions is not None:
            return self.partial_close_fractions
        k = self.k
        share = fx(D(1) / k)
        return (share,) * (k - 1) + (D(1) - share * (k - 1),)

    def replace(self, **changes: Any) -> "BotParams":
        return dataclasses.replace(self, **changes)

    # -- numeric vector view used by the optimizer -------------------------

    def component_names(self) -> list[str]:
        return (
            [f"q_{i}" for i in range(1, self.m + 1)]
            + [f"p_{i}" for i in range(1, self.m + 1)]
            + [f"h_{i}" for i in range(1, self.k + 1)]
        )

    def vector(self) -> dict[str, Decimal]:
        out: dict[str, Decimal] = {}
        for i, v in enumerate(self.quantity_fractions, 1):
            out[f"q_{i}"] = v
        for i, v in enumerate(self.price_exponents, 1):
            out[f"p_{i}"] = v
        for i, v in enumerate(self.exit_exponents, 1):
            out[f"h_{i}"] = v
        return out

    def with_vector(self, values: Mapping[str, Decimal]) -> "BotParams":
        unknown = set(values) - set(self.component_names())
        if unknown:
            raise ParamError(f"unknown components: {sorted(unknown)}")
        vec = self.vector()
        vec.update(values)
        return self.replace(
            quantity_fractions=tuple(vec[f"q_{i}"] for i in range(1, self.m + 1)),
            price_exponents=tuple(vec[f"p_{i}"] for i in range(1, self.m + 1)),
            exit_exponents=tuple(vec[f"h_{i}"] for i in range(1, self.k + 1)),
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return _encode(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BotParams":
        return params_from_dict(data, base=cls())


def _encode(obj: Any) -> Any:
    if isinstance(obj, Decimal):
        return format(obj, "f")
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


_DECIMAL_FIELDS = {
    "volume_req", "volatility_req", "allocation", "entry_exponent", "size_divisor",
    "deviation_tolerance", "max_pair_notional",
}
_DECIMAL_TUPLES = {"price_exponents", "quantity_fractions", "exit_exponents", "partial_close_fractions"}
_INT_FIELDS = {"tau_ms", "volume_window_ms"}
_STR_FIELDS = {"grid_side", "volatility_estimator", "placement", "strategy", "provenance"}


def params_from_dict(data: Mapping[str, Any], base: BotParams | None = None) -> BotParams:
    """Overlay ``data`` onto ``base`` with strict unknown-key rejection."""
    base = base or BotParams()
    known = {f.name for f in dataclasses.fields(BotParams)}
    unknown = set(data) - known
    if unknown:
        raise ParamError(f"unknown BotParams keys: {sorted(unknown)}")
    changes: dict[str, Any] = {}
    for key, raw in data.items():
        if key in _DECIMAL_FIELDS:
            changes[key] = None if raw is None else D(str(raw))
        elif key in _DECIMAL_TUPLES:
            changes[key] = None if raw is None else tuple(D(str(v)) for v in raw)
        elif key in _INT_FIELDS:
            changes[key] = int(raw)
        elif key in _STR_FIELDS:
            changes[key] = str(raw)
        elif key == "schedule":
            changes[key] = _sub(ExecutionSchedule, raw, int)
        elif key == "market_cap":
            mc = dict(raw)
            if "quartile_weights" in mc:
                mc["quartile_weights"] = tuple(D(str(v)) for v in mc["quartile_weights"])
            changes[key] = _sub(MarketCapCoefficient, mc, lambda v: D(str(v)) if not isinstance(v, tuple) else v)
        elif key == "funding":
            changes[key] = _sub(FundingCoefficient, raw, lambda v: D(str(v)))
    return dataclasses.replace(base, **changes)


def _sub(cls: type, raw: Mapping[str, Any], conv: Any) -> Any:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ParamError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**{k: conv(v) for k, v in raw.items()})
