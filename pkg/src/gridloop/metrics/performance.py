"""Performance metrics over equity curves and fill logs.

All metrics are computed in Decimal arithmetic.  A metric that cannot be
computed from its inputs raises :class:`UndefinedMetricError` instead of
returning a placeholder value.
"""

from __future__ import annotations

from decimal import Decimal
from typing import Iterable, Mapping, Sequence

from gridloop.numeric import ZERO, D

ANNUALIZATION_DAYS = {"crypto": 365, "index_futures": 252}


class UndefinedMetricError(ArithmeticError):
    def __init__(self, metric: str, reason: str):
        super().__init__(f"{metric} undefined: {reason}")
        self.metric = metric
        self.reason = reason


def _mean(xs: Sequence[Decimal]) -> Decimal:
    return sum(xs, ZERO) / len(xs)


def pstdev(xs: Sequence[Decimal]) -> Decimal:
    mu = _mean(xs)
    return (sum(((x - mu) ** 2 for x in xs), ZERO) / len(xs)).sqrt()


def total_return(equity: Sequence[Decimal]) -> Decimal:
    if not equity:
        raise UndefinedMetricError("total_return", "empty curve")
    if equity[0] == 0:
        raise UndefinedMetricError("total_return", "zero initial value")
    return (equity[-1] - equity[0]) / equity[0]


def arr(equity: Sequence[Decimal], period_days: Decimal | int, annualization_days: int = 365) -> Decimal:
    """Raw return scaled linearly to one annualization year."""
    raw = total_return(equity)
    if raw == 0:
        return ZERO
    period_days = D(period_days)
    if period_days <= 0:
        raise UndefinedMetricError("arr", "zero-length period")
    return raw * annualization_days / period_days


def _annualize(ratio: Decimal, periods_per_year: int | None) -> Decimal:
    return ratio if periods_per_year is None else ratio * D(periods_per_year).sqrt()


def sharpe(returns: Sequence[Decimal], rf: Decimal = ZERO, periods_per_year: int | None = None) -> Decimal:
    """Mean excess return over the population std of excess returns."""
    if len(returns) < 2:
        raise UndefinedMetricError("sharpe", "fewer than 2 observations")
    excess = [r - rf for r in returns]
    sigma = pstdev(excess)
    if sigma == 0:
        raise UndefinedMetricError("sharpe", "zero volatility")
    return _annualize(_mean(excess) / sigma, periods_per_year)


def downside_deviation(returns: Sequence[Decimal], rf: Decimal = ZERO) -> Decimal:
    """sqrt(mean over all observations of min(0, r - rf)^2)."""
    return (sum((min(ZERO, r - rf) ** 2 for r in returns), ZERO) / len(returns)).sqrt()


def sortino(returns: Sequence[Decimal], rf: Decimal = ZERO, periods_per_year: int | None = None) -> Decimal:
    if len(returns) < 2:
        raise UndefinedMetricError("sortino", "fewer than 2 observations")
    if not any(r < rf for r in returns):
        raise UndefinedMetricError("sortino", "no downside observations")
    dd = downside_deviation(returns, rf)
    return _annualize(_mean([r - rf for r in returns]) / dd, periods_per_year)


def mdd(equity: Sequence[Decimal]) -> Decimal:
    """Maximum peak-to-trough decline as a fraction of the running peak."""
    if not equity:
        raise UndefinedMetricError("mdd", "empty curve")
    peak = equity[0]
    worst = ZERO
    for v in equity:
        if v > peak:
            peak = v
        elif peak > 0:
            dd = (peak - v) / peak
            if dd > worst:
                worst = dd
    return worst


def mdd_bruteforce(equity: Sequence[Decimal]) -> Decimal:
    """O(n^2) reference: max over t1 <= t2 of (V1 - V2) / V1."""
    worst = ZERO
    for i, v1 in enumerate(equity):
        if v1 <= 0:
            continue
        for v2 in equity[i:]:
            worst = max(worst, (v1 - v2) / v1)
    return worst


def sample_curve(curve: Sequence[tuple[int, Decimal]], step_ms: int) -> list[Decimal]:
    """Last equity value at or before each ``step_ms`` boundary, starting at the first point."""
    if not curve:
        return []
    start, end = curve[0][0], curve[-1][0]
    out = []
    j = 0
    t = start
    while t <= end:
        while j + 1 < len(curve) and curve[j + 1][0] <= t:
            j += 1
        out.append(curve[j][1])
        t += step_ms
    if (end - start) % step_ms:
        out.append(curve[-1][1])
    return out


def simple_returns(values: Sequence[Decimal]) -> list[Decimal]:
    return [(b - a) / a for a, b in zip(values, values[1:]) if a != 0]


def capital_utilization(deployments: Mapping[str, Sequence[tuple[Decimal, Decimal]]]) -> Decimal:
    """Mean over pairs of the time-averaged deployed / available ratio."""
    ratios = []
    for samples in deployments.values():
        if not samples:
            continue
        if any(avail <= 0 for _, avail in samples):
            raise ValueError("available capital must be positive at every sample")
        ratios.append(_mean([dep / avail for dep, avail in samples]))
    return _mean(ratios) if ratios else ZERO


def closing_fills(fills: Iterable) -> list:
    return [f for f in fills if f.closed_cost > 0]


def win_rate(fills: Iterable) -> Decimal:
    closes = closing_fills(fills)
    if not closes:
        raise UndefinedMetricError("win_rate", "no closing trades")
    return D(sum(1 for f in closes if f.realized_pnl > 0)) / len(closes)


def profit_factor(fills: Iterable) -> Decimal:
    closes = closing_fills(fills)
    gains = sum((f.realized_pnl for f in closes if f.realized_pnl > 0), ZERO)
    losses = -sum((f.realized_pnl for f in closes if f.realized_pnl < 0), ZERO)
    if losses == 0:
        raise UndefinedMetricError("profit_factor", "no losing trades")
    return gains / losses


def pnl_per_capital(fills: Iterable) -> Decimal:
    """Realized PnL net of fees per unit of capital committed to closed trades."""
    fills = list(fills)
    closes = closing_fills(fills)
    invested = sum((f.closed_cost for f in closes), ZERO)
    if invested == 0:
        raise UndefinedMetricError("pnl_per_capital", "no closed capital")
    realized = sum((f.realized_pnl for f in closes), ZERO)
    fees = sum((f.fee for f in fills), ZERO)
    return (realized - fees) / invested
