"""Structured feedback record handed to the optimizer."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Callable, Mapping

from gridloop.market_data.snapshot import Market
from gridloop.metrics import performance as perf
from gridloop.metrics.events import RiskEvent
from gridloop.metrics.record import RunRecord
from gridloop.numeric import D, to_str
from gridloop.params import DAY_MS


class FeedbackIntegrityError(ValueError):
    pass


METRICS = (
    "total_return", "arr", "sharpe", "sortino", "mdd", "win_rate", "profit_factor",
    "capital_utilization", "pnl_per_capital", "trading_frequency",
)


@dataclass(frozen=True)
class Feedback:
    period: tuple[int, int]
    metrics: Mapping[str, Decimal | None]
    undefined: Mapping[str, str]
    events: tuple[RiskEvent, ...]
    trade_log_ref: str
    market_ref: str
    n_fills: int
    n_pairs: int
    profile: str = "crypto"
    extra: Mapping[str, Any] = field(default_factory=dict)

    def metric(self, name: str) -> Decimal | None:
        return self.metrics.get(name)

    def events_of(self, kind: str) -> list[RiskEvent]:
        return [e for e in self.events if e.kind == kind]

    def to_dict(self) -> dict[str, Any]:
        return {
            "period": list(self.period),
            "profile": self.profile,
            "metrics": {k: to_str(v) for k, v in self.metrics.items()},
            "undefined": dict(self.undefined),
            "events": [e.to_dict() for e in self.events],
            "trade_log_ref": self.trade_log_ref,
            "market_ref": self.market_ref,
            "n_fills": self.n_fills,
            "n_pairs": self.n_pairs,
            "extra": dict(self.extra),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Feedback":
        d = json.loads(text)
        return cls(
            period=(d["period"][0], d["period"][1]),
            metrics={k: (None if v is None else D(v)) for k, v in d["metrics"].items()},
            undefined=d["undefined"],
            events=tuple(RiskEvent.from_dict(e) for e in d["events"]),
            trade_log_ref=d["trade_log_ref"],
            market_ref=d["market_ref"],
            n_fills=d["n_fills"],
            n_pairs=d["n_pairs"],
            profile=d["profile"],
            extra=d["extra"],
        )


def market_digest(market: Market, start: int, end: int) -> str:
    h = hashlib.sha256()
    for pair, s in sorted(market.series.items()):
        h.update(pair.encode())
        for c in s.candles:
            if start <= c.timestamp <= end:
                h.update(f"{c.timestamp},{c.open},{c.high},{c.low},{c.close},{c.volume};".encode())
    return h.hexdigest()


def _check_integrity(record: RunRecord, market: Market) -> None:
    start, end = record.period
    if end < start:
        raise FeedbackIntegrityError("period end precedes start")
    for t, _ in record.equity_curve:
        if not start <= t <= end:
            raise FeedbackIntegrityError(f"equity sample {t} outside period")
    for f in record.fills:
        if f.pair not in market.series:
            raise FeedbackIntegrityError(f"fill {f.fill_id} references unknown pair {f.pair}")
        if not start <= f.timestamp <= end:
            raise FeedbackIntegrityError(f"fill {f.fill_id} at {f.timestamp} outside period")


def compute_metrics(record: RunRecord, profile: str = "crypto") -> tuple[dict[str, Decimal | None], dict[str, str]]:
    days = perf.ANNUALIZATION_DAYS[profile]
    curve = record.equity_curve
    values = [v for _, v in curve]
    start, end = record.period
    period_days = D(end - start) / DAY_MS
    daily = perf.simple_returns(perf.sample_curve(curve, DAY_MS))

    calcs: dict[str, Callable[[], Decimal]] = {
        "total_return": lambda: perf.total_return(values),
        "arr": lambda: perf.arr(values, period_days, days),
        "sharpe": lambda: perf.sharpe(daily, periods_per_year=days),
        "sortino": lambda: perf.sortino(daily, periods_per_year=days),
        "mdd": lambda: perf.mdd(values),
        "win_rate": lambda: perf.win_rate(record.fills),
        "profit_factor": lambda: perf.profit_factor(record.fills),
        "capital_utilization": lambda: perf.capital_utilization(record.deployments),
        "pnl_per_capital": lambda: perf.pnl_per_capital(record.fills),
        "trading_frequency": lambda: _frequency(len(record.fills), period_days),
    }
    metrics: dict[str, Decimal | None] = {}
    undefined: dict[str, str] = {}
    for name in METRICS:
        try:
            metrics[name] = calcs[name]()
        except perf.UndefinedMetricError as exc:
            metrics[name] = None
            undefined[name] = exc.reason
    return metrics, undefined


def _frequency(n: int, period_days: Decimal) -> Decimal:
    if period_days <= 0:
        raise perf.UndefinedMetricError("trading_frequency", "zero-length period")
    return D(n) / period_days


def assemble_feedback(record: RunRecord, market: Market, detector_config=None, profile: str = "crypto") -> Feedback:
    from gridloop.optimizer.detectors import DetectorConfig, run_detectors

    _check_integrity(record, market)
    cfg = detector_config or DetectorConfig()
    metrics, undefined = compute_metrics(record, profile)
    start, end = record.period
    window = market.window(start, end) if end >= start else market
    events = tuple(run_detectors(record, market, cfg)) if record.equity_curve else ()
    return Feedback(
        period=record.period,
        metrics=metrics,
        undefined=undefined,
        events=events,
        trade_log_ref=record.trade_log_digest(),
        market_ref=market_digest(window, start, end),
        n_fills=len(record.fills),
        n_pairs=len(market.series),
        profile=profile,
    )
