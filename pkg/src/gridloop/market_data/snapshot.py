"""Market snapshots at an execution time and pair qualification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping

from gridloop.market_data.candles import PairSeries
from gridloop.market_data.indicators import (
    InsufficientDataError,
    indicator_registry_lookup,
    rolling_volume,
)
from gridloop.numeric import D, to_str
from gridloop.params import BotParams, DAY_MS


@dataclass(frozen=True)
class ExchangeFilters:
    tick_size: Decimal = D("0.0001")
    lot_size: Decimal = D("0.0001")
    min_notional: Decimal = D("1")


@dataclass(frozen=True)
class PairQuote:
    latest: Decimal
    mark: Decimal
    volume_24h: Decimal
    funding_rate: Decimal = D("0")
    mcap_rank: int | None = None
    filters: ExchangeFilters = ExchangeFilters()

    def to_dict(self) -> dict[str, Any]:
        return {
            "latest": to_str(self.latest),
            "mark": to_str(self.mark),
            "volume_24h": to_str(self.volume_24h),
            "funding_rate": to_str(self.funding_rate),
            "mcap_rank": self.mcap_rank,
            "tick_size": to_str(self.filters.tick_size),
            "lot_size": to_str(self.filters.lot_size),
            "min_notional": to_str(self.filters.min_notional),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PairQuote":
        f = ExchangeFilters(
            tick_size=D(str(d.get("tick_size", ExchangeFilters.tick_size))),
            lot_size=D(str(d.get("lot_size", ExchangeFilters.lot_size))),
            min_notional=D(str(d.get("min_notional", ExchangeFilters.min_notional))),
        )
        rank = d.get("mcap_rank")
        return cls(
            latest=D(str(d["latest"])),
            mark=D(str(d.get("mark", d["latest"]))),
            volume_24h=D(str(d["volume_24h"])),
            funding_rate=D(str(d.get("funding_rate", "0"))),
            mcap_rank=None if rank is None else int(rank),
            filters=f,
        )


@dataclass(frozen=True)
class MarketSnapshot:
    """Everything the engine may read at ``as_of``."""

    as_of: int
    quotes: Mapping[str, PairQuote]
    series: Mapping[str, PairSeries] = field(default_factory=dict, repr=False)
    universe_size: int = 0

    def pairs(self) -> list[str]:
        return sorted(self.quotes)

    def restrict(self, pairs: set[str] | frozenset[str]) -> "MarketSnapshot":
        return MarketSnapshot(
            self.as_of,
            {p: q for p, q in self.quotes.items() if p in pairs},
            {p: s for p, s in self.series.items() if p in pairs},
            self.universe_size,
        )


def pair_volatility(snapshot: MarketSnapshot, pair: str, params: BotParams) -> Decimal | None:
    """Volatility via the configured estimator; None when the window is not covered."""
    series = snapshot.series.get(pair)
    if series is None or not len(series):
        return None
    fn = indicator_registry_lookup(params.volatility_estimator)
    try:
        return fn(series, snapshot.as_of, params.tau_ms)
    except InsufficientDataError:
        return None


def qualify_pairs(snapshot: MarketSnapshot, params: BotParams) -> frozenset[str]:
    """Pairs with 24h volume >= V_req and volatility >= Phi_req.

    Pairs whose volatility window is not covered are skipped, not errored.
    """
    out = set()
    for pair, quote in snapshot.quotes.items():
        if quote.volume_24h < params.volume_req:
            continue
        phi = pair_volatility(snapshot, pair, params)
        if phi is not None and phi >= params.volatility_req:
            out.add(pair)
    return frozenset(out)


def dump_snapshot(snapshot: MarketSnapshot) -> str:
    doc = {p: {"as_of": snapshot.as_of, **q.to_dict()} for p, q in sorted(snapshot.quotes.items())}
    return json.dumps(doc, indent=2, sort_keys=True)


def load_snapshot(text: str, series: Mapping[str, PairSeries] | None = None) -> MarketSnapshot:
    doc = json.loads(text)
    stamps = {int(v["as_of"]) for v in doc.values()}
    if len(stamps) > 1:
        raise ValueError(f"snapshot entries disagree on as_of: {sorted(stamps)}")
    as_of = stamps.pop() if stamps else 0
    quotes = {p: PairQuote.from_dict(v) for p, v in doc.items()}
    return MarketSnapshot(as_of, quotes, dict(series or {}), len(quotes))


@dataclass
class Market:
    """Historical data bundle from which per-step snapshots are derived.

    ``funding`` maps pair -> rate (constant) or pair -> {timestamp: rate};
    ``marks`` optionally overrides mark prices per pair and timestamp.
    """

    series: dict[str, PairSeries]
    funding: dict[str, Any] = field(default_factory=dict)
    marks: dict[str, dict[int, Decimal]] = field(default_factory=dict)
    mcap_rank: dict[str, int] = field(default_factory=dict)
    filters: dict[str, ExchangeFilters] = field(default_factory=dict)

    def timestamps(self) -> list[int]:
        return sorted({c.timestamp for s in self.series.values() for c in s.candles})

    def funding_rate(self, pair: str, t: int) -> Decimal:
        spec = self.funding.get(pair, D("0"))
        if isinstance(spec, dict):
            keys = [k for k in spec if k <= t]
            return spec[max(keys)] if keys else D("0")
        return spec

    def filters_for(self, pair: str) -> ExchangeFilters:
        return self.filters.get(pair, ExchangeFilters())

    def snapshot_at(self, t: int, volume_window_ms: int = DAY_MS) -> MarketSnapshot:
        quotes: dict[str, PairQuote] = {}
        live: dict[str, PairSeries] = {}
        for pair, s in self.series.items():
            i = s.index_at(t)
            if i is None:
                continue
            close = s.candles[i].close
            mark = self.marks.get(pair, {}).get(t, close)
            quotes[pair] = PairQuote(
                latest=close,
                mark=mark,
                volume_24h=rolling_volume(s, t, volume_window_ms),
                funding_rate=self.funding_rate(pair, t),
                mcap_rank=self.mcap_rank.get(pair),
                filters=self.filters_for(pair),
            )
            live[pair] = s
        return MarketSnapshot(t, quotes, live, len(self.series))

    def window(self, start: int, end: int) -> "Market":
        """Sub-market restricted to candles in [start, end]."""
        cut = {}
        for p, s in self.series.items():
            cs = tuple(c for c in s.candles if start <= c.timestamp <= end)
            if cs:
                cut[p] = PairSeries(p, s.interval_ms, cs)
        return Market(cut, dict(self.funding), dict(self.marks), dict(self.mcap_rank), dict(self.filters))
