"""OHLCV ingestion, indicators, snapshots and pair qualification."""

from gridloop.market_data.candles import Candle, PairSeries, ingest_series, serialize_series
from gridloop.market_data.indicators import (
    InsufficientDataError,
    UnknownIndicatorError,
    indicator_registry_lookup,
    volatility,
)
from gridloop.market_data.snapshot import ExchangeFilters, Market, MarketSnapshot, PairQuote, qualify_pairs

__all__ = [
    "Candle",
    "ExchangeFilters",
    "InsufficientDataError",
    "Market",
    "MarketSnapshot",
    "PairQuote",
    "PairSeries",
    "UnknownIndicatorError",
    "indicator_registry_lookup",
    "ingest_series",
    "qualify_pairs",
    "serialize_series",
    "volatility",
]
