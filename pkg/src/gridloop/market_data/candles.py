"""OHLCV candles, per-pair series, and CSV / JSON-lines ingestion."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

from gridloop.numeric import D, to_str
from gridloop.params import MINUTE_MS

DEFAULT_INTERVAL_MS = 15 * MINUTE_MS
FIELDS = ("timestamp", "open", "high", "low", "close", "volume")


class IngestError(ValueError):
    pass


class ParseError(IngestError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class CandleValidationError(IngestError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DuplicateTimestampError(IngestError):
    pass


class GapError(IngestError):
    def __init__(self, missing: list[int]):
        shown = ", ".join(str(t) for t in missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        super().__init__(f"gap in candle spacing; missing timestamps: {shown}{more}")
        self.missing = missing


@dataclass(frozen=True)
class Candle:
    """One bar; ``timestamp`` is the bar's close time in epoch milliseconds."""

    timestamp: int
    open: Decimal
    high: Decimal
    low: Decimal
    close: Decimal
    volume: Decimal

    def __post_init__(self) -> None:
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise CandleValidationError(f"non-positive price at {self.timestamp}")
        if self.volume < 0:
            raise CandleValidationError(f"negative volume at {self.timestamp}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise CandleValidationError(
                f"OHLC invariant violated at {self.timestamp}: "
                f"O={self.open} H={self.high} L={self.low} C={self.close}"
            )

    def to_dict(self) -> dict[str, object]:
        return {
            "timestamp": self.timestamp,
            "open": to_str(self.open),
            "high": to_str(self.high),
            "low": to_str(self.low),
            "close": to_str(self.close),
            "volume": to_str(self.volume),
        }


@dataclass(frozen=True)
class PairSeries:
    """Time-ordered candles of one pair at a constant spacing ``interval_ms``."""

    pair_id: str
    interval_ms: int
    candles: tuple[Candle, ...] = field(repr=False)

    def __post_init__(self) -> None:
        if self.interval_ms <= 0:
            raise CandleValidationError("interval must be positive")
        ts = [c.timestamp for c in self.candles]
        for a, b in zip(ts, ts[1:]):
            if b - a != self.interval_ms:
                if b <= a:
                    raise CandleValidationError(f"timestamps not strictly increasing at {b}")
                raise GapError(list(range(a + self.interval_ms, b, self.interval_ms)))

    def __len__(self) -> int:
        return len(self.candles)

    @property
    def start(self) -> int:
        return self.candles[0].timestamp

    @property
    def end(self) -> int:
        return self.candles[-1].timestamp

    def index_at(self, timestamp: int) -> int | None:
        """Index of the candle closing exactly at ``timestamp``."""
        if not self.candles:
            return None
        off = timestamp - self.candles[0].timestamp
        if off < 0 or off % self.interval_ms:
            return None
        i = off // self.interval_ms
        return i if i < len(self.candles) else None

    def floor_index(self, timestamp: int) -> int | None:
        """Index of the last candle closing at or before ``timestamp``."""
        if not self.candles or timestamp < self.candles[0].timestamp:
            return None
        i = (timestamp - self.candles[0].timestamp) // self.interval_ms
        return min(i, len(self.candles) - 1)

    def upto(self, timestamp: int) -> "PairSeries":
        i = self.floor_index(timestamp)
        cs = () if i is None else self.candles[: i + 1]
        return PairSeries(self.pair_id, self.interval_ms, cs)

    @cached_property
    def oc_high(self) -> list[Decimal]:
        return [c.open if c.open > c.close else c.close for c in self.candles]

    @cached_property
    def oc_low(self) -> list[Decimal]:
        return [c.open if c.open < c.close else c.close for c in self.candles]

    @cached_property
    def volume_prefix(self) -> list[Decimal]:
        out = [Decimal(0)]
        acc = Decimal(0)
        for c in self.candles:
            acc += c.volume
            out.append(acc)
        return out


Source = Union[IO[bytes], IO[str], bytes, str, os.PathLike]


def _read_text(source: Source) -> str:
    if isinstance(source, os.PathLike):
        return Path(source).read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _rows_csv(text: str) -> Iterable[tuple[int, dict[str, str]]]:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [f for f in FIELDS if f not in header]
    if missing:
        raise ParseError(0, f"header missing columns {missing}")
    for n, row in enumerate(reader, 1):
        yield n, row


def _rows_jsonl(text: str) -> Iterable[tuple[int, dict[str, object]]]:
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_float=Decimal)
        except json.JSONDecodeError as exc:
            raise ParseError(n, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(n, "expected a JSON object")
        yield n, obj


def _candle_from_row(n: int, row: dict) -> Candle:
    try:
        ts_raw = row["timestamp"]
        ts = int(D(str(ts_raw)))
        if D(str(ts_raw)) != ts:
            raise ParseError(n, f"non-integer timestamp {ts_raw!r}")
        vals = [D(str(row[k]).strip()) for k in FIELDS[1:]]
    except KeyError as exc:
        raise ParseError(n, f"missing field {exc.args[0]!r}") from None
    except (InvalidOperation, ValueError, TypeError):
        raise ParseError(n, "unparseable numeric field") from None
    try:
        return Candle(ts, *vals)
    except CandleValidationError as exc:
        raise CandleValidationError(str(exc), row=n) from None


def ingest_series(
    source: Source,
    format: str = "csv",
    pair_id: str = "UNKNOWN",
    interval_ms: int | None = None,
) -> PairSeries:
    """Parse, validate and sort candles from a CSV or JSON-lines stream.

    Raises ParseError (with row index) for malformed rows,
    CandleValidationError for OHLC violations, DuplicateTimestampError and
    GapError for spacing problems.
    """
    text = _read_text(source)
    if format == "csv":
        rows = _rows_csv(text)
    elif format in ("jsonl", "json-lines", "json_lines"):
        rows = _rows_jsonl(text)
    else:
        raise ValueError(f"unsupported format {format!r}")
    candles = [_candle_from_row(n, row) for n, row in rows]
    candles.sort(key=lambda c: c.timestamp)
    seen = [c.timestamp for c in candles]
    dupes = sorted({a for a, b in zip(seen, seen[1:]) if a == b})
    if dupes:
        raise DuplicateTimestampError(f"duplicate timestamps: {dupes}")
    if interval_ms is None:
        if len(candles) >= 2:
            interval_ms = min(b - a for a, b in zip(seen, seen[1:]))
        else:
            interval_ms = DEFAULT_INTERVAL_MS
    return PairSeries(pair_id, interval_ms, tuple(candles))


def serialize_series(series: PairSeries, format: str = "csv") -> bytes:
    """Inverse of :func:`ingest_series`."""
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for c in series.candles:
            d = c.to_dict()
            w.writerow([d[k] for k in FIELDS])
        return buf.getvalue().encode("utf-8")
    if format in ("jsonl", "json-lines", "json_lines"):
        lines = [json.dumps(c.to_dict(), sort_keys=False) for c in series.candles]
        return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
    raise ValueError(f"unsupported format {format!r}")


def make_series(pair_id: str, interval_ms: int, candles: Sequence[Candle]) -> PairSeries:
    return PairSeries(pair_id, interval_ms, tuple(candles))
