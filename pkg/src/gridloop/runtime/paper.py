"""Paper trading against a connector, with stateless recovery.

The trader keeps no trading state of its own between cycles: every cycle
starts from the connector's account view and open-order listing.  Killing the
process and starting a new trader therefore resumes exactly where the old one
stopped, and resubmitted orders are absorbed by their idempotency keys.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Protocol, TypeVar

from gridloop.exchange.faults import ExchangeFault
from gridloop.exchange.orders import Ack, Order
from gridloop.exchange.sim import AccountView, ExchangeSim, SimConfig
from gridloop.market_data.candles import Candle
from gridloop.market_data.snapshot import Market, MarketSnapshot
from gridloop.params import DAY_MS, BotParams
from gridloop.runtime.execution import RetryPolicy, engine_cycle, execute_batch, params_resolver

log = logging.getLogger(__name__)

T = TypeVar("T")


class ConnectivityTerminal(RuntimeError):
    """The circuit breaker kept reopening; the exchange is considered unreachable."""


@dataclass(frozen=True)
class ConnectorContract:
    timeout_ms: int = 2_000
    retry: RetryPolicy = RetryPolicy()
    rate_budget: int | None = None  # requests per minute the client allows itself


class Connector(Protocol):
    def fetch_klines(self, pair: str, start: int, end: int, now: int) -> list[Candle]: ...

    def fetch_snapshot(self, now: int) -> MarketSnapshot: ...

    def submit(self, order: Order, now: int) -> Ack: ...

    def cancel(self, order_id: str, now: int) -> Ack: ...

    def fetch_account(self, now: int) -> AccountView: ...


class FixtureConnector:
    """Exchange stand-in that replays a recorded market through the simulator.

    Exchange time advances lazily: any call at ``now`` first matches every
    candle up to ``now``, so the market keeps moving while no trader is
    attached.
    """

    def __init__(self, market: Market, sim_config: SimConfig | None = None, volume_window_ms: int = DAY_MS):
        self.market = market
        self.sim = ExchangeSim(sim_config or SimConfig(), {p: market.filters_for(p) for p in market.series})
        self.volume_window_ms = volume_window_ms
        self._stamps = market.timestamps()
        self._pos = 0
        self._index = {p: {c.timestamp: c for c in s.candles} for p, s in market.series.items()}

    @property
    def clock(self) -> list[int]:
        return list(self._stamps)

    def _advance(self, now: int) -> None:
        while self._pos < len(self._stamps) and self._stamps[self._pos] <= now:
            t = self._stamps[self._pos]
            for pair in sorted(self.market.series):
                candle = self._index[pair].get(t)
                if candle is not None:
                    self.sim.match_candle(pair, candle)
            snap = self.market.snapshot_at(t, self.volume_window_ms)
            for pair, q in snap.quotes.items():
                self.sim.set_mark(pair, q.mark)
            if self.sim.is_funding_time(t):
                self.sim.apply_funding(t, {p: self.market.funding_rate(p, t) for p in snap.quotes})
            self.sim.record_equity(t)
            self._pos += 1

    def _request(self, now: int, op: str, key: str) -> None:
        self._advance(now)
        self.sim.requests += 1
        self.sim.faults.check(now, op, key)

    def fetch_klines(self, pair: str, start: int, end: int, now: int) -> list[Candle]:
        self._request(now, "klines", pair)
        series = self.market.series[pair]
        return [c for c in series.candles if start <= c.timestamp <= min(end, now)]

    def fetch_snapshot(self, now: int) -> MarketSnapshot:
        self._request(now, "snapshot", "market")
        return self.market.snapshot_at(now, self.volume_window_ms)

    def submit(self, order: Order, now: int) -> Ack:
        self._advance(now)
        return self.sim.submit(order, now)

    def cancel(self, order_id: str, now: int) -> Ack:
        self._advance(now)
        return self.sim.cancel(order_id, now)

    def fetch_account(self, now: int) -> AccountView:
        self._advance(now)
        return self.sim.snapshot_account(now)


@dataclass
class CycleLog:
    t: int
    status: str  # ok | partial | skipped | idle
    engine_ns: int = 0
    total_ns: int = 0
    n_actions: int = 0
    error: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"t": self.t, "status": self.status, "engine_ns": self.engine_ns, "total_ns": self.total_ns,
                "n_actions": self.n_actions, "error": self.error}


@dataclass
class PaperTrader:
    connector: Connector
    params: BotParams | Mapping[str, BotParams]
    contract: ConnectorContract = ConnectorContract()
    breaker_threshold: int = 3
    breaker_cooldown: int = 5
    terminal_after: int = 4
    actions: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    cycles: list[CycleLog] = field(default_factory=list)
    _failures: int = 0
    _idle_left: int = 0
    _openings: int = 0

    def __post_init__(self) -> None:
        self._params_for = params_resolver(self.params)

    def _call(self, fn: Callable[[], T]) -> T:
        err: ExchangeFault | None = None
        for _ in range(self.contract.retry.max_attempts):
            try:
                return fn()
            except ExchangeFault as exc:
                err = exc
        assert err is not None
        raise err

    @property
    def breaker_open(self) -> bool:
        return self._idle_left > 0

    def run_cycle(self, t: int) -> CycleLog:
        if self._idle_left > 0:
            self._idle_left -= 1
            rec = CycleLog(t, "idle", error="circuit open")
            self.cycles.append(rec)
            return rec
        t0 = time.perf_counter_ns()
        try:
            snapshot = self._call(lambda: self.connector.fetch_snapshot(t))
            account = self._call(lambda: self.connector.fetch_account(t))
        except ExchangeFault as exc:
            return self._skip(t, f"{type(exc).__name__}: {exc}")
        e0 = time.perf_counter_ns()
        batch = engine_cycle(account.to_bot_state(), snapshot, self._params_for, t)
        engine_ns = time.perf_counter_ns() - e0
        self.actions.extend(a.to_record(t) for a in batch.actions)
        self.events.extend(e.to_record() for e in batch.events)
        report = execute_batch(self.connector, batch, t, self.contract.retry)
        status = "ok" if report.complete else "partial"
        rec = CycleLog(t, status, engine_ns, time.perf_counter_ns() - t0, len(batch.actions),
                       "; ".join(f"{o}: {e}" for o, e in report.failed))
        self.cycles.append(rec)
        self._failures = 0
        self._openings = 0
        log.debug("cycle %d %s engine %.3f ms", t, status, engine_ns / 1e6)
        return rec

    def _skip(self, t: int, error: str) -> CycleLog:
        rec = CycleLog(t, "skipped", error=error)
        self.cycles.append(rec)
        self._failures += 1
        log.warning("cycle %d skipped: %s", t, error)
        if self._failures >= self.breaker_threshold:
            self._failures = 0
            self._openings += 1
            if self._openings >= self.terminal_after:
                raise ConnectivityTerminal(f"circuit breaker opened {self._openings} times in a row at {t}")
            self._idle_left = self.breaker_cooldown
            log.warning("circuit breaker open for %d cycles", self.breaker_cooldown)
        return rec

    def run(self, clock: Iterable[int]) -> None:
        for t in clock:
            self.run_cycle(t)

    def action_log_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.actions)

    def cycle_log_jsonl(self) -> str:
        return "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in self.cycles)

    def latencies_ms(self) -> list[float]:
        return [c.engine_ns / 1e6 for c in self.cycles if c.status in ("ok", "partial")]
