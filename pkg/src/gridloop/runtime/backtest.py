"""Historical simulation: market data -> engine -> exchange simulator -> logs."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping

from gridloop.exchange.sim import ExchangeSim, SimConfig
from gridloop.market_data.snapshot import Market
from gridloop.metrics.record import RunRecord
from gridloop.numeric import ZERO
from gridloop.params import DAY_MS, BotParams
from gridloop.runtime.execution import (
    RetryPolicy,
    deployed_notional,
    engine_cycle,
    execute_batch,
    params_resolver,
)


@dataclass
class BacktestResult:
    record: RunRecord
    sim: ExchangeSim
    step_ns: list[int] = field(default_factory=list)  # wall time of each engine cycle


def run_backtest(
    market: Market,
    params: BotParams | Mapping[str, BotParams],
    sim_config: SimConfig | None = None,
    *,
    start: int | None = None,
    end: int | None = None,
    retry: RetryPolicy = RetryPolicy(),
) -> BacktestResult:
    sim_config = sim_config or SimConfig()
    params_for = params_resolver(params)
    base = params if isinstance(params, BotParams) else params_for(next(iter(sorted(market.series))))
    volume_window = base.volume_window_ms if isinstance(params, BotParams) else DAY_MS

    stamps = [t for t in market.timestamps() if (start is None or t >= start) and (end is None or t <= end)]
    period = (stamps[0], stamps[-1]) if stamps else (start or 0, start or 0)
    sim = ExchangeSim(sim_config, {p: market.filters_for(p) for p in market.series})
    record = RunRecord(period, sim_config.initial_capital, base)
    index = {p: {c.timestamp: c for c in s.candles} for p, s in market.series.items()}
    result = BacktestResult(record, sim)

    for t in stamps:
        for pair in sorted(market.series):
            candle = index[pair].get(t)
            if candle is not None:
                sim.match_candle(pair, candle)
        snapshot = market.snapshot_at(t, volume_window)
        for pair, q in snapshot.quotes.items():
            sim.set_mark(pair, q.mark)
        if sim.is_funding_time(t):
            sim.apply_funding(t, {p: market.funding_rate(p, t) for p in snapshot.quotes})

        state = sim.snapshot_account().to_bot_state()
        t0 = time.perf_counter_ns()
        batch = engine_cycle(state, snapshot, params_for, t)
        result.step_ns.append(time.perf_counter_ns() - t0)
        record.actions.extend(a.to_record(t) for a in batch.actions)
        record.engine_events.extend(e.to_record() for e in batch.events)

        report = execute_batch(sim, batch, t, retry)
        if not report.complete:
            record.skipped_cycles.append({"t": t, "failed": report.failed})

        record.equity_curve.append((t, sim.record_equity(t)))
        for pair in sorted(snapshot.quotes):
            pos = sim.ledger.positions.get(pair)
            dep = deployed_notional(pos.qty, sim.marks[pair]) if pos is not None else ZERO
            record.deployments.setdefault(pair, []).append((dep, params_for(pair).allocation))
            record.pair_pnl.setdefault(pair, []).append((t, sim.ledger.pair_pnl(pair, sim.marks.get(pair))))

    record.fills = list(sim.fills)
    return result
