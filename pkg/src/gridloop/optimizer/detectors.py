"""Risk-event detectors run over a run's logs and market window."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from decimal import Decimal

from gridloop.market_data.candles import PairSeries
from gridloop.market_data.indicators import InsufficientDataError, indicator_registry_lookup
from gridloop.market_data.snapshot import Market
from gridloop.metrics.events import RiskEvent
from gridloop.metrics.record import RunRecord
from gridloop.numeric import ZERO, D
from gridloop.params import HOUR_MS, MINUTE_MS, BotParams
from gridloop.strategy.actions import parse_order_id
from gridloop.strategy.functions import funding_coefficient, market_cap_coefficient


@dataclass(frozen=True)
class DetectorConfig:
    dd_trigger: Decimal = D("0.5")
    w_trigger_ms: int = 30 * MINUTE_MS
    n_fills: int = 5
    capture_ratio: Decimal = D("0.5")
    breach_horizon_ms: int = 4 * HOUR_MS
    capture_horizon_ms: int | None = None  # None: until the end of the period

    def __post_init__(self) -> None:
        if not (0 < self.dd_trigger < 1) or not (0 < self.capture_ratio <= 1):
            raise ValueError("dd_trigger must be in (0, 1) and capture_ratio in (0, 1]")
        if self.w_trigger_ms <= 0 or self.n_fills < 1 or self.breach_horizon_ms <= 0:
            raise ValueError("detector windows and counts must be positive")


def _phi_at(series: PairSeries, t: int, params: BotParams) -> Decimal | None:
    fn = indicator_registry_lookup(params.volatility_estimator)
    i = series.floor_index(t)
    if i is None:
        return None
    try:
        return fn(series, series.candles[i].timestamp, params.tau_ms)
    except InsufficientDataError:
        return None


def _close_at(series: PairSeries, t: int) -> Decimal | None:
    i = series.floor_index(t)
    return None if i is None else series.candles[i].close


def _candles_between(series: PairSeries, lo: int, hi: int):
    return [c for c in series.candles if lo <= c.timestamp <= hi]


# -- drawdown cascade -----------------------------------------------------------

def detect_cascades(record: RunRecord, market: Market, cfg: DetectorConfig) -> list[RiskEvent]:
    """Equity drawdown >= dd_trigger inside a w_trigger window with dense entries on the falling side."""
    curve = record.equity_curve
    if len(curve) < 2:
        return []
    hits: list[tuple[int, int, Decimal]] = []  # (t_peak, t_trough, drawdown)
    window: deque[int] = deque()  # indices with decreasing equity
    for j, (t, v) in enumerate(curve):
        while window and curve[window[0]][0] < t - cfg.w_trigger_ms:
            window.popleft()
        while window and curve[window[-1]][1] <= v:
            window.pop()
        window.append(j)
        tp, vp = curve[window[0]]
        if vp > 0 and (vp - v) / vp >= cfg.dd_trigger:
            hits.append((tp, t, (vp - v) / vp))
    if not hits:
        return []

    # merge overlapping windows into episodes
    episodes: list[list] = []
    for tp, tt, dd in hits:
        if episodes and tp <= episodes[-1][1]:
            ep = episodes[-1]
            ep[1] = max(ep[1], tt)
            ep[2] = max(ep[2], dd)
        else:
            episodes.append([tp, tt, dd])

    params = record.params
    out = []
    for t0, t1, dd in episodes:
        for pair, series in sorted(market.series.items()):
            p0, p1 = _close_at(series, t0), _close_at(series, t1)
            if p0 is None or p1 is None or p0 == p1:
                continue
            falling = "buy" if p1 < p0 else "sell"
            n = sum(
                1 for f in record.entry_fills(pair)
                if t0 <= f.timestamp <= t1 and f.side.value == falling
            )
            if n < cfg.n_fills:
                continue
            c_m = market_cap_coefficient(market.mcap_rank.get(pair), len(market.series), params.market_cap)
            c_f = funding_coefficient(market.funding_rate(pair, t0), params.funding)
            out.append(
                RiskEvent(
                    "drawdown_cascade", pair, t0, t1,
                    {"drawdown": dd, "entry_fills": D(n), "price_move": abs(p1 - p0) / p0},
                    {"c_m": c_m, "c_f": c_f, "allocation": params.allocation, "falling_side": falling},
                )
            )
    return out


# -- boundary breach -------------------------------------------------------------

def detect_breaches(record: RunRecord, market: Market, cfg: DetectorConfig) -> list[RiskEvent]:
    """Highest sell level filled and price kept rising past it.

    The buy-side counterpart (deepest buy filled in a falling market) is the
    drawdown cascade and is left to :func:`detect_cascades`.
    """
    params = record.params
    placements: dict[tuple[str, int, str], dict] = defaultdict(dict)
    for a in record.actions:
        if a["action_kind"] != "place_limit" or a["role"] != "entry" or a["side"] != "sell":
            continue
        meta = parse_order_id(a["order_id"])
        placements[(a["pair"], meta["clock"], a["side"])][a["level"]] = a
    filled = {f.order_id: f for f in record.entry_fills()}

    found: dict[str, list[RiskEvent]] = defaultdict(list)
    end = record.period[1]
    for (pair, clock, side), levels in sorted(placements.items()):
        top = levels[max(levels)]
        fill = filled.get(top["order_id"])
        series = market.series.get(pair)
        if fill is None or series is None:
            continue
        level_price = D(top["price"])
        bars = _candles_between(series, clock + 1, min(clock + cfg.breach_horizon_ms, end))
        if not bars:
            continue
        p_before = _close_at(series, clock)
        phi = _phi_at(series, clock, params)
        if p_before is None or not phi:
            continue
        extreme = max(c.high for c in bars)
        if extreme <= level_price:
            continue
        ratio = extreme / p_before
        t1 = max(c.timestamp for c in bars)
        found[pair].append(
            RiskEvent(
                "boundary_breach", pair, clock, t1,
                {"p_peak": extreme, "p_before": p_before, "peak_ratio": ratio, "phi": phi},
                {"side": side, "level_price": level_price, "level": max(levels), "fill_t": fill.timestamp},
            )
        )

    out = []
    for pair, evs in sorted(found.items()):
        # one event per chained episode: keep the placement needing the widest grid
        group: list[RiskEvent] = []
        for ev in evs + [None]:
            if ev is not None and (not group or ev.t0 <= max(g.t1 for g in group)):
                group.append(ev)
                continue
            if group:
                out.append(max(group, key=_required_exponent))
            group = [ev] if ev is not None else []
    return out


def _required_exponent(ev: RiskEvent) -> Decimal:
    return ev.magnitudes["peak_ratio"].ln() / (1 + ev.magnitudes["phi"]).ln()


# -- premature exit ----------------------------------------------------------------

def detect_premature_exits(record: RunRecord, market: Market, cfg: DetectorConfig) -> list[RiskEvent]:
    """Profitable exits that captured too little of the move that followed them."""
    curve = record.equity_curve
    if len(curve) < 2 or curve[0][1] == 0:
        return []
    strategy_ret = (curve[-1][1] - curve[0][1]) / curve[0][1]
    start, end = record.period
    params = record.params
    out = []
    for pair, series in sorted(market.series.items()):
        p0, p1 = _close_at(series, start), _close_at(series, end)
        if p0 is None or p1 is None:
            continue
        exits = [f for f in record.fills if f.pair == pair and f.closed_cost > 0 and f.realized_pnl > 0]
        if not exits:
            continue
        long = exits[0].side.value == "sell"
        hold_ret = (p1 - p0) / p0 if long else (p0 - p1) / p0
        if strategy_ret >= hold_ret:
            continue
        captured = favorable = ZERO
        entries, moves, phis = [], [], []
        for f in exits:
            entry = f.closed_cost / f.closed_qty
            hi = end if cfg.capture_horizon_ms is None else min(end, f.timestamp + cfg.capture_horizon_ms)
            later = _candles_between(series, f.timestamp + 1, hi)
            if not later:
                continue
            best = max(c.high for c in later) if long else min(c.low for c in later)
            move = best - entry if long else entry - best
            if move <= 0:
                continue
            captured += abs(f.price - entry)
            favorable += move
            entries.append(entry)
            moves.append(move)
            phi = _phi_at(series, f.timestamp, params)
            if phi:
                phis.append(phi)
        if not moves or not phis:
            continue
        ratio = captured / favorable
        if ratio >= cfg.capture_ratio:
            continue
        out.append(
            RiskEvent(
                "premature_exit", pair, exits[0].timestamp, end,
                {
                    "delta_p_trend": sum(moves, ZERO) / len(moves),
                    "p_entry": sum(entries, ZERO) / len(entries),
                    "phi": sum(phis, ZERO) / len(phis),
                    "capture_ratio": ratio,
                },
                {"strategy_return": strategy_ret, "hold_return": hold_ret, "exits": len(moves)},
            )
        )
    return out


def engine_events(record: RunRecord) -> list[RiskEvent]:
    out = []
    for e in record.engine_events:
        if e["kind"] == "deviation_block":
            mag = {"deviation": D(e["detail"]["deviation"])}
        elif e["kind"] == "funding_deactivation":
            mag = {"funding_rate": abs(D(e["detail"]["funding_rate"]))}
        else:
            continue
        out.append(RiskEvent(e["kind"], e["pair"], e["t"], e["t"], mag))
    return out


def run_detectors(record: RunRecord, market: Market, cfg: DetectorConfig) -> list[RiskEvent]:
    events = (
        detect_cascades(record, market, cfg)
        + detect_breaches(record, market, cfg)
        + detect_premature_exits(record, market, cfg)
        + engine_events(record)
    )
    return sorted(events, key=lambda e: (e.t0, e.kind, e.pair))
