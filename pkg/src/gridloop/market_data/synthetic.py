"""Seeded synthetic markets for tests, scripts and desk-scale experiments.

Each generator returns price paths quantized to ``tick`` with open equal to the
previous close, so candles are contiguous.
"""

from __future__ import annotations

from decimal import Decimal
from typing import Sequence

import numpy as np

from gridloop.market_data.candles import Candle, PairSeries
from gridloop.market_data.snapshot import ExchangeFilters, Market
from gridloop.numeric import D, ceil_to_step, floor_to_step
from gridloop.params import DAY_MS, MINUTE_MS

EPOCH_2024 = 1_704_067_200_000  # 2024-01-01T00:00:00Z


def series_from_closes(
    pair: str,
    closes: Sequence[float],
    interval_ms: int,
    *,
    start_ms: int = EPOCH_2024,
    first_open: float | None = None,
    wick: Sequence[float] | float = 0.001,
    volume: Sequence[float] | float = 1_000_000.0,
    tick: Decimal = D("0.0001"),
) -> PairSeries:
    n = len(closes)
    wicks = [wick] * n if isinstance(wick, (int, float)) else list(wick)
    vols = [volume] * n if isinstance(volume, (int, float)) else list(volume)
    candles = []
    prev = closes[0] if first_open is None else first_open
    prev_d = floor_to_step(D(float(prev)), tick)
    for i, c in enumerate(closes):
        o = prev_d
        cl = floor_to_step(D(float(c)), tick)
        if cl <= 0:
            cl = tick
        hi = ceil_to_step(max(o, cl) * D(1 + float(wicks[i])), tick)
        lo = floor_to_step(min(o, cl) * D(max(1e-6, 1 - float(wicks[i]))), tick)
        if lo <= 0:
            lo = min(tick, o, cl)
        candles.append(Candle(start_ms + (i + 1) * interval_ms, o, hi, lo, cl, D(round(float(vols[i]), 2))))
        prev_d = cl
    return PairSeries(pair, interval_ms, tuple(candles))


def random_walk(n: int, seed: int, *, start: float = 100.0, sigma: float = 0.003, drift: float = 0.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    steps = rng.normal(drift, sigma, n)
    return start * np.exp(np.cumsum(steps))


def mean_reverting(n: int, seed: int, *, center: float = 100.0, sigma: float = 0.004, kappa: float = 0.15) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    v = 0.0
    for i in range(n):
        v = v * (1 - kappa) + rng.normal(0.0, sigma)
        x[i] = center * np.exp(v)
    return x


def crash_path(
    *,
    pre: int = 96,
    crash: int = 6,
    post: int = 60,
    depth: float = 0.55,
    start: float = 100.0,
    seed: int = 7,
    noise: float = 0.002,
) -> np.ndarray:
    """Oscillating range, a fast linear crash of ``depth``, then a flat tail."""
    base = mean_reverting(pre, seed, center=start, sigma=noise, kappa=0.3)
    last = base[-1]
    drop = last * (1 - depth)
    crash_leg = np.linspace(last, drop, crash + 1)[1:]
    tail = mean_reverting(post, seed + 1, center=drop, sigma=noise / 2, kappa=0.3)
    return np.concatenate([base, crash_leg, tail])


def surge_path(
    *,
    pre: int = 96,
    surge: int = 12,
    post: int = 48,
    height: float = 0.6,
    start: float = 100.0,
    seed: int = 11,
    noise: float = 0.002,
) -> np.ndarray:
    """Quiet range, then a persistent surge of ``height``, then a high plateau."""
    base = mean_reverting(pre, seed, center=start, sigma=noise, kappa=0.3)
    last = base[-1]
    top = last * (1 + height)
    leg = last * np.exp(np.linspace(0, np.log(1 + height), surge + 1)[1:])
    tail = mean_reverting(post, seed + 1, center=top, sigma=noise / 2, kappa=0.3)
    return np.concatenate([base, leg, tail])


def trend_path(
    n: int = 480,
    *,
    start: float = 100.0,
    drift: float = 0.0015,
    dip: float = 0.02,
    period: int = 24,
    seed: int = 5,
    noise: float = 0.0008,
) -> np.ndarray:
    """Sustained uptrend interrupted every ``period`` bars by a one-bar dip that is bought back within three bars."""
    rng = np.random.default_rng(seed)
    steps = drift + rng.normal(0, noise, n)
    for k in range(period // 2, n, period):
        steps[k] -= dip
        steps[k + 1 : k + 4] += dip / 3
    return start * np.exp(np.cumsum(steps))


def multi_regime_path(days: int = 90, *, bars_per_day: int = 24, seed: int = 3, start: float = 100.0) -> np.ndarray:
    """Alternating range-bound, trending and shock regimes."""
    rng = np.random.default_rng(seed)
    out: list[float] = []
    level = start
    n_total = days * bars_per_day
    regimes = ["range", "crash", "range", "trend", "range", "surge", "range", "trend", "range", "crash", "range"]
    per = n_total // len(regimes)
    for j, kind in enumerate(regimes):
        n = per if j < len(regimes) - 1 else n_total - per * (len(regimes) - 1)
        if kind == "range":
            seg = mean_reverting(n, int(rng.integers(1 << 30)), center=level, sigma=0.006, kappa=0.2)
        elif kind == "trend":
            seg = level * np.exp(np.linspace(0, 0.25, n) + rng.normal(0, 0.004, n))
        elif kind == "crash":
            k = max(2, n // 20)
            leg = level * np.exp(np.linspace(0, np.log(0.55), k + 1)[1:])
            rest = mean_reverting(n - k, int(rng.integers(1 << 30)), center=leg[-1], sigma=0.005, kappa=0.2)
            seg = np.concatenate([leg, rest])
        else:
            k = max(2, n // 15)
            leg = level * np.exp(np.linspace(0, np.log(1.5), k + 1)[1:])
            rest = mean_reverting(n - k, int(rng.integers(1 << 30)), center=leg[-1], sigma=0.005, kappa=0.2)
            seg = np.concatenate([leg, rest])
        out.extend(seg.tolist())
        level = float(seg[-1])
    return np.asarray(out)


def single_pair_market(pair: str, closes: Sequence[float], interval_ms: int, **kw) -> Market:
    return Market({pair: series_from_closes(pair, closes, interval_ms, **kw)})


def random_universe(
    n_pairs: int,
    n_bars: int,
    seed: int,
    *,
    interval_ms: int = 15 * MINUTE_MS,
) -> Market:
    """Many independent random-walk pairs with assorted price levels and volumes."""
    rng = np.random.default_rng(seed)
    series = {}
    ranks = {}
    filters = {}
    for j in range(n_pairs):
        pair = f"P{j:03d}/USDT"
        start = float(10 ** rng.uniform(-1, 4))
        sigma = float(rng.uniform(0.002, 0.02))
        closes = random_walk(n_bars, int(rng.integers(1 << 30)), start=start, sigma=sigma)
        vol = float(10 ** rng.uniform(4, 8))
        tick = _tick_for(start)
        series[pair] = series_from_closes(pair, closes, interval_ms, wick=sigma / 2, volume=vol, tick=tick)
        ranks[pair] = j + 1
        filters[pair] = ExchangeFilters(tick_size=tick, lot_size=D("0.000001"), min_notional=D("1"))
    return Market(series, mcap_rank=ranks, filters=filters)


def _tick_for(price: float) -> Decimal:
    if price >= 1000:
        return D("0.01")
    if price >= 1:
        return D("0.0001")
    return D("0.000001")


def days(n: float) -> int:
    return int(n * DAY_MS)
