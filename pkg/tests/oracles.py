"""Independent reference implementations the tests compare against."""

from __future__ import annotations

import math
import random
from decimal import Decimal

from gridloop.enums import OrderKind, Side
from gridloop.exchange.orders import Order
from gridloop.exchange.sim import ExchangeSim, SimConfig
from gridloop.market_data.candles import Candle
from gridloop.numeric import D, QUANTUM

from conftest import T0

MIN = 60_000


# -- fills ---------------------------------------------------------------------

def fires(kind: OrderKind, side: Side, price: Decimal, c: Candle) -> bool:
    touched_low = c.low <= price
    touched_high = c.high >= price
    if kind is OrderKind.STOP:
        return touched_high if side is Side.BUY else touched_low
    return touched_low if side is Side.BUY else touched_high


def expected_fills(orders: list[Order], c: Candle) -> set[str]:
    hit = {o.order_id for o in orders if fires(o.kind, o.side, o.price, c)}
    if any(o.kind is OrderKind.STOP and o.order_id in hit for o in orders):
        hit -= {o.order_id for o in orders if o.kind is OrderKind.TAKE_PROFIT}
    return hit


def random_candle(rng: random.Random, t: int, around: Decimal = D(100)) -> Candle:
    pts = sorted(around + D(rng.randint(-1000, 1000)) / 100 for _ in range(4))
    lo, hi = pts[0], pts[-1]
    o, cl = pts[1], pts[2]
    if rng.random() < 0.5:
        o, cl = cl, o
    return Candle(t, o, hi, lo, cl, D(rng.randint(1, 10_000)))


def random_orders(rng: random.Random, n: int, pair: str = "X", tag: str = "") -> list[Order]:
    out = []
    for j in range(n):
        kind = rng.choice([OrderKind.LIMIT, OrderKind.STOP, OrderKind.TAKE_PROFIT])
        side = rng.choice([Side.BUY, Side.SELL])
        price = D(100) + D(rng.randint(-1200, 1200)) / 100
        qty = D(rng.randint(2, 500)) / 100  # keeps notional above the default 1.0 minimum
        out.append(Order(f"{tag}o{j}", pair, kind, side, qty, price))
    return out


def fill_mismatch(rng: random.Random) -> str | None:
    """One random (order set, candle) instance; returns a description on mismatch."""
    sim = ExchangeSim(SimConfig(initial_capital=D(10**6)))
    orders = random_orders(rng, rng.randint(1, 12))
    for o in orders:
        sim.submit(Order(o.order_id, o.pair, o.kind, o.side, o.qty, o.price), 0)
    c = random_candle(rng, T0 + MIN)
    want = expected_fills(orders, c)
    fills = sim.match_candle("X", c)
    got = {f.order_id for f in fills}
    if got != want:
        return f"candle {c} orders {[(o.kind.value, o.side.value, o.price) for o in orders]}: {got} != {want}"
    for f in fills:
        if not c.low <= f.price <= c.high:
            return f"fill {f.fill_id} at {f.price} outside [{c.low}, {c.high}]"
        o = next(o for o in orders if o.order_id == f.order_id)
        # a limit that was already marketable for the whole bar fills at the bar's best price
        if o.kind is OrderKind.LIMIT and f.price != min(max(o.price, c.low), c.high):
            return f"limit {o.order_id} filled at {f.price} not {o.price}"
    return None


# -- ledger --------------------------------------------------------------------

def conservation_gap(sim: ExchangeSim) -> Decimal:
    """cash + value at mark + fees + funding - initial minus (realized + unrealized), from raw fields."""
    led = sim.ledger
    value = sum((D(p.qty * sim.marks[k]).quantize(QUANTUM) for k, p in led.positions.items()), D(0))
    cost = sum((p.cost for p in led.positions.values()), D(0))
    lhs = led.cash + value + led.fees + led.funding - led.initial_capital
    return lhs - (led.realized + value - cost)


def ledger_run(rng: random.Random, steps: int = 12) -> list[Decimal]:
    """Random order / candle / funding sequence; returns the gap after every step.

    Also reconciles cash against an independent running sum of fills and funding.
    """
    cfg = SimConfig(initial_capital=D(rng.randint(1_000, 100_000)), maker_bps=D(rng.randint(0, 5)),
                    taker_bps=D(rng.randint(5, 10)), slippage_bps=D(rng.randint(0, 20)))
    sim = ExchangeSim(cfg)
    cash = cfg.initial_capital
    gaps = []
    t = T0
    price = D(100)
    n_fills = 0
    for s in range(steps):
        t += MIN
        c = random_candle(rng, t, price)
        price = c.close
        roll = rng.random()
        if roll < 0.5:
            for o in random_orders(rng, rng.randint(1, 4), tag=f"s{s}"):
                sim.submit(o, t)
        elif roll < 0.7 and "X" in sim.last_price:
            qty = D(rng.randint(1, 300)) / 100
            sim.submit(Order(f"m{s}", "X", OrderKind.MARKET, rng.choice([Side.BUY, Side.SELL]), qty), t)
        sim.match_candle("X", c)
        if rng.random() < 0.3 and sim.ledger.positions:
            rate = D(rng.randint(-100, 100)) / 100_000
            cash += sim.apply_funding(t, {"X": rate})
        for f in sim.fills[n_fills:]:
            cash -= f.side.sign * (f.price * f.qty).quantize(QUANTUM) + f.fee
        n_fills = len(sim.fills)
        if rng.random() < 0.3:
            sim.set_mark("X", c.close + D(rng.randint(-50, 50)) / 100)
        gaps.append(conservation_gap(sim))
        gaps.append(sim.ledger.cash - cash)
    return gaps


# -- metrics -------------------------------------------------------------------

def mdd_brute(values: list[Decimal]) -> Decimal:
    worst = D(0)
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            if values[i] > 0:
                worst = max(worst, (values[i] - values[j]) / values[i])
    return worst


# -- constraint closed forms ----------------------------------------------------

def cascade_closed_form(q_max: float, a: float, c_m: float, c_f: float) -> float:
    return q_max / (a * c_m * c_f)


def breach_closed_form(p_peak: float, p_before: float, phi: float) -> float:
    return math.log(p_peak / p_before) / math.log(1 + phi)


def trend_closed_form(delta: float, p_entry: float, phi: float) -> float:
    return math.log(1 + delta / p_entry) / math.log(1 + phi)
