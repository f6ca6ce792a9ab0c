import random

import pytest
from hypothesis import given, strategies as st

from gridloop.enums import OrderKind, OrderStatus, PositionSide, Side
from gridloop.exchange.faults import FaultInjector, FaultProfile, RateLimitFault, TimeoutFault
from gridloop.exchange.orders import Order, OrderError
from gridloop.exchange.sim import ConfigError, ExchangeSim, SimConfig
from gridloop.market_data.candles import Candle
from gridloop.numeric import D

import oracles
from conftest import MIN, T0


def _candle(i, o, h, l, c, v=1000):
    return Candle(T0 + i * MIN, D(o), D(h), D(l), D(c), D(v))


def _limit(oid, side, qty, price, kind=OrderKind.LIMIT):
    return Order(oid, "X", kind, Side(side), D(qty), D(price))


class TestSubmit:
    def test_limit_open(self):
        sim = ExchangeSim()
        ack = sim.submit(_limit("a", "buy", 1, 90), T0)
        assert ack.status is OrderStatus.OPEN and not ack.duplicate
        assert [o.order_id for o in sim.open_orders()] == ["a"]

    def test_rate_limit(self):
        sim = ExchangeSim(SimConfig(faults=FaultProfile(rate_limit=10, rate_window_ms=MIN)))
        for j in range(10):
            sim.submit(_limit(f"o{j}", "buy", 1, 90), T0)
        with pytest.raises(RateLimitFault):
            sim.submit(_limit("o10", "buy", 1, 90), T0)
        # next window resets the budget
        assert sim.submit(_limit("o11", "buy", 1, 90), T0 + MIN).status is OrderStatus.OPEN

    def test_market_slippage(self):
        sim = ExchangeSim(SimConfig(slippage_bps=D(10)))
        sim.match_candle("X", _candle(1, 100, 100, 100, 100))
        sim.submit(Order("m", "X", OrderKind.MARKET, Side.BUY, D(2)), T0 + MIN)
        assert sim.fills[-1].price == D("100.10")
        assert sim.fills[-1].liquidity == "taker"

    def test_min_notional_rejected(self):
        ack = ExchangeSim().submit(_limit("a", "buy", "0.001", 90), T0)
        assert ack.status is OrderStatus.REJECTED and ack.reason == "min_notional"

    def test_duplicate_id(self):
        sim = ExchangeSim()
        sim.submit(_limit("a", "buy", 1, 90), T0)
        ack = sim.submit(_limit("a", "buy", 1, 90), T0)
        assert ack.duplicate and len(sim.open_orders()) == 1

    def test_order_invariants(self):
        with pytest.raises(OrderError):
            Order("m", "X", OrderKind.MARKET, Side.BUY, D(1), D(100))
        with pytest.raises(OrderError):
            Order("l", "X", OrderKind.LIMIT, Side.BUY, D(1))
        o = _limit("a", "buy", 1, 90)
        o.transition(OrderStatus.CANCELLED)
        with pytest.raises(OrderError):
            o.transition(OrderStatus.FILLED)


class TestMatch:
    def test_limit_touched(self):
        sim = ExchangeSim()
        sim.submit(_limit("a", "buy", 1, 90), T0)
        fills = sim.match_candle("X", _candle(1, 100, 101, 89, 95))
        assert [(f.order_id, f.price, f.liquidity) for f in fills] == [("a", D(90), "maker")]

    def test_limit_not_touched(self):
        sim = ExchangeSim()
        sim.submit(_limit("a", "buy", 1, 90), T0)
        assert sim.match_candle("X", _candle(1, 100, 101, "90.01", 95)) == []

    def test_stop_wins_over_take_profit(self):
        sim = ExchangeSim(SimConfig(slippage_bps=D(0)))
        sim.submit(_limit("e", "buy", 1, 100), T0)
        sim.match_candle("X", _candle(1, 100, 100, 100, 100))
        sim.submit(_limit("tp", "sell", 1, 105, OrderKind.TAKE_PROFIT), T0 + MIN)
        sim.submit(_limit("sl", "sell", 1, 95, OrderKind.STOP), T0 + MIN)
        fills = sim.match_candle("X", _candle(2, 100, 106, 94, 100))
        assert [f.order_id for f in fills] == ["sl"]
        assert fills[0].price == D(95)

    def test_stop_gap_fills_at_open(self):
        sim = ExchangeSim(SimConfig(slippage_bps=D(0)))
        sim.submit(_limit("e", "buy", 1, 100), T0)
        sim.match_candle("X", _candle(1, 100, 100, 100, 100))
        sim.submit(_limit("sl", "sell", 1, 95, OrderKind.STOP), T0 + MIN)
        fills = sim.match_candle("X", _candle(2, 90, 91, 88, 89))
        assert fills[0].price == D(90)

    def test_clock_must_advance(self):
        sim = ExchangeSim()
        sim.match_candle("X", _candle(2, 100, 100, 100, 100))
        with pytest.raises(ValueError):
            sim.match_candle("X", _candle(1, 100, 100, 100, 100))

    @pytest.mark.parametrize("seed", range(10))
    def test_fuzz_against_predicates(self, seed):
        rng = random.Random(seed)
        for _ in range(100):
            assert oracles.fill_mismatch(rng) is None


def _long(sim, qty=10, price=100, side="buy"):
    sim.submit(_limit("e", side, qty, price), T0)
    sim.match_candle("X", _candle(1, price, price, price, price))


class TestFunding:
    def test_no_positions(self):
        assert ExchangeSim().apply_funding(T0, {"X": D("0.0001")}) == 0

    def test_long_pays(self):
        sim = ExchangeSim()
        _long(sim)
        cash = sim.ledger.cash
        assert sim.apply_funding(T0, {"X": D("0.0001")}) == D("-0.10")
        assert sim.ledger.cash - cash == D("-0.10")

    def test_short_receives(self):
        sim = ExchangeSim()
        _long(sim, side="sell")
        assert sim.apply_funding(T0, {"X": D("0.0001")}) == D("0.10")


class TestAccount:
    def test_initial(self):
        view = ExchangeSim(SimConfig(initial_capital=D(5000))).snapshot_account()
        assert view.cash == D(5000) and view.positions == {} and view.open_orders == ()

    def test_after_buy(self):
        sim = ExchangeSim()
        _long(sim, qty=5)
        view = sim.snapshot_account()
        assert D(10000) - view.cash == D("500.10")
        assert view.positions["X"].entry_price == D(100)
        assert view.positions["X"].qty == D(5)
        assert view.positions["X"].side is PositionSide.LONG

    def test_bot_state_rebuild(self):
        sim = ExchangeSim()
        _long(sim, qty=5)
        sim.submit(Order("X|1|exit|TAKE_PROFIT|sell|1", "X", OrderKind.TAKE_PROFIT, Side.SELL, D(5), D(110)), T0)
        state = sim.snapshot_account().to_bot_state()
        assert state.open_orders[0].role == "exit" and state.open_orders[0].level == 1


class TestFaults:
    def test_same_seed_same_schedule(self):
        prof = FaultProfile(seed=7, timeout_probability=0.3)
        runs = []
        for _ in range(2):
            inj = FaultInjector(prof)
            for j in range(200):
                try:
                    inj.check(T0 + j, "submit", f"k{j % 13}")
                except TimeoutFault:
                    pass
            runs.append(inj.fired)
        assert runs[0] == runs[1] and runs[0]

    def test_different_seed_differs(self):
        fired = []
        for seed in (1, 2):
            inj = FaultInjector(FaultProfile(seed=seed, timeout_probability=0.3))
            for j in range(200):
                try:
                    inj.check(T0 + j, "submit", f"k{j}")
                except TimeoutFault:
                    pass
            fired.append(inj.fired)
        assert fired[0] != fired[1]

    def test_processed_timeout_resubmit_is_duplicate(self):
        prof = FaultProfile(seed=0, timeout_probability=1.0)
        sim = ExchangeSim(SimConfig(faults=prof))
        seen = []
        for _ in range(20):
            try:
                seen.append(sim.submit(_limit("a", "buy", 1, 90), T0))
            except TimeoutFault as exc:
                seen.append(exc.processed)
        assert len(sim.orders) <= 1
        assert len([o for o in sim.open_orders() if o.order_id == "a"]) <= 1

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SimConfig(maker_bps=D(6), taker_bps=D(5))
        with pytest.raises(ValueError):
            FaultProfile(timeout_probability=1.5)


@given(st.integers(0, 10**6))
def test_conservation(seed):
    assert all(g == 0 for g in oracles.ledger_run(random.Random(seed)))


@given(st.integers(0, 10**6))
def test_fills_in_range_and_fees_monotone(seed):
    rng = random.Random(seed)
    sim = ExchangeSim(SimConfig(slippage_bps=D(rng.randint(0, 50))))
    fees = []
    for i in range(1, 8):
        for o in oracles.random_orders(rng, 3, tag=f"{i}-"):
            sim.submit(o, T0 + i * MIN)
        c = oracles.random_candle(rng, T0 + i * MIN)
        for f in sim.match_candle("X", c):
            assert c.low <= f.price <= c.high
        fees.append(sim.ledger.fees)
    assert fees == sorted(fees)
