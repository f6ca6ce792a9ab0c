import random
from decimal import Decimal

import pytest
from hypothesis import assume, given, strategies as st

from gridloop.enums import OrderKind, Side
from gridloop.exchange.orders import Fill
from gridloop.exchange.sim import ExchangeSim, SimConfig
from gridloop.metrics import performance as perf
from gridloop.metrics.efficiency import EfficiencyReport, efficiency_ratio
from gridloop.metrics.feedback import Feedback, FeedbackIntegrityError, assemble_feedback
from gridloop.numeric import D, QUANTUM
from gridloop.runtime.backtest import run_backtest

import oracles
import scenarios

UndefinedMetricError = perf.UndefinedMetricError


class TestArr:
    def test_flat(self):
        assert perf.arr([D(100)] * 5, 30) == 0

    def test_one_year(self):
        assert perf.arr([D(100), D(110)], 365, 365) == D("0.10")

    def test_half_year(self):
        assert perf.arr([D(100), D(110)], D("182.5"), 365) == D("0.20")

    def test_index_year(self):
        assert perf.arr([D(100), D(110)], 252, 252) == D("0.10")

    def test_zero_initial(self):
        with pytest.raises(UndefinedMetricError):
            perf.arr([D(0), D(10)], 10)


class TestSharpe:
    def test_constant_is_undefined(self):
        with pytest.raises(UndefinedMetricError):
            perf.sharpe([D("0.01")] * 4, rf=D("0.01"))

    def test_two_returns(self):
        assert perf.sharpe([D("0.01"), D("0.03")]) == D(2)

    def test_annualized(self):
        assert perf.sharpe([D("0.01"), D("0.03")], periods_per_year=4) == D(4)

    @given(st.lists(st.decimals("-0.1", "0.1", places=4), min_size=2, max_size=30),
           st.decimals("-0.05", "0.05", places=4))
    def test_translation_invariant(self, rs, c):
        assume(perf.pstdev(rs) > 0)
        a = perf.sharpe(rs)
        b = perf.sharpe([r + c for r in rs], rf=c)
        assert abs(a - b) < D("1e-20")


class TestSortino:
    def test_no_downside(self):
        with pytest.raises(UndefinedMetricError):
            perf.sortino([D("0.01"), D("0.02")])

    def test_fixture(self):
        dd = (D("0.02") ** 2 / 2).sqrt()
        assert perf.downside_deviation([D("-0.02"), D("0.04")]) == dd
        assert perf.sortino([D("-0.02"), D("0.04")]) == D("0.01") / dd

    @given(st.lists(st.decimals("-0.1", "0.1", places=4), min_size=2, max_size=30))
    def test_sortino_dominates_when_downside_smaller(self, rs):
        assume(any(r < 0 for r in rs) and perf.pstdev(rs) > 0)
        if perf.downside_deviation(rs) <= perf.pstdev(rs) and sum(rs) >= 0:
            assert perf.sortino(rs) >= perf.sharpe(rs)


class TestMdd:
    def test_increasing(self):
        assert perf.mdd([D(1), D(2), D(3)]) == 0

    def test_fixture(self):
        assert perf.mdd([D(100), D(120), D(90), D(130)]) == D("0.25")

    @pytest.mark.parametrize("seed", range(5))
    def test_brute_force(self, seed):
        rng = random.Random(seed)
        for _ in range(40):
            curve = [D(rng.randint(1, 10_000)) / 100 for _ in range(rng.randint(1, 60))]
            assert perf.mdd(curve) == oracles.mdd_brute(curve)

    @given(st.lists(st.decimals("0.01", 1000, places=2), min_size=1, max_size=60), st.integers(1, 60))
    def test_prefix_and_range(self, curve, k):
        v = perf.mdd(curve)
        assert 0 <= v < 1
        assert v >= perf.mdd(curve[:k])


class TestUtilization:
    def test_never(self):
        assert perf.capital_utilization({"A": [(D(0), D(1000))] * 3}) == 0

    def test_constant(self):
        assert perf.capital_utilization({"A": [(D(500), D(1000))] * 4}) == D("0.5")

    def test_two_pairs(self):
        assert perf.capital_utilization({"A": [(D(200), D(1000))], "B": [(D(600), D(1000))]}) == D("0.4")


def _fills(seed: int) -> list[Fill]:
    """Random fills run through an exchange simulator so realized fields are consistent."""
    rng = random.Random(seed)
    sim = ExchangeSim(SimConfig(initial_capital=D(10**6)))
    t = oracles.T0
    for s in range(30):
        t += oracles.MIN
        for o in oracles.random_orders(rng, 3, pair=rng.choice("AB"), tag=f"{s}-"):
            sim.submit(o, t)
        c = oracles.random_candle(rng, t)
        for pair in "AB":
            sim.match_candle(pair, c)
    return sim.fills


def _pnl_per_capital_brute(fills) -> Decimal:
    # average-cost replay per pair, independent of the ledger
    book: dict[str, tuple[Decimal, Decimal]] = {}
    realized = invested = fees = D(0)
    for f in fills:
        fees += f.fee
        qty, cost = book.get(f.pair, (D(0), D(0)))
        sign = 1 if f.side is Side.BUY else -1
        notional = (f.price * f.qty).quantize(QUANTUM)
        if qty == 0 or (qty > 0) == (sign > 0):
            book[f.pair] = (qty + sign * f.qty, cost + sign * notional)
            continue
        closed = min(f.qty, abs(qty))
        removed = cost if closed == abs(qty) else (cost * closed / abs(qty)).quantize(QUANTUM)
        close_notional = notional if closed == f.qty else (f.price * closed).quantize(QUANTUM)
        realized += -sign * close_notional - removed
        invested += abs(removed)
        qty, cost = qty + sign * closed, cost - removed
        rest = f.qty - closed
        if rest:
            qty, cost = qty + sign * rest, cost + sign * (notional - close_notional)
        book[f.pair] = (qty, cost)
    return (realized - fees) / invested


@pytest.mark.parametrize("seed", range(8))
def test_pnl_per_capital_brute_force(seed):
    fills = _fills(seed)
    assert any(f.closed_cost > 0 for f in fills)
    assert perf.pnl_per_capital(fills) == _pnl_per_capital_brute(fills)


def test_win_rate_and_profit_factor():
    def fill(pnl, cost=D(100)):
        return Fill("f", "o", "A", Side.SELL, D(1), D(1), D(0), "maker", 0, OrderKind.LIMIT, D(pnl), cost, D(1))

    fills = [fill(5), fill(-2), fill(3), fill(0, D(0))]
    assert perf.win_rate(fills) == D(2) / 3
    assert perf.profit_factor(fills) == D(4)


class TestEfficiency:
    def test_formula(self):
        assert efficiency_ratio(D(10), D(1), D(5), D(5), 10) == D(100) / D(20)

    def test_monotone_and_bounded(self):
        etas = [efficiency_ratio(D(100), D(1), D(1000), D(1000), 10**k) for k in range(1, 7)]
        assert etas == sorted(etas) and len(set(etas)) == 6
        assert all(e < 100 for e in etas)
        assert abs(etas[-1] - 100) / 100 < D("0.01")

    def test_report(self):
        r = EfficiencyReport(D(2), D(1), D(0), D(1), 3, "wall_clock_s")
        assert r.eta == D("1.5") and r.limit == 2
        assert r.to_dict()["units"] == "wall_clock_s"


class TestFeedback:
    def test_quiet_period(self):
        cfg = scenarios.config("range")
        market = cfg.load_market()
        res = run_backtest(market, cfg.params.replace(volatility_req=D(1)), cfg.sim)
        fb = assemble_feedback(res.record, market)
        assert fb.n_fills == 0 and fb.events == ()
        assert fb.metrics["mdd"] == 0 and fb.metrics["total_return"] == 0
        assert fb.metrics["win_rate"] is None and "win_rate" in fb.undefined

    def test_crash_cascade(self):
        cfg = scenarios.config("case1_crash")
        market = cfg.load_market()
        res = run_backtest(market, cfg.params, cfg.sim)
        fb = assemble_feedback(res.record, market, cfg.detector)
        kinds = [e.kind for e in fb.events]
        assert kinds.count("drawdown_cascade") == 1
        ev = fb.events_of("drawdown_cascade")[0]
        assert D(ev.magnitudes["drawdown"]) >= cfg.detector.dd_trigger
        assert fb.to_json() == assemble_feedback(res.record, market, cfg.detector).to_json()
        assert Feedback.from_json(fb.to_json()).to_json() == fb.to_json()

    def test_integrity(self):
        cfg = scenarios.config("case1_crash")
        market = cfg.load_market()
        res = run_backtest(market, cfg.params, cfg.sim)
        res.record.period = (res.record.period[0], res.record.period[0] - 1)
        with pytest.raises(FeedbackIntegrityError):
            assemble_feedback(res.record, market)
