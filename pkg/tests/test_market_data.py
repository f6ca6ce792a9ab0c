import random
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from gridloop.market_data.candles import (
    CandleValidationError,
    DuplicateTimestampError,
    GapError,
    ParseError,
    ingest_series,
    serialize_series,
)
from gridloop.market_data.indicators import (
    InsufficientDataError,
    UnknownIndicatorError,
    hl_range_volatility,
    indicator_registry_lookup,
    oc_range_volatility,
    volatility,
)
from gridloop.market_data.snapshot import MarketSnapshot, PairQuote, dump_snapshot, load_snapshot, qualify_pairs
from gridloop.market_data.synthetic import random_walk, series_from_closes
from gridloop.numeric import D
from gridloop.params import BotParams

from conftest import MIN, T0, series_of

HEADER = "timestamp,open,high,low,close,volume\n"


def _csv(rows):
    return HEADER + "".join(",".join(map(str, r)) + "\n" for r in rows)


ROWS = [
    (T0 + 60_000, 100, 101, 99, 100.5, 10),
    (T0 + 120_000, 100.5, 102, 100, 101, 12),
    (T0 + 180_000, 101, 101.5, 100.2, 100.8, 9),
]


class TestIngest:
    def test_three_rows(self):
        s = ingest_series(_csv(ROWS), "csv", "X")
        assert len(s) == 3
        assert s.interval_ms == 60_000
        assert s.candles[1].high == D("102")

    def test_high_below_open_names_row(self):
        bad = list(ROWS)
        bad[1] = (T0 + 120_000, 100.5, 100.4, 100, 100.2, 12)
        with pytest.raises(CandleValidationError) as ei:
            ingest_series(_csv(bad), "csv", "X")
        assert ei.value.row == 2

    def test_shuffled_equals_sorted(self):
        shuffled = [ROWS[2], ROWS[0], ROWS[1]]
        assert ingest_series(_csv(shuffled), "csv", "X") == ingest_series(_csv(ROWS), "csv", "X")

    def test_malformed_row_index(self):
        bad = list(ROWS)
        bad[2] = (T0 + 180_000, "abc", 101.5, 100.2, 100.8, 9)
        with pytest.raises(ParseError) as ei:
            ingest_series(_csv(bad), "csv", "X")
        assert ei.value.row == 3

    def test_duplicates_rejected(self):
        with pytest.raises(DuplicateTimestampError):
            ingest_series(_csv(ROWS + [ROWS[0]]), "csv", "X")

    def test_gap_lists_missing(self):
        with pytest.raises(GapError) as ei:
            ingest_series(_csv([ROWS[0], ROWS[2]]), "csv", "X", interval_ms=60_000)
        assert ei.value.missing == [T0 + 120_000]

    def test_jsonl(self):
        s = ingest_series(_csv(ROWS), "csv", "X")
        again = ingest_series(serialize_series(s, "jsonl"), "jsonl", "X")
        assert again == s


class TestVolatility:
    def test_constant_series_zero(self):
        s = series_of([(100, 100, 100, 100)] * 5)
        assert volatility(s, s.end, 4 * MIN) == 0

    def test_three_values(self):
        s = series_of([(100, 104, 100, 104), (104, 110, 104, 110)])
        assert volatility(s, s.end, MIN) == D(10) / D(110)

    def test_single_candle(self):
        s = series_of([(95, 101, 94, 100)])
        assert volatility(s, s.end, 0) == D("0.05")

    def test_ignores_wicks(self):
        s = series_of([(95, 150, 50, 100)])
        assert volatility(s, s.end, 0) == D("0.05")

    def test_window_not_covered(self):
        s = series_of([(100, 100, 100, 100)] * 3)
        with pytest.raises(InsufficientDataError):
            volatility(s, s.end, 3 * MIN)

    def test_unaligned_time_rounds_down(self):
        s = series_of([(100, 104, 100, 104), (104, 110, 104, 110)])
        assert volatility(s, s.end + 30_000, MIN) == volatility(s, s.end, MIN)


class TestRegistry:
    def test_oc_is_volatility(self):
        s = series_of([(100, 104, 100, 104), (104, 110, 104, 110)])
        assert indicator_registry_lookup("oc_range_volatility")(s, s.end, MIN) == volatility(s, s.end, MIN)

    def test_hl_at_least_oc(self):
        s = series_of([(100, 103, 98, 101), (101, 106, 100, 105), (105, 108, 104, 104)])
        hl = indicator_registry_lookup("hl_range_volatility")(s, s.end, 2 * MIN)
        # by hand: (108 - 98) / 104 vs (105 - 100) / 104
        assert hl == D(10) / D(104)
        assert oc_range_volatility(s, s.end, 2 * MIN) == D(5) / D(104)
        assert hl >= oc_range_volatility(s, s.end, 2 * MIN)

    def test_unknown_name(self):
        with pytest.raises(UnknownIndicatorError) as ei:
            indicator_registry_lookup("nonexistent")
        assert "oc_range_volatility" in str(ei.value)
        assert "rolling_volume" in ei.value.available


def _snapshot(n: int, seed: int):
    rng = random.Random(seed)
    quotes, series, truth = {}, {}, {}
    for j in range(n):
        pair = f"P{j}"
        closes = random_walk(8, seed * 100 + j, sigma=rng.uniform(0.001, 0.03))
        s = series_from_closes(pair, closes, MIN)
        vol = D(rng.randint(0, 2_000_000))
        series[pair] = s
        quotes[pair] = PairQuote(s.candles[-1].close, s.candles[-1].close, vol)
        # independent Φ: open/close range over the last 5 candles divided by the final close
        window = s.candles[-5:]
        vals = [c.open for c in window] + [c.close for c in window]
        truth[pair] = (vol, (max(vals) - min(vals)) / window[-1].close)
    end = next(iter(series.values())).end
    return MarketSnapshot(end, quotes, series, n), truth


class TestQualify:
    def test_vacuous(self):
        snap, _ = _snapshot(10, 1)
        assert qualify_pairs(snap, BotParams(tau_ms=4 * MIN)) == frozenset(snap.quotes)

    def test_excludes_when_one_conjunct_fails(self):
        # Φ = 0.04 from a single candle 100 -> 104 closing at 100
        s = series_of([(104, 104, 100, 100)], pair="A")
        snap = MarketSnapshot(s.end, {"A": PairQuote(D(100), D(100), D(10**6))}, {"A": s}, 1)
        p = BotParams(tau_ms=0, volume_req=D(10**5), volatility_req=D("0.05"))
        assert qualify_pairs(snap, p) == frozenset()
        assert qualify_pairs(snap, p.replace(volatility_req=D("0.04"))) == {"A"}

    def test_uncovered_window_skipped(self):
        s = series_of([(100, 101, 99, 100)], pair="A")
        snap = MarketSnapshot(s.end, {"A": PairQuote(D(100), D(100), D(1))}, {"A": s}, 1)
        assert qualify_pairs(snap, BotParams(tau_ms=MIN)) == frozenset()

    @pytest.mark.parametrize("seed", range(5))
    def test_brute_force_50(self, seed):
        snap, truth = _snapshot(50, seed)
        v_req, phi_req = D(1_000_000), D("0.02")
        p = BotParams(tau_ms=4 * MIN, volume_req=v_req, volatility_req=phi_req)
        expect = {k for k, (v, phi) in truth.items() if v >= v_req and phi >= phi_req}
        assert qualify_pairs(snap, p) == expect

    def test_snapshot_round_trip(self):
        snap, _ = _snapshot(4, 2)
        again = load_snapshot(dump_snapshot(snap), snap.series)
        assert again.quotes == snap.quotes and again.as_of == snap.as_of


prices = st.decimals(min_value=1, max_value=1000, places=2, allow_nan=False, allow_infinity=False)
bars = st.lists(st.tuples(prices, prices), min_size=1, max_size=12)


def _bars_to_series(pairs, scale=D(1)):
    rows = [(o * scale, max(o, c) * scale, min(o, c) * scale, c * scale) for o, c in pairs]
    return series_of(rows)


class TestProperties:
    @given(bars, st.decimals(min_value="0.01", max_value=100, places=2))
    def test_scale_invariance(self, pairs, k):
        a = _bars_to_series(pairs)
        b = _bars_to_series(pairs, k)
        w = (len(pairs) - 1) * MIN
        assert abs(volatility(a, a.end, w) - volatility(b, b.end, w)) < D("1e-20")

    @given(bars, prices, prices)
    def test_window_extension_monotone(self, pairs, o, c):
        # prepend a candle; C(t_e) unchanged, range can only widen
        longer = _bars_to_series([(o, c)] + pairs)
        short = _bars_to_series(pairs)
        w = (len(pairs) - 1) * MIN
        assert volatility(longer, longer.end, w + MIN) >= volatility(short, short.end, w)

    @given(st.integers(0, 50), st.decimals(0, 2_000_000, places=0), st.decimals(0, "0.05", places=3),
           st.decimals(0, 2_000_000, places=0), st.decimals(0, "0.05", places=3))
    def test_qualify_subset(self, seed, v1, f1, v2, f2):
        snap, _ = _snapshot(6, seed)
        lo = BotParams(tau_ms=4 * MIN, volume_req=min(v1, v2), volatility_req=min(f1, f2))
        hi = BotParams(tau_ms=4 * MIN, volume_req=max(v1, v2), volatility_req=max(f1, f2))
        assert qualify_pairs(snap, hi) <= qualify_pairs(snap, lo)

    @given(bars, st.sampled_from(["csv", "jsonl"]))
    def test_round_trip(self, pairs, fmt):
        s = _bars_to_series(pairs)
        assert ingest_series(serialize_series(s, fmt), fmt, s.pair_id, s.interval_ms) == s

    @given(bars)
    def test_hl_dominates_oc(self, pairs):
        s = _bars_to_series(pairs)
        w = (len(pairs) - 1) * MIN
        assert hl_range_volatility(s, s.end, w) >= oc_range_volatility(s, s.end, w)
