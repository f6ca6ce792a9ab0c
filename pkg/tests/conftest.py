from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import settings

from gridloop.market_data.candles import Candle, PairSeries
from gridloop.numeric import D

import scenarios

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

MIN = 60_000
T0 = 1_704_067_200_000


def candle(i: int, o, h, l, c, v="1000", interval: int = MIN) -> Candle:
    return Candle(T0 + (i + 1) * interval, D(str(o)), D(str(h)), D(str(l)), D(str(c)), D(str(v)))


def series_of(rows, pair: str = "X/USDT", interval: int = MIN) -> PairSeries:
    """rows: (open, high, low, close) tuples, one per consecutive bar."""
    return PairSeries(pair, interval, tuple(candle(i, *r, interval=interval) for i, r in enumerate(rows)))


@pytest.fixture
def tmp_out(tmp_path):
    return tmp_path / "out"


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so the escalation audit sees every cycle log of the session
    items.sort(key=lambda item: "test_acceptance.py" in item.nodeid)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    # a criterion that errors before reaching its verdict still gets a FAIL line
    if rep.when == "call" and rep.failed and "test_acceptance.py" in item.nodeid:
        n = int(item.name.split("_")[1])
        if not any(v.startswith(f"criterion {n:>2}:") for v in scenarios.VERDICTS):
            scenarios.VERDICTS.append(f"criterion {n:>2}: FAIL  {call.excinfo.typename}: {call.excinfo.value}")


def pytest_terminal_summary(terminalreporter):
    if scenarios.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in scenarios.VERDICTS:
            terminalreporter.write_line(line)


def dec(x) -> Decimal:
    return D(str(x))
