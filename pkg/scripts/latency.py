"""Engine step latency per pair per cycle over a large synthetic universe."""

import argparse
import math
import statistics
import time

import gridloop.runtime.execution as execution
from gridloop.market_data.synthetic import random_universe
from gridloop.params import BotParams
from gridloop.runtime.backtest import run_backtest


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=213)
    ap.add_argument("--bars", type=int, default=120)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    market = random_universe(args.pairs, args.bars, args.seed)
    samples = []
    inner = execution.step

    def timed(*a):
        t0 = time.perf_counter_ns()
        out = inner(*a)
        samples.append(time.perf_counter_ns() - t0)
        return out

    execution.step = timed
    try:
        run_backtest(market, BotParams())
    finally:
        execution.step = inner
    ms = sorted(s / 1e6 for s in samples)
    p99 = ms[math.ceil(0.99 * len(ms)) - 1]
    print(f"pair-steps {len(ms)}  median {statistics.median(ms):.3f} ms  p99 {p99:.3f} ms  max {ms[-1]:.3f} ms")


if __name__ == "__main__":
    main()
