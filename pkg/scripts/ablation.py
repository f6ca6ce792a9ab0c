"""Escalation ablation on the 90-day multi-regime market.

Prints one row per optimization cycle plus the prototype baseline, showing
how drawdown and return move as the loop escalates from parameters to
functions.
"""

import argparse
from pathlib import Path

from gridloop.runtime.config import load_config
from gridloop.runtime.optimize import market_simulator, optimize

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "ablation.yaml"))
    ap.add_argument("--cycle-log", default=None)
    args = ap.parse_args()

    cfg = load_config(args.config)
    market = cfg.load_market()
    simulate = market_simulator(market, cfg.sim, cfg.detector, cfg.profile, cfg.start, cfg.end)
    out = optimize(
        cfg.params, simulate, seeds=cfg.seeds, stochastic=cfg.stochastic, risk=cfg.risk, box=cfg.box,
        objective=cfg.objective, acceptance=cfg.acceptance, max_cycles=cfg.max_cycles,
        stop_after_passes=cfg.stop_after_passes, extra_free=cfg.extra_free,
    )
    print(f"{'variant':<44} {'mdd':>8} {'return':>9} passed")
    print(f"{'prototype':<44} {float(out.baseline['mdd']):8.4f} {float(out.baseline['total_return']):9.4f}")
    for c in out.cycles:
        label = f"{c.index} {c.level} {dict(c.change) or ''}"
        v = c.verdict_detail
        print(f"{label:<44} {float(v['mdd']):8.4f} {float(v['total_return']):9.4f} {c.passed}")
    if args.cycle_log:
        Path(args.cycle_log).write_text(out.cycle_log_jsonl())


if __name__ == "__main__":
    main()
