"""Command line entry point.

Exit codes: 0 success, 2 config or input error, 3 acceptance failure,
4 connectivity terminal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from gridloop.market_data.candles import IngestError, ingest_series, serialize_series
from gridloop.metrics.feedback import assemble_feedback
from gridloop.runtime.backtest import run_backtest
from gridloop.runtime.config import RunConfig, RunConfigError, load_config
from gridloop.runtime.optimize import market_simulator, optimize
from gridloop.runtime.paper import ConnectivityTerminal, ConnectorContract, FixtureConnector, PaperTrader
from gridloop.runtime.report import MissingInputError, write_report, write_run

EXIT_OK, EXIT_CONFIG, EXIT_ACCEPTANCE, EXIT_CONNECTIVITY = 0, 2, 3, 4

log = logging.getLogger("gridloop")


def _overrides(pairs: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise RunConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(value)
    return out


def _config(args: argparse.Namespace) -> RunConfig:
    sets = _overrides(args.set or [])
    if args.profile is not None:
        sets["profile"] = args.profile
    if args.output_dir is not None:
        sets["output_dir"] = args.output_dir
    if getattr(args, "max_cycles", None) is not None:
        sets["max_cycles"] = args.max_cycles
    return load_config(args.config, sets)


def _out_dir(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    return p if p.is_absolute() else Path(cfg.base_dir) / p


def cmd_ingest(args: argparse.Namespace) -> int:
    series = ingest_series(Path(args.input), args.format, args.pair, args.interval_ms)
    data = serialize_series(series, "csv")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_bytes(data)
    print(json.dumps({"pair": series.pair_id, "candles": len(series), "interval_ms": series.interval_ms,
                      "start": series.start if len(series) else None,
                      "end": series.end if len(series) else None}))
    return EXIT_OK


def cmd_backtest(args: argparse.Namespace) -> int:
    cfg = _config(args)
    market = cfg.load_market()
    res = run_backtest(market, cfg.params_for_run(), cfg.sim, start=cfg.start, end=cfg.end, retry=cfg.retry)
    fb = assemble_feedback(res.record, market, cfg.detector, cfg.profile)
    out = write_run(_out_dir(cfg), res.record, fb)
    summary = {k: (None if v is None else format(v, "f")) for k, v in fb.metrics.items()}
    print(json.dumps({"out": str(out), "metrics": summary, "events": len(fb.events)}, sort_keys=True))
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if cfg.pair_params:
        raise RunConfigError("optimize tunes one shared parameter record; remove pair_params")
    market = cfg.load_market()
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    cycle_log = out / "cycle_log.jsonl"
    cycle_log.write_text("")
    simulate = market_simulator(market, cfg.sim, cfg.detector, cfg.profile, cfg.start, cfg.end)
    result = optimize(
        cfg.params, simulate, seeds=cfg.seeds, stochastic=cfg.stochastic, risk=cfg.risk, box=cfg.box,
        objective=cfg.objective, acceptance=cfg.acceptance, max_cycles=cfg.max_cycles,
        stop_after_passes=cfg.stop_after_passes, extra_free=cfg.extra_free, cycle_log=cycle_log,
    )
    (out / "final_params.json").write_text(json.dumps(result.params.to_dict(), sort_keys=True, indent=1) + "\n")
    (out / "constraints.json").write_text(
        json.dumps([c.to_dict() for c in result.constraints], sort_keys=True, indent=1) + "\n"
    )
    (out / "search_audit.json").write_text(json.dumps(result.audits, sort_keys=True) + "\n")
    if result.terminal is not None:
        (out / "terminal_report.json").write_text(json.dumps(result.terminal, sort_keys=True, indent=1) + "\n")
    print(json.dumps({"passed": result.passed, "cycles": len(result.cycles), "out": str(out)}, sort_keys=True))
    return EXIT_OK if result.passed else EXIT_ACCEPTANCE


def cmd_paper_trade(args: argparse.Namespace) -> int:
    cfg = _config(args)
    market = cfg.load_market()
    connector = FixtureConnector(market, cfg.sim, cfg.params.volume_window_ms)
    trader = PaperTrader(
        connector, cfg.params_for_run(), ConnectorContract(retry=cfg.retry),
        cfg.paper.breaker_threshold, cfg.paper.breaker_cooldown, cfg.paper.terminal_after,
    )
    clock = [t for t in connector.clock if (cfg.start is None or t >= cfg.start) and (cfg.end is None or t <= cfg.end)]
    if cfg.paper.cycles is not None:
        clock = clock[: cfg.paper.cycles]
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    code = EXIT_OK
    try:
        trader.run(clock)
    except ConnectivityTerminal as exc:
        log.error("%s", exc)
        code = EXIT_CONNECTIVITY
    (out / "paper_action_log.jsonl").write_text(trader.action_log_jsonl())
    (out / "paper_cycle_log.jsonl").write_text(trader.cycle_log_jsonl())
    (out / "paper_trade_log.jsonl").write_text(connector.sim.trade_log_jsonl())
    lat = sorted(trader.latencies_ms())
    summary = {
        "cycles": len(trader.cycles),
        "skipped": sum(c.status == "skipped" for c in trader.cycles),
        "median_engine_ms": lat[len(lat) // 2] if lat else None,
        "out": str(out),
    }
    print(json.dumps(summary, sort_keys=True))
    return code


def cmd_report(args: argparse.Namespace) -> int:
    written = write_report(args.logs, args.out)
    print(json.dumps({"written": [str(p) for p in written]}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridloop", description="Grid bot simulation and closed-loop tuning.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="validate and normalize a candle file")
    ing.add_argument("input")
    ing.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    ing.add_argument("--pair", default="UNKNOWN")
    ing.add_argument("--interval-ms", type=int, default=None)
    ing.add_argument("--out", default=None)
    ing.set_defaults(fn=cmd_ingest)

    for name, fn, extra in (
        ("backtest", cmd_backtest, False),
        ("optimize", cmd_optimize, True),
        ("paper-trade", cmd_paper_trade, False),
    ):
        p = sub.add_parser(name)
        p.add_argument("config", help="YAML run config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key, dotted for nested keys (repeatable)")
        p.add_argument("--profile", choices=["crypto", "index_futures"], default=None)
        p.add_argument("--output-dir", default=None)
        if extra:
            p.add_argument("--max-cycles", type=int, default=None)
        p.set_defaults(fn=fn)

    rep = sub.add_parser("report", help="per-pair tables and series from a run directory")
    rep.add_argument("logs")
    rep.add_argument("--out", default=None)
    rep.set_defaults(fn=cmd_report)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (RunConfigError, IngestError, MissingInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
