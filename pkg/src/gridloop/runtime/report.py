"""Run artifacts on disk and the per-pair report built from them."""

from __future__ import annotations

import csv
import io
import json
from decimal import Decimal
from pathlib import Path
from typing import Callable

from gridloop.metrics import performance as perf
from gridloop.metrics.feedback import Feedback
from gridloop.metrics.record import RunRecord
from gridloop.numeric import D
from gridloop.params import DAY_MS

RUN_FILES = ("run.json", "equity.csv", "pair_pnl.csv", "trade_log.jsonl")
TABLE_COLUMNS = ("pair", "arr_pct", "sharpe", "mdd_pct", "n_pairs", "trading_frequency")
UNDEFINED = "NA"


class MissingInputError(FileNotFoundError):
    pass


def write_run(out_dir: Path | str, record: RunRecord, feedback: Feedback) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "period": list(record.period),
        "initial_capital": format(record.initial_capital, "f"),
        "profile": feedback.profile,
        "pairs": sorted(record.pair_pnl),
    }
    (out / "run.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    (out / "equity.csv").write_text(record.equity_csv())
    (out / "pair_pnl.csv").write_text(record.pair_pnl_csv())
    (out / "trade_log.jsonl").write_text(record.trade_log_jsonl())
    (out / "action_log.jsonl").write_text(record.action_log_jsonl())
    (out / "engine_events.jsonl").write_text(
        "".join(json.dumps(e, sort_keys=True) + "\n" for e in record.engine_events)
    )
    (out / "feedback.json").write_text(feedback.to_json())
    return out


def _fmt(v: Decimal | None, scale: Decimal = D(1), places: str = "0.0001") -> str:
    if v is None:
        return UNDEFINED
    return format((v * scale).quantize(D(places)), "f")


def _defined(fn: Callable[[], Decimal]) -> Decimal | None:
    try:
        return fn()
    except perf.UndefinedMetricError:
        return None


def curve_row(label: str, curve: list[tuple[int, Decimal]], period: tuple[int, int], profile: str,
              n_fills: int, n_pairs: int) -> dict[str, str]:
    """One table row from an equity curve, using the same metric functions as the feedback."""
    days = perf.ANNUALIZATION_DAYS[profile]
    values = [v for _, v in curve]
    period_days = D(period[1] - period[0]) / DAY_MS
    daily = perf.simple_returns(perf.sample_curve(curve, DAY_MS))
    tf = None if period_days <= 0 else D(n_fills) / period_days
    return {
        "pair": label,
        "arr_pct": _fmt(_defined(lambda: perf.arr(values, period_days, days)), D(100)),
        "sharpe": _fmt(_defined(lambda: perf.sharpe(daily, periods_per_year=days))),
        "mdd_pct": _fmt(_defined(lambda: perf.mdd(values)), D(100)),
        "n_pairs": str(n_pairs),
        "trading_frequency": _fmt(tf),
    }


def _read(log_dir: Path, name: str) -> str:
    p = log_dir / name
    if not p.exists():
        raise MissingInputError(f"missing run artifact {p}")
    return p.read_text()


def build_report(log_dir: Path | str) -> dict[str, str]:
    """File name -> contents of every report artifact; raises MissingInputError."""
    log_dir = Path(log_dir)
    meta = json.loads(_read(log_dir, "run.json"))
    equity_rows = list(csv.DictReader(io.StringIO(_read(log_dir, "equity.csv"))))
    pnl_rows = list(csv.DictReader(io.StringIO(_read(log_dir, "pair_pnl.csv"))))
    fills = [json.loads(line) for line in _read(log_dir, "trade_log.jsonl").splitlines() if line.strip()]

    period = (int(meta["period"][0]), int(meta["period"][1]))
    capital = D(meta["initial_capital"])
    profile = meta["profile"]
    pairs = list(meta["pairs"])
    # per-pair curves start from an equal split of the account
    base = capital / len(pairs) if pairs else capital
    curves: dict[str, list[tuple[int, Decimal]]] = {p: [] for p in pairs}
    for r in pnl_rows:
        curves[r["pair"]].append((int(r["timestamp"]), base + D(r["pnl"])))
    n_fills = {p: 0 for p in pairs}
    for f in fills:
        n_fills[f["pair"]] = n_fills.get(f["pair"], 0) + 1

    table = [curve_row(p, curves[p], period, profile, n_fills[p], int(n_fills[p] > 0)) for p in pairs]
    total = [(int(r["timestamp"]), D(r["equity"])) for r in equity_rows]
    traded = sum(1 for p in pairs if n_fills[p] > 0)
    table.append(curve_row("ALL", total, period, profile, len(fills), traded))

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(table)

    eq = io.StringIO()
    ew = csv.writer(eq, lineterminator="\n")
    ew.writerow(["timestamp", "pair", "equity"])
    for p in pairs:
        for t, v in curves[p]:
            ew.writerow([t, p, format(v, "f")])
    for t, v in total:
        ew.writerow([t, "ALL", format(v, "f")])

    tx = io.StringIO()
    tw = csv.writer(tx, lineterminator="\n")
    tw.writerow(["timestamp", "pair", "side", "price", "qty", "kind", "realized_pnl"])
    for f in sorted(fills, key=lambda f: (f["pair"], f["timestamp"], f["fill_id"])):
        tw.writerow([f["timestamp"], f["pair"], f["side"], f["price"], f["qty"], f["kind"], f["realized_pnl"]])

    return {"metrics.csv": buf.getvalue(), "equity_curves.csv": eq.getvalue(), "transactions.csv": tx.getvalue()}


def write_report(log_dir: Path | str, out_dir: Path | str | None = None) -> list[Path]:
    out = Path(out_dir) if out_dir is not None else Path(log_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in build_report(log_dir).items():
        (out / name).write_text(text)
        written.append(out / name)
    return written

