"""Logs produced by one simulated or paper-traded run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any

from gridloop.exchange.orders import Fill
from gridloop.params import BotParams
from gridloop.strategy.actions import parse_order_id


@dataclass
class RunRecord:
    period: tuple[int, int]
    initial_capital: Decimal
    params: BotParams
    equity_curve: list[tuple[int, Decimal]] = field(default_factory=list)
    fills: list[Fill] = field(default_factory=list)
    actions: list[dict[str, Any]] = field(default_factory=list)
    engine_events: list[dict[str, Any]] = field(default_factory=list)
    deployments: dict[str, list[tuple[Decimal, Decimal]]] = field(default_factory=dict)
    skipped_cycles: list[dict[str, Any]] = field(default_factory=list)
    pair_pnl: dict[str, list[tuple[int, Decimal]]] = field(default_factory=dict)

    def trade_log_jsonl(self) -> str:
        return "".join(json.dumps(f.to_record(), sort_keys=True) + "\n" for f in self.fills)

    def action_log_jsonl(self) -> str:
        return "".join(json.dumps(a, sort_keys=True) + "\n" for a in self.actions)

    def equity_csv(self) -> str:
        return "timestamp,equity\n" + "".join(f"{t},{format(v, 'f')}\n" for t, v in self.equity_curve)

    def pair_pnl_csv(self) -> str:
        rows = sorted((t, p, v) for p, curve in self.pair_pnl.items() for t, v in curve)
        return "timestamp,pair,pnl\n" + "".join(f"{t},{p},{format(v, 'f')}\n" for t, p, v in rows)

    def trade_log_digest(self) -> str:
        return hashlib.sha256(self.trade_log_jsonl().encode()).hexdigest()

    def entry_fills(self, pair: str | None = None) -> list[Fill]:
        out = []
        for f in self.fills:
            meta = parse_order_id(f.order_id)
            if meta is not None and meta["role"] == "entry" and (pair is None or f.pair == pair):
                out.append(f)
        return out
