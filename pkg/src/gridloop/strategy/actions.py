"""Engine-side state and the action batches it emits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Any, Mapping

from gridloop.enums import OrderKind, PositionSide, Side
from gridloop.numeric import to_str


class ActionKind(str, Enum):
    PLACE_LIMIT = "place_limit"
    PLACE_TAKE_PROFIT = "place_take_profit"
    PLACE_STOP = "place_stop"
    PLACE_MARKET = "place_market"
    CANCEL = "cancel"

    @property
    def order_kind(self) -> OrderKind | None:
        return {
            ActionKind.PLACE_LIMIT: OrderKind.LIMIT,
            ActionKind.PLACE_TAKE_PROFIT: OrderKind.TAKE_PROFIT,
            ActionKind.PLACE_STOP: OrderKind.STOP,
            ActionKind.PLACE_MARKET: OrderKind.MARKET,
        }.get(self)


_PHASE = {
    ActionKind.CANCEL: 0,
    ActionKind.PLACE_MARKET: 1,
    ActionKind.PLACE_LIMIT: 2,
    ActionKind.PLACE_TAKE_PROFIT: 3,
    ActionKind.PLACE_STOP: 4,
}

ROLE_ENTRY = "entry"
ROLE_EXIT = "exit"
ROLE_SWEEP = "sweep"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    pair: str
    order_id: str
    side: Side | None = None
    price: Decimal | None = None
    qty: Decimal | None = None
    level: int = 0
    reason: str = ""
    role: str = ROLE_ENTRY

    def sort_key(self) -> tuple:
        return (self.pair, _PHASE[self.kind], self.level, self.order_id)

    def to_record(self, cycle_id: int) -> dict[str, Any]:
        return {
            "cycle_id": cycle_id,
            "pair": self.pair,
            "action_kind": self.kind.value,
            "order_id": self.order_id,
            "side": None if self.side is None else self.side.value,
            "price": to_str(self.price),
            "qty": to_str(self.qty),
            "level": self.level,
            "role": self.role,
            "reason_code": self.reason,
        }


@dataclass(frozen=True)
class EngineEvent:
    """Risk or bookkeeping event raised by the engine during a step."""

    kind: str
    pair: str
    t: int
    detail: Mapping[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind, "pair": self.pair, "t": self.t, "detail": dict(self.detail)}


@dataclass(frozen=True)
class ActionBatch:
    cycle_id: int
    actions: tuple[Action, ...] = ()
    events: tuple[EngineEvent, ...] = ()

    @classmethod
    def build(cls, cycle_id: int, actions: list[Action], events: list[EngineEvent]) -> "ActionBatch":
        return cls(
            cycle_id,
            tuple(sorted(actions, key=Action.sort_key)),
            tuple(sorted(events, key=lambda e: (e.pair, e.kind))),
        )

    def to_jsonl(self) -> str:
        return "".join(json.dumps(a.to_record(self.cycle_id), sort_keys=True) + "\n" for a in self.actions)

    def entry_notional(self, pair: str, side: Side | None = None) -> Decimal:
        total = Decimal(0)
        for a in self.actions:
            if a.pair == pair and a.kind is ActionKind.PLACE_LIMIT and a.role == ROLE_ENTRY:
                if side is None or a.side is side:
                    total += a.price * a.qty
        return total


@dataclass(frozen=True)
class PositionView:
    pair: str
    side: PositionSide
    qty: Decimal
    entry_price: Decimal


@dataclass(frozen=True)
class OrderView:
    order_id: str
    pair: str
    kind: OrderKind
    side: Side
    price: Decimal | None
    qty: Decimal
    role: str = ROLE_ENTRY
    level: int = 0


@dataclass(frozen=True)
class BotState:
    """Engine view of the account.  Rebuilt from the exchange every cycle."""

    positions: Mapping[str, PositionView] = field(default_factory=dict)
    open_orders: tuple[OrderView, ...] = ()
    qualified: frozenset[str] = frozenset()
    phi: Mapping[str, Decimal] = field(default_factory=dict)

    def orders_for(self, pair: str) -> list[OrderView]:
        return [o for o in self.open_orders if o.pair == pair]


def order_id(pair: str, clock: int, role: str, side: Side, level: int, kind: OrderKind) -> str:
    """Deterministic client order id; doubles as the idempotency key."""
    return f"{pair}|{clock}|{role}|{kind.value}|{side.value}|{level}"


def parse_order_id(oid: str) -> dict[str, Any] | None:
    parts = oid.split("|")
    if len(parts) != 6:
        return None
    pair, clock, role, kind, side, level = parts
    return {"pair": pair, "clock": int(clock), "role": role, "kind": kind, "side": side, "level": int(level)}
