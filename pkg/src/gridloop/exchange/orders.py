"""Order and fill records held by the simulator."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Any

from gridloop.enums import OrderKind, OrderStatus, Side
from gridloop.numeric import to_str


class OrderError(ValueError):
    pass


_TRANSITIONS = {OrderStatus.OPEN: {OrderStatus.FILLED, OrderStatus.CANCELLED, OrderStatus.REJECTED}}


@dataclass
class Order:
    order_id: str
    pair: str
    kind: OrderKind
    side: Side
    qty: Decimal
    price: Decimal | None = None
    status: OrderStatus = OrderStatus.OPEN
    placed_at: int = 0

    def __post_init__(self) -> None:
        if (self.kind is OrderKind.MARKET) != (self.price is None):
            raise OrderError(f"{self.kind.value} order {self.order_id}: price must be set iff not MARKET")
        if self.qty <= 0:
            raise OrderError(f"order {self.order_id}: qty must be positive")
        if self.price is not None and self.price <= 0:
            raise OrderError(f"order {self.order_id}: price must be positive")

    def transition(self, status: OrderStatus) -> None:
        if status not in _TRANSITIONS.get(self.status, set()):
            raise OrderError(f"order {self.order_id}: illegal transition {self.status.value} -> {status.value}")
        self.status = status

    @property
    def is_open(self) -> bool:
        return self.status is OrderStatus.OPEN


@dataclass(frozen=True)
class Fill:
    fill_id: str
    order_id: str
    pair: str
    side: Side
    price: Decimal
    qty: Decimal
    fee: Decimal
    liquidity: str  # "maker" | "taker"
    timestamp: int
    kind: OrderKind
    realized_pnl: Decimal
    closed_cost: Decimal
    closed_qty: Decimal

    @property
    def notional(self) -> Decimal:
        return self.price * self.qty

    def to_record(self) -> dict[str, Any]:
        return {
            "fill_id": self.fill_id,
            "order_id": self.order_id,
            "pair": self.pair,
            "side": self.side.value,
            "price": to_str(self.price),
            "qty": to_str(self.qty),
            "fee": to_str(self.fee),
            "liquidity_flag": self.liquidity,
            "timestamp": self.timestamp,
            "kind": self.kind.value,
            "realized_pnl": to_str(self.realized_pnl),
        }


@dataclass(frozen=True)
class Ack:
    order_id: str
    status: OrderStatus
    duplicate: bool = False
    reason: str = ""
