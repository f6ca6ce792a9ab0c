"""Candle-level exchange emulator.

Fill rules per candle (no partial fills, no queue model):

* LIMIT buy fills when ``low <= price`` at the limit price; sells mirror.
* STOP buy triggers when ``high >= price``, STOP sell when ``low <= price``;
  TAKE_PROFIT uses the opposite trigger direction.  Triggered orders fill as
  taker at the trigger price moved by slippage (a stop gapped through by the
  open fills from the open).
* Within one candle orders run stops -> limits -> take-profits, and a
  triggered stop on a pair suppresses that pair's take-profits.
* Every fill price is clamped into ``[low, high]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Mapping

from gridloop.enums import OrderKind, OrderStatus, PositionSide, Side
from gridloop.exchange.faults import FaultInjector, FaultProfile, TimeoutFault
from gridloop.exchange.ledger import AccountLedger
from gridloop.exchange.orders import Ack, Fill, Order
from gridloop.market_data.candles import Candle
from gridloop.market_data.snapshot import ExchangeFilters
from gridloop.numeric import D, ZERO, fx
from gridloop.params import HOUR_MS
from gridloop.strategy.actions import BotState, OrderView, PositionView, parse_order_id

BPS = Decimal(10_000)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    initial_capital: Decimal = D("10000")
    maker_bps: Decimal = D("2")
    taker_bps: Decimal = D("5")
    slippage_bps: Decimal = D("5")
    impact_k: Decimal = D("0")
    funding_interval_hours: int = 8
    faults: FaultProfile = FaultProfile()

    def __post_init__(self) -> None:
        if self.maker_bps < 0 or self.taker_bps < 0 or self.slippage_bps < 0 or self.impact_k < 0:
            raise ConfigError("fees, slippage and impact must be non-negative")
        if self.maker_bps > self.taker_bps:
            raise ConfigError("maker fee must not exceed taker fee")
        if self.initial_capital <= 0 or self.funding_interval_hours <= 0:
            raise ConfigError("initial capital and funding interval must be positive")

    @property
    def funding_interval_ms(self) -> int:
        return self.funding_interval_hours * HOUR_MS


@dataclass(frozen=True)
class AccountView:
    """Authoritative, read-only copy of the account at one instant."""

    cash: Decimal
    positions: Mapping[str, PositionView]
    open_orders: tuple[OrderView, ...]
    fees: Decimal
    funding: Decimal
    realized: Decimal
    equity: Decimal

    def to_bot_state(self) -> BotState:
        return BotState(positions=dict(self.positions), open_orders=self.open_orders)


def triggered(order: Order, candle: Candle) -> bool:
    p = order.price
    if order.kind is OrderKind.LIMIT or order.kind is OrderKind.TAKE_PROFIT:
        return candle.low <= p if order.side is Side.BUY else candle.high >= p
    if order.kind is OrderKind.STOP:
        return candle.high >= p if order.side is Side.BUY else candle.low <= p
    return False


def _clamp(price: Decimal, candle: Candle) -> Decimal:
    return min(max(price, candle.low), candle.high)


@dataclass
class ExchangeSim:
    config: SimConfig = field(default_factory=SimConfig)
    filters: Mapping[str, ExchangeFilters] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.ledger = AccountLedger(self.config.initial_capital)
        self.orders: dict[str, Order] = {}
        self._open: dict[str, dict[str, Order]] = {}
        self.fills: list[Fill] = []
        self.last_price: dict[str, Decimal] = {}
        self.marks: dict[str, Decimal] = {}
        self.pair_clock: dict[str, int] = {}
        self.last_volume: dict[str, Decimal] = {}
        self.faults = FaultInjector(self.config.faults)
        self.requests = 0

    # -- order entry -------------------------------------------------------

    def _filters(self, pair: str) -> ExchangeFilters:
        return self.filters.get(pair, ExchangeFilters())

    def _violation(self, order: Order) -> str:
        f = self._filters(order.pair)
        if f.lot_size > 0 and order.qty % f.lot_size != 0:
            return "lot_size"
        ref = order.price if order.price is not None else self.last_price.get(order.pair)
        if ref is None:
            return "no_last_price"
        if order.price is not None and f.tick_size > 0 and order.price % f.tick_size != 0:
            return "tick_size"
        if ref * order.qty < f.min_notional:
            return "min_notional"
        return ""

    def submit(self, order: Order, now: int) -> Ack:
        self.requests += 1
        lost = self.faults.check(now, "submit", order.order_id)
        known = self.orders.get(order.order_id)
        if known is not None:
            return Ack(order.order_id, known.status, duplicate=True)
        order.placed_at = now
        self.orders[order.order_id] = order
        reason = self._violation(order)
        if reason:
            order.transition(OrderStatus.REJECTED)
            ack = Ack(order.order_id, order.status, reason=reason)
        elif order.kind is OrderKind.MARKET:
            self._fill_market(order, now)
            ack = Ack(order.order_id, order.status)
        else:
            self._open.setdefault(order.pair, {})[order.order_id] = order
            ack = Ack(order.order_id, order.status)
        if lost:
            raise TimeoutFault(f"submit {order.order_id}: response lost", processed=True)
        return ack

    def cancel(self, order_id: str, now: int) -> Ack:
        self.requests += 1
        lost = self.faults.check(now, "cancel", order_id)
        order = self.orders.get(order_id)
        if order is None:
            ack = Ack(order_id, OrderStatus.REJECTED, reason="unknown_order")
        elif not order.is_open:
            ack = Ack(order_id, order.status, duplicate=True)
        else:
            order.transition(OrderStatus.CANCELLED)
            del self._open[order.pair][order_id]
            ack = Ack(order_id, order.status)
        if lost:
            raise TimeoutFault(f"cancel {order_id}: response lost", processed=True)
        return ack

    def _slippage(self, pair: str, qty: Decimal, price: Decimal, volume: Decimal | None) -> Decimal:
        s = self.config.slippage_bps / BPS
        if self.config.impact_k > 0 and volume:
            s += self.config.impact_k * qty / volume
        return s

    def _fill_market(self, order: Order, now: int) -> None:
        last = self.last_price[order.pair]
        s = self._slippage(order.pair, order.qty, last, self.last_volume.get(order.pair))
        price = fx(last * (1 + order.side.sign * s))
        self._book(order, price, "taker", now)

    # -- matching ----------------------------------------------------------

    def match_candle(self, pair: str, candle: Candle) -> list[Fill]:
        prev = self.pair_clock.get(pair)
        if prev is not None and candle.timestamp <= prev:
            raise ValueError(f"{pair}: candle {candle.timestamp} does not advance clock {prev}")
        self.pair_clock[pair] = candle.timestamp
        book = list(self._open.get(pair, {}).values())
        hit = [o for o in book if triggered(o, candle)]
        stops = [o for o in hit if o.kind is OrderKind.STOP]
        limits = [o for o in hit if o.kind is OrderKind.LIMIT]
        tps = [] if stops else [o for o in hit if o.kind is OrderKind.TAKE_PROFIT]
        fills = []
        for o in stops + limits + tps:
            fills.append(self._book(o, self._trigger_price(o, candle), self._liquidity(o), candle.timestamp))
        self.last_price[pair] = candle.close
        self.last_volume[pair] = candle.volume
        self.marks[pair] = candle.close
        return fills

    @staticmethod
    def _liquidity(order: Order) -> str:
        return "maker" if order.kind is OrderKind.LIMIT else "taker"

    def _trigger_price(self, order: Order, candle: Candle) -> Decimal:
        p = order.price
        if order.kind is OrderKind.LIMIT:
            return _clamp(p, candle)
        if order.kind is OrderKind.STOP:
            p = max(p, candle.open) if order.side is Side.BUY else min(p, candle.open)
        s = self._slippage(order.pair, order.qty, p, candle.volume)
        return _clamp(fx(p * (1 + order.side.sign * s)), candle)

    def _book(self, order: Order, price: Decimal, liquidity: str, t: int) -> Fill:
        bps = self.config.maker_bps if liquidity == "maker" else self.config.taker_bps
        fee = fx(fx(price * order.qty) * bps / BPS)
        eff = self.ledger.apply_fill(order.pair, order.side, price, order.qty, fee)
        order.transition(OrderStatus.FILLED)
        self._open.get(order.pair, {}).pop(order.order_id, None)
        fill = Fill(
            f"F{len(self.fills) + 1:08d}", order.order_id, order.pair, order.side, price, order.qty,
            fee, liquidity, t, order.kind, eff.realized, eff.closed_cost, eff.closed_qty,
        )
        self.fills.append(fill)
        return fill

    # -- funding, marks, equity --------------------------------------------

    def set_mark(self, pair: str, mark: Decimal) -> None:
        self.marks[pair] = mark

    def apply_funding(self, t: int, rates: Mapping[str, Decimal]) -> Decimal:
        """Longs pay positive rates, shorts receive them.  Returns the cash delta."""
        delta = ZERO
        for pair, pos in sorted(self.ledger.positions.items()):
            rate = rates.get(pair, ZERO)
            if rate == 0:
                continue
            notional = fx(abs(pos.qty) * self.marks[pair])
            paid = fx(rate * notional)
            if pos.qty < 0:
                paid = -paid
            self.ledger.pay_funding(pair, paid)
            delta -= paid
        return delta

    def is_funding_time(self, t: int) -> bool:
        return t % self.config.funding_interval_ms == 0

    def record_equity(self, t: int) -> Decimal:
        return self.ledger.record_equity(t, self.marks)

    def equity(self) -> Decimal:
        return self.ledger.equity(self.marks)

    def conservation_residual(self) -> Decimal:
        return self.ledger.conservation_residual(self.marks)

    # -- views -------------------------------------------------------------

    def open_orders(self, pair: str | None = None) -> list[Order]:
        pairs = [pair] if pair is not None else sorted(self._open)
        return [o for p in pairs for o in self._open.get(p, {}).values()]

    def snapshot_account(self, now: int | None = None) -> AccountView:
        if now is not None:
            self.requests += 1
            self.faults.check(now, "account", "snapshot")
        positions = {}
        for pair, pos in sorted(self.ledger.positions.items()):
            side = PositionSide.LONG if pos.qty > 0 else PositionSide.SHORT
            positions[pair] = PositionView(pair, side, abs(pos.qty), pos.entry_price)
        views = []
        for o in self.open_orders():
            meta = parse_order_id(o.order_id) or {}
            views.append(
                OrderView(o.order_id, o.pair, o.kind, o.side, o.price, o.qty,
                          meta.get("role", "entry"), meta.get("level", 0))
            )
        return AccountView(
            cash=self.ledger.cash,
            positions=positions,
            open_orders=tuple(sorted(views, key=lambda v: v.order_id)),
            fees=self.ledger.fees,
            funding=self.ledger.funding,
            realized=self.ledger.realized,
            equity=self.equity(),
        )

    def trade_log(self) -> Iterable[dict]:
        return (f.to_record() for f in self.fills)

    def trade_log_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trade_log())
