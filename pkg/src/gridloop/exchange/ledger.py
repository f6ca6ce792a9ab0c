"""Cash / position ledger kept in exact fixed-point arithmetic.

Positions carry a signed quantity and a signed cost basis (sum of
``side * notional`` of the opening fills).  With every cash movement quantized
to the fixed-point scale, the identity

    cash + sum(value_at_mark) + fees + funding - initial
        == realized + sum(value_at_mark - cost)

holds exactly after every fill and funding payment.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Mapping

from gridloop.enums import PositionSide, Side
from gridloop.numeric import ZERO, fx


class LedgerError(RuntimeError):
    pass


@dataclass
class Position:
    qty: Decimal = ZERO  # signed: > 0 long, < 0 short
    cost: Decimal = ZERO  # signed cost basis

    @property
    def side(self) -> PositionSide | None:
        if self.qty > 0:
            return PositionSide.LONG
        if self.qty < 0:
            return PositionSide.SHORT
        return None

    @property
    def entry_price(self) -> Decimal:
        return fx(self.cost / self.qty) if self.qty else ZERO


@dataclass
class FillEffect:
    realized: Decimal
    closed_qty: Decimal
    closed_cost: Decimal  # magnitude of cost basis released by the closing part


@dataclass
class AccountLedger:
    initial_capital: Decimal
    cash: Decimal = field(default=ZERO)
    positions: dict[str, Position] = field(default_factory=dict)
    fees: Decimal = ZERO
    funding: Decimal = ZERO
    realized: Decimal = ZERO
    pair_fees: dict[str, Decimal] = field(default_factory=lambda: defaultdict(Decimal))
    pair_funding: dict[str, Decimal] = field(default_factory=lambda: defaultdict(Decimal))
    pair_realized: dict[str, Decimal] = field(default_factory=lambda: defaultdict(Decimal))
    equity_curve: list[tuple[int, Decimal]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.cash == ZERO and not self.positions:
            self.cash = self.initial_capital

    def apply_fill(self, pair: str, side: Side, price: Decimal, qty: Decimal, fee: Decimal) -> FillEffect:
        if qty <= 0 or price <= 0 or fee < 0:
            raise LedgerError("fill needs positive qty/price and non-negative fee")
        sign = side.sign
        notional = fx(price * qty)
        self.cash -= sign * notional + fee
        self.fees += fee
        self.pair_fees[pair] += fee

        pos = self.positions.setdefault(pair, Position())
        realized = ZERO
        closed_qty = ZERO
        removed = ZERO
        if pos.qty == 0 or (pos.qty > 0) == (sign > 0):
            pos.qty += sign * qty
            pos.cost += sign * notional
        else:
            held = abs(pos.qty)
            closed_qty = min(qty, held)
            if closed_qty == held:
                removed = pos.cost
            else:
                removed = fx(pos.cost * closed_qty / held)
            close_notional = notional if closed_qty == qty else fx(price * closed_qty)
            realized = -sign * close_notional - removed
            pos.qty += sign * closed_qty
            pos.cost -= removed
            rest = qty - closed_qty
            if rest > 0:
                pos.qty += sign * rest
                pos.cost += sign * (notional - close_notional)
            self.realized += realized
            self.pair_realized[pair] += realized
        if pos.qty == 0:
            if pos.cost != 0:
                raise LedgerError(f"flat position on {pair} left cost {pos.cost}")
            del self.positions[pair]
        return FillEffect(realized, closed_qty, abs(removed))

    def pay_funding(self, pair: str, paid: Decimal) -> None:
        """Positive ``paid`` leaves the account."""
        self.cash -= paid
        self.funding += paid
        self.pair_funding[pair] += paid

    def position_value(self, pair: str, mark: Decimal) -> Decimal:
        pos = self.positions.get(pair)
        return fx(pos.qty * mark) if pos else ZERO

    def equity(self, marks: Mapping[str, Decimal]) -> Decimal:
        return self.cash + sum((self.position_value(p, marks[p]) for p in self.positions), ZERO)

    def unrealized(self, marks: Mapping[str, Decimal]) -> Decimal:
        return sum((self.position_value(p, marks[p]) - pos.cost for p, pos in self.positions.items()), ZERO)

    def conservation_residual(self, marks: Mapping[str, Decimal]) -> Decimal:
        lhs = (
            self.cash
            + sum((self.position_value(p, marks[p]) for p in self.positions), ZERO)
            + self.fees
            + self.funding
            - self.initial_capital
        )
        rhs = self.realized + self.unrealized(marks)
        return lhs - rhs

    def pair_pnl(self, pair: str, mark: Decimal | None) -> Decimal:
        """Net PnL attributable to one pair (realized + unrealized - fees - funding)."""
        unreal = ZERO
        pos = self.positions.get(pair)
        if pos is not None and mark is not None:
            unreal = fx(pos.qty * mark) - pos.cost
        return self.pair_realized[pair] + unreal - self.pair_fees[pair] - self.pair_funding[pair]

    def record_equity(self, t: int, marks: Mapping[str, Decimal]) -> Decimal:
        if self.equity_curve and t <= self.equity_curve[-1][0]:
            raise LedgerError(f"equity timestamps must increase ({t} after {self.equity_curve[-1][0]})")
        e = self.equity(marks)
        self.equity_curve.append((t, e))
        return e
