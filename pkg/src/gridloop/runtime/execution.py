"""Turning engine action batches into exchange requests."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Mapping, Protocol

from gridloop.exchange.faults import ExchangeFault
from gridloop.exchange.orders import Ack, Order
from gridloop.market_data.snapshot import MarketSnapshot
from gridloop.params import BotParams
from gridloop.strategy.actions import Action, ActionBatch, ActionKind, BotState, EngineEvent
from gridloop.strategy.engine import step


class OrderApi(Protocol):
    def submit(self, order: Order, now: int) -> Ack: ...

    def cancel(self, order_id: str, now: int) -> Ack: ...


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_ms: int = 0  # simulated time is frozen within a cycle

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass
class ExecutionReport:
    acks: list[Ack] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)  # (order_id, error)
    attempts: int = 0

    @property
    def complete(self) -> bool:
        return not self.failed


def to_order(a: Action) -> Order:
    return Order(a.order_id, a.pair, a.kind.order_kind, a.side, a.qty, a.price)


def execute_batch(api: OrderApi, batch: ActionBatch, now: int, retry: RetryPolicy = RetryPolicy()) -> ExecutionReport:
    """Send every action, retrying retryable faults; the order id is the idempotency key."""
    report = ExecutionReport()
    for a in batch.actions:
        last_err = ""
        for _ in range(retry.max_attempts):
            report.attempts += 1
            try:
                if a.kind is ActionKind.CANCEL:
                    ack = api.cancel(a.order_id, now)
                else:
                    ack = api.submit(to_order(a), now)
            except ExchangeFault as exc:
                last_err = f"{type(exc).__name__}: {exc}"
                continue
            report.acks.append(ack)
            break
        else:
            report.failed.append((a.order_id, last_err))
    return report


ParamsFor = Callable[[str], BotParams]


def params_resolver(params: BotParams | Mapping[str, BotParams]) -> ParamsFor:
    if isinstance(params, BotParams):
        return lambda pair: params
    default = params.get("*")

    def lookup(pair: str) -> BotParams:
        p = params.get(pair, default)
        if p is None:
            raise KeyError(f"no parameters for pair {pair}")
        return p

    return lookup


def engine_cycle(state: BotState, snapshot: MarketSnapshot, params_for: ParamsFor, clock: int) -> ActionBatch:
    """Run the engine once per pair partition and merge the batches."""
    pairs = sorted(set(snapshot.quotes) | set(state.positions) | {o.pair for o in state.open_orders})
    actions: list[Action] = []
    events: list[EngineEvent] = []
    for pair in pairs:
        if pair not in snapshot.quotes:
            continue
        sub_state = BotState(
            {pair: state.positions[pair]} if pair in state.positions else {},
            tuple(o for o in state.open_orders if o.pair == pair),
        )
        series = snapshot.series.get(pair)
        sub_snap = MarketSnapshot(
            snapshot.as_of, {pair: snapshot.quotes[pair]}, {pair: series} if series is not None else {},
            snapshot.universe_size,
        )
        _, batch = step(sub_state, sub_snap, params_for(pair), clock)
        actions.extend(batch.actions)
        events.extend(batch.events)
    return ActionBatch.build(clock, actions, events)


def deployed_notional(qty: Decimal, mark: Decimal) -> Decimal:
    return abs(qty * mark)
