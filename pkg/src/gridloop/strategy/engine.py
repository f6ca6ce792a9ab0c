"""The deployed bot as a deterministic state machine.

``step`` is a pure function of (state, snapshot, params, clock): at the opening
of an execution interval it clears stale entry orders, re-qualifies pairs and
lays a fresh grid; on every call it refreshes take-profit / stop orders and
sweeps small profitable positions.
"""

from __future__ import annotations

from decimal import Decimal
from typing import Mapping

from gridloop.enums import OrderKind, PositionSide, Side
from gridloop.market_data.snapshot import MarketSnapshot, pair_volatility, qualify_pairs
from gridloop.numeric import ZERO, fx_floor, truncate_to_step
from gridloop.params import BotParams
from gridloop.strategy.actions import (
    ROLE_ENTRY,
    ROLE_EXIT,
    ROLE_SWEEP,
    Action,
    ActionBatch,
    ActionKind,
    BotState,
    EngineEvent,
    OrderView,
    PositionView,
    order_id,
    parse_order_id,
)
from gridloop.strategy.functions import (
    DegenerateVolatilityError,
    Gate,
    deviation_gate,
    entry_scaling,
    funding_coefficient,
    market_cap_coefficient,
    order_quantities,
    profit_loss_levels,
)
from gridloop.strategy.templates import strategy_lookup


class StaleSnapshotError(RuntimeError):
    """The snapshot predates the clock; the engine refuses to act on it."""


def small_position_sweep(
    state: BotState, params: BotParams, marks: Mapping[str, Decimal], clock: int = 0
) -> ActionBatch:
    """MARKET-close positions with P_entry * Q < A / lambda that are in profit."""
    threshold = params.allocation / params.size_divisor
    actions = []
    for pair, pos in sorted(state.positions.items()):
        if pos.qty <= 0:
            continue
        if pos.entry_price * pos.qty >= threshold:
            continue
        mark = marks[pair]
        pnl = (mark - pos.entry_price) * pos.qty
        if pos.side is PositionSide.SHORT:
            pnl = -pnl
        if pnl <= 0:
            continue
        side = pos.side.exit_side
        actions.append(
            Action(
                ActionKind.PLACE_MARKET, pair, order_id(pair, clock, ROLE_SWEEP, side, 0, OrderKind.MARKET),
                side, None, pos.qty, 0, "small_position", ROLE_SWEEP,
            )
        )
    return ActionBatch.build(clock, actions, [])


def _cancel(o: OrderView, reason: str) -> Action:
    return Action(ActionKind.CANCEL, o.pair, o.order_id, o.side, o.price, o.qty, o.level, reason, o.role)


def _entries(
    pair: str,
    snapshot: MarketSnapshot,
    state: BotState,
    params: BotParams,
    phi: Decimal,
    clock: int,
) -> tuple[list[Action], list[EngineEvent]]:
    quote = snapshot.quotes[pair]
    events: list[EngineEvent] = []
    if deviation_gate(quote.latest, quote.mark, params.deviation_tolerance) is Gate.BLOCK:
        dev = abs(quote.latest - quote.mark) / quote.mark
        return [], [EngineEvent("deviation_block", pair, clock, {"deviation": str(dev)})]
    c_f = funding_coefficient(quote.funding_rate, params.funding)
    if c_f == 0:
        return [], [EngineEvent("funding_deactivation", pair, clock, {"funding_rate": str(quote.funding_rate)})]
    c_m = market_cap_coefficient(quote.mcap_rank, snapshot.universe_size, params.market_cap)
    try:
        planned = strategy_lookup(params.strategy).plan(pair, snapshot, phi, params)
    except DegenerateVolatilityError as exc:
        return [], [EngineEvent("degenerate_volatility", pair, clock, {"phi": str(phi), "error": str(exc)})]

    pos = state.positions.get(pair)
    scale = Decimal(1)
    if pos is not None and pos.qty > 0:
        # never above 1 so per-pair entry notional stays within A * c_m * c_f * sum(M_Q)
        scale = min(Decimal(1), entry_scaling(quote.latest, pos.entry_price, params.entry_exponent))

    lot, min_notional = quote.filters.lot_size, quote.filters.min_notional
    actions: list[Action] = []
    for side in (Side.BUY, Side.SELL):
        levels = [lv for lv in planned if lv.side is side]
        if not levels:
            continue
        fracs = [lv.fraction for lv in levels]
        prices = [lv.price for lv in levels]
        side_scale = scale
        if params.max_pair_notional is not None:
            held = ZERO
            if pos is not None and pos.side.entry_side is side:
                held = pos.qty * pos.entry_price
            room = params.max_pair_notional - held
            wanted = sum(params.allocation * f * c_m * c_f * scale for f in fracs)
            if room <= 0:
                events.append(EngineEvent("exposure_cap", pair, clock, {"side": side.value, "held": str(held)}))
                continue
            if wanted > room:
                side_scale = scale * fx_floor(room / wanted)
        qtys = order_quantities(params.allocation, fracs, c_m, c_f, prices, lot, min_notional, side_scale)
        for lv, qty in zip(levels, qtys):
            if qty <= 0:
                events.append(EngineEvent("level_skipped", pair, clock, {"side": side.value, "level": lv.level}))
                continue
            actions.append(
                Action(
                    ActionKind.PLACE_LIMIT, pair, order_id(pair, clock, ROLE_ENTRY, side, lv.level, OrderKind.LIMIT),
                    side, lv.price, qty, lv.level, f"{params.strategy}_entry", ROLE_ENTRY,
                )
            )
    return actions, events


def _exits(
    pos: PositionView,
    snapshot: MarketSnapshot,
    state: BotState,
    params: BotParams,
    phi: Decimal | None,
    clock: int,
) -> tuple[list[Action], list[EngineEvent]]:
    pair = pos.pair
    if phi is None:
        return [], [EngineEvent("stale_volatility", pair, clock, {})]
    quote = snapshot.quotes[pair]
    tick, lot = quote.filters.tick_size, quote.filters.lot_size
    try:
        levels = profit_loss_levels(pos.entry_price, phi, params.exit_exponents, pos.side, tick)
    except DegenerateVolatilityError as exc:
        return [], [EngineEvent("degenerate_volatility", pair, clock, {"phi": str(phi), "error": str(exc)})]

    existing = [o for o in state.orders_for(pair) if o.role == ROLE_EXIT]
    exit_side = pos.side.exit_side
    last = quote.latest
    long = pos.side is PositionSide.LONG
    fractions = params.close_fractions()

    # Levels the price has already moved through count as realized; the
    # remaining quantity is spread over the levels still ahead.
    tp_ahead = [i for i, (tp, _) in enumerate(levels) if (tp > last if long else tp < last)]
    sl_ahead = [i for i, (_, sl) in enumerate(levels) if (sl < last if long else sl > last)]
    if not tp_ahead or not sl_ahead:
        reason = "take_profit_overrun" if not tp_ahead else "stop_overrun"
        actions = [_cancel(o, reason) for o in existing]
        actions.append(
            Action(
                ActionKind.PLACE_MARKET, pair, order_id(pair, clock, ROLE_EXIT, exit_side, 0, OrderKind.MARKET),
                exit_side, None, pos.qty, 0, reason, ROLE_EXIT,
            )
        )
        return actions, []

    desired: dict[tuple, Action] = {}
    for kind, ahead, col in ((OrderKind.TAKE_PROFIT, tp_ahead, 0), (OrderKind.STOP, sl_ahead, 1)):
        weight = sum(fractions[i] for i in ahead)
        total = sum(fractions)
        qtys = [truncate_to_step(pos.qty * fractions[i] * total / weight, lot) for i in ahead]
        if total == 1:
            qtys[-1] = pos.qty - sum(qtys[:-1])
        act_kind = ActionKind.PLACE_TAKE_PROFIT if kind is OrderKind.TAKE_PROFIT else ActionKind.PLACE_STOP
        reason = "take_profit" if kind is OrderKind.TAKE_PROFIT else "stop_loss"
        for i, qty in zip(ahead, qtys):
            price = levels[i][col]
            if qty <= 0 or qty * price < quote.filters.min_notional:
                continue
            lvl = i + 1
            desired[(kind, exit_side, lvl, price, qty)] = Action(
                act_kind, pair, order_id(pair, clock, ROLE_EXIT, exit_side, lvl, kind),
                exit_side, price, qty, lvl, reason, ROLE_EXIT,
            )

    actions = []
    for o in existing:
        key = (o.kind, o.side, o.level, o.price, o.qty)
        if key in desired:
            del desired[key]
        else:
            actions.append(_cancel(o, "refresh"))
    actions.extend(desired.values())
    return actions, []


def _placed_at(oid: str) -> int | None:
    meta = parse_order_id(oid)
    return None if meta is None else meta["clock"]


def step(
    state: BotState, snapshot: MarketSnapshot, params: BotParams, clock: int
) -> tuple[BotState, ActionBatch]:
    """One engine cycle; deterministic in its four arguments."""
    if snapshot.as_of < clock:
        raise StaleSnapshotError(f"snapshot as_of {snapshot.as_of} older than clock {clock}")
    if snapshot.as_of > clock:
        raise ValueError(f"snapshot as_of {snapshot.as_of} is ahead of clock {clock}")

    actions: list[Action] = []
    events: list[EngineEvent] = []
    phis: dict[str, Decimal | None] = {}

    def phi_of(pair: str) -> Decimal | None:
        if pair not in phis:
            phis[pair] = pair_volatility(snapshot, pair, params)
        return phis[pair]

    marks = {p: q.mark for p, q in snapshot.quotes.items()}
    live_positions = {p: v for p, v in state.positions.items() if p in snapshot.quotes and v.qty > 0}
    sweep = small_position_sweep(BotState(live_positions), params, marks, clock)
    swept = {a.pair for a in sweep.actions}
    actions.extend(sweep.actions)

    qualified = state.qualified
    if params.schedule.opens_at(clock):
        # entries already placed at this clock survive a restart within the cycle
        current = {o.order_id for o in state.open_orders if _placed_at(o.order_id) == clock}
        for o in state.open_orders:
            if o.role == ROLE_ENTRY and o.order_id not in current:
                actions.append(_cancel(o, "stale_entry"))
        qualified = qualify_pairs(snapshot, params)
        for pair in sorted(qualified):
            phi = phi_of(pair)
            assert phi is not None
            a, e = _entries(pair, snapshot, state, params, phi, clock)
            actions.extend(x for x in a if x.order_id not in current)
            events.extend(e)

    for pair, pos in sorted(live_positions.items()):
        if pair in swept:
            actions.extend(_cancel(o, "small_position") for o in state.orders_for(pair) if o.role == ROLE_EXIT)
            continue
        a, e = _exits(pos, snapshot, state, params, phi_of(pair), clock)
        actions.extend(a)
        events.extend(e)

    cancelled = {a.order_id for a in actions if a.kind is ActionKind.CANCEL}
    orders = [o for o in state.open_orders if o.order_id not in cancelled]
    for a in actions:
        kind = a.kind.order_kind
        if kind is not None and kind is not OrderKind.MARKET:
            orders.append(OrderView(a.order_id, a.pair, kind, a.side, a.price, a.qty, a.role, a.level))
    new_state = BotState(
        positions=state.positions,
        open_orders=tuple(sorted(orders, key=lambda o: o.order_id)),
        qualified=qualified,
        phi={p: v for p, v in phis.items() if v is not None},
    )
    return new_state, ActionBatch.build(clock, actions, events)
