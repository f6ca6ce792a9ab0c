"""Candle-level exchange simulator."""

from gridloop.exchange.faults import (
    DisconnectFault,
    ExchangeFault,
    FaultProfile,
    RateLimitFault,
    TimeoutFault,
)
from gridloop.exchange.ledger import AccountLedger, LedgerError
from gridloop.exchange.orders import Ack, Fill, Order, OrderError
from gridloop.exchange.sim import AccountView, ConfigError, ExchangeSim, SimConfig, triggered

__all__ = [
    "AccountLedger", "AccountView", "Ack", "ConfigError", "DisconnectFault", "ExchangeFault",
    "ExchangeSim", "FaultProfile", "Fill", "LedgerError", "Order", "OrderError", "RateLimitFault",
    "SimConfig", "TimeoutFault", "triggered",
]
