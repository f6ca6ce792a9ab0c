"""Seeded connectivity fault injection."""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field


class ExchangeFault(RuntimeError):
    """Base class for retryable connectivity faults."""

    retryable = True


class RateLimitFault(ExchangeFault):
    pass


class TimeoutFault(ExchangeFault):
    def __init__(self, message: str, processed: bool = False):
        super().__init__(message)
        self.processed = processed


class DisconnectFault(ExchangeFault):
    pass


@dataclass(frozen=True)
class FaultProfile:
    """``rate_limit`` requests per ``rate_window_ms``; None disables the limiter."""

    seed: int = 0
    rate_limit: int | None = None
    rate_window_ms: int = 60_000
    timeout_probability: float = 0.0
    disconnect_intervals: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.timeout_probability <= 1.0:
            raise ValueError("timeout_probability must be in [0, 1]")
        if self.rate_limit is not None and self.rate_limit < 1:
            raise ValueError("rate_limit must be >= 1")

    @property
    def stochastic(self) -> bool:
        return self.timeout_probability > 0


def uniform(seed: int, key: str) -> float:
    """Deterministic U[0, 1) draw keyed by (seed, key)."""
    h = hashlib.blake2b(f"{seed}:{key}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "big") / 2**64


@dataclass
class FaultInjector:
    profile: FaultProfile = field(default_factory=FaultProfile)
    _window_counts: dict[int, int] = field(default_factory=lambda: defaultdict(int))
    _attempts: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    fired: list[tuple[int, str, str]] = field(default_factory=list)

    def check(self, now: int, op: str, key: str) -> bool:
        """Raise a fault for this call or return whether a timeout should fire *after* processing."""
        p = self.profile
        for lo, hi in p.disconnect_intervals:
            if lo <= now < hi:
                self.fired.append((now, op, "disconnect"))
                raise DisconnectFault(f"{op} {key}: disconnected at {now}")
        if p.rate_limit is not None:
            w = now // p.rate_window_ms
            self._window_counts[w] += 1
            if self._window_counts[w] > p.rate_limit:
                self.fired.append((now, op, "rate_limit"))
                raise RateLimitFault(f"{op} {key}: rate limit {p.rate_limit}/{p.rate_window_ms}ms exceeded")
        if p.timeout_probability > 0:
            tag = f"{op}:{key}"
            n = self._attempts[tag]
            self._attempts[tag] += 1
            if uniform(p.seed, f"{tag}:{n}") < p.timeout_probability:
                processed = uniform(p.seed, f"{tag}:{n}:lost") < 0.5
                self.fired.append((now, op, "timeout"))
                if not processed:
                    raise TimeoutFault(f"{op} {key}: timed out", processed=False)
                return True
        return False
