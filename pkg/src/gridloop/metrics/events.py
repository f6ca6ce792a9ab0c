"""Risk events found in a feedback window."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping

from gridloop.numeric import D, to_str

EVENT_KINDS = (
    "drawdown_cascade",
    "boundary_breach",
    "premature_exit",
    "deviation_block",
    "funding_deactivation",
)


@dataclass(frozen=True)
class RiskEvent:
    kind: str
    pair: str
    t0: int
    t1: int
    magnitudes: Mapping[str, Decimal] = field(default_factory=dict)
    context: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown risk event kind {self.kind!r}")
        if self.t1 < self.t0:
            raise ValueError("event window end precedes start")
        bad = [k for k, v in self.magnitudes.items() if v < 0]
        if bad:
            raise ValueError(f"negative magnitudes: {bad}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "pair": self.pair,
            "window": [self.t0, self.t1],
            "magnitudes": {k: to_str(v) for k, v in sorted(self.magnitudes.items())},
            "context": {k: (to_str(v) if isinstance(v, Decimal) else v) for k, v in sorted(self.context.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RiskEvent":
        return cls(
            d["kind"], d["pair"], int(d["window"][0]), int(d["window"][1]),
            {k: D(v) for k, v in d["magnitudes"].items()}, dict(d.get("context", {})),
        )
