"""Risk scenarios distilled from feedback events."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping

from gridloop.metrics.events import RiskEvent

SCENARIO_KINDS = ("position_cascade", "boundary_breach", "premature_exit")

_FROM_EVENT = {
    "drawdown_cascade": "position_cascade",
    "boundary_breach": "boundary_breach",
    "premature_exit": "premature_exit",
}

# quantities each scenario kind needs strictly positive
_REQUIRED = {
    "position_cascade": ("allocation", "c_m", "c_f"),
    "boundary_breach": ("p_peak", "p_before", "phi"),
    "premature_exit": ("delta_p_trend", "p_entry", "phi"),
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class RiskScenario:
    kind: str
    pair: str
    quantities: Mapping[str, Decimal]
    side: str = "buy"
    source: RiskEvent | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        missing = [k for k in _REQUIRED[self.kind] if k not in self.quantities]
        if missing:
            raise ScenarioError(f"{self.kind} scenario missing {missing}")
        bad = [k for k in _REQUIRED[self.kind] if not self.quantities[k] > 0]
        if bad:
            raise ScenarioError(f"{self.kind} scenario needs positive {bad}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "pair": self.pair,
            "side": self.side,
            "quantities": {k: format(v, "f") for k, v in sorted(self.quantities.items())},
            "source": None if self.source is None else self.source.to_dict(),
        }


def scenario_from_event(ev: RiskEvent) -> RiskScenario | None:
    kind = _FROM_EVENT.get(ev.kind)
    if kind is None:
        return None
    if kind == "position_cascade":
        q = {k: Decimal(str(ev.context[k])) for k in ("allocation", "c_m", "c_f")}
        q["drawdown"] = ev.magnitudes["drawdown"]
        side = ev.context.get("falling_side", "buy")
    elif kind == "boundary_breach":
        q = {k: ev.magnitudes[k] for k in ("p_peak", "p_before", "phi")}
        side = ev.context.get("side", "sell")
    else:
        q = {k: ev.magnitudes[k] for k in ("delta_p_trend", "p_entry", "phi")}
        side = "buy"
    return RiskScenario(kind, ev.pair, q, side, ev)


def detect_scenarios(feedback, min_drawdown: Decimal | None = None) -> list[RiskScenario]:
    """Map feedback risk events to scenarios; events below ``min_drawdown`` are ignored."""
    out = []
    for ev in feedback.events:
        if ev.kind == "drawdown_cascade" and min_drawdown is not None and ev.magnitudes["drawdown"] < min_drawdown:
            continue
        sc = scenario_from_event(ev)
        if sc is not None:
            out.append(sc)
    return out
