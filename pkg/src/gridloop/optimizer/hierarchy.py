"""Escalation across the parameter, function and strategy layers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from gridloop.market_data.indicators import VOLATILITY_ESTIMATORS
from gridloop.params import BotParams
from gridloop.strategy.functions import PLACEMENTS
from gridloop.strategy.templates import STRATEGIES

LEVELS = ("parameter", "function", "strategy")
_RANK = {lv: i for i, lv in enumerate(LEVELS)}


@dataclass
class OptimizationCycle:
    index: int
    level: str
    input_params: dict[str, Any]
    output_params: dict[str, Any]
    constraints: list[dict[str, Any]] = field(default_factory=list)
    passed: bool = False
    notes: str = ""
    change: dict[str, str] = field(default_factory=dict)
    budget: int = 0
    seed: int = 0
    verdict_detail: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "level": self.level,
            "input_params": self.input_params,
            "output_params": self.output_params,
            "constraints": self.constraints,
            "passed": self.passed,
            "notes": self.notes,
            "change": self.change,
            "budget": self.budget,
            "seed": self.seed,
            "verdict": self.verdict_detail,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "OptimizationCycle":
        return cls(
            d["index"], d["level"], d["input_params"], d["output_params"], d.get("constraints", []),
            d["passed"], d.get("notes", ""), d.get("change", {}), d.get("budget", 0), d.get("seed", 0),
            d.get("verdict", {}),
        )


@dataclass(frozen=True)
class Intervention:
    level: str
    change: Mapping[str, str]

    def apply(self, params: BotParams) -> BotParams:
        if self.level == "strategy":
            # a new template starts again from default numeric parameters
            fresh = BotParams()
            keep = {k: getattr(params, k) for k in ("schedule", "tau_ms", "allocation", "grid_side",
                                                      "volume_req", "volatility_req", "max_pair_notional")}
            return fresh.replace(**keep, **self.change)
        return params.replace(**self.change)


class TerminalFailure(RuntimeError):
    def __init__(self, history: Sequence[OptimizationCycle]):
        tried = [c.change for c in history if c.change]
        super().__init__(f"all interventions exhausted after {len(history)} cycles; tried {tried}")
        self.history = list(history)

    def report(self) -> dict[str, Any]:
        return {"status": "terminal_failure", "cycles": [c.to_dict() for c in self.history]}


@dataclass(frozen=True)
class Registries:
    functions: Mapping[str, Sequence[str]] = field(default_factory=lambda: {
        "volatility_estimator": tuple(VOLATILITY_ESTIMATORS),
        "placement": tuple(PLACEMENTS),
    })
    strategies: Sequence[str] = field(default_factory=lambda: tuple(STRATEGIES))


def _tried(history: Iterable[OptimizationCycle], level: str) -> set[tuple[str, str]]:
    return {(k, v) for c in history if c.level == level for k, v in c.change.items()}


def escalate(history: Sequence[OptimizationCycle], current: BotParams,
             registries: Registries = Registries()) -> Intervention | None:
    """Next intervention after the latest cycle, or None when it passed."""
    if not history or history[-1].passed:
        return None
    last = history[-1]
    if last.level in ("parameter", "function"):
        tried = _tried(history, "function")
        for fieldname, options in sorted(registries.functions.items()):
            for opt in options:
                if opt == getattr(current, fieldname) or (fieldname, opt) in tried:
                    continue
                return Intervention("function", {fieldname: opt})
    tried_s = _tried(history, "strategy")
    for name in registries.strategies:
        if name == current.strategy or ("strategy", name) in tried_s:
            continue
        return Intervention("strategy", {"strategy": name})
    raise TerminalFailure(history)


def lint_cycle_log(cycles: Sequence[OptimizationCycle]) -> list[str]:
    """Escalations not immediately preceded by a failed cycle at the same or a lower level."""
    problems = []
    for i, c in enumerate(cycles):
        if c.level == "parameter":
            continue
        if i == 0:
            problems.append(f"cycle {c.index}: {c.level}-level cycle opens the log")
            continue
        prev = cycles[i - 1]
        if prev.passed:
            problems.append(f"cycle {c.index}: {c.level}-level cycle follows passing cycle {prev.index}")
        elif _RANK[prev.level] > _RANK[c.level]:
            problems.append(f"cycle {c.index}: {c.level}-level cycle follows higher-level cycle {prev.index}")
    return problems


def read_cycle_log(text: str) -> list[OptimizationCycle]:
    return [OptimizationCycle.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
