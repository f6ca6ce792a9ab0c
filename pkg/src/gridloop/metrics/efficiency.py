"""Cost efficiency of a rule-based bot relative to per-action agent inference."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from gridloop.numeric import D

UNITS = ("wall_clock_s", "compute_cost")


def efficiency_ratio(c_agent: Decimal, c_bot: Decimal, c_policy: Decimal, c_optimization: Decimal, n: int) -> Decimal:
    """eta = c_agent * n / (c_policy + c_optimization + c_bot * n)."""
    if n < 0:
        raise ValueError("action count must be non-negative")
    denom = c_policy + c_optimization + c_bot * n
    if denom <= 0:
        raise ValueError("total bot-side cost must be positive")
    return c_agent * n / denom


@dataclass(frozen=True)
class EfficiencyReport:
    c_agent: Decimal
    c_bot: Decimal
    c_policy: Decimal
    c_optimization: Decimal
    n: int
    units: str = "compute_cost"

    def __post_init__(self) -> None:
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}")
        if min(self.c_agent, self.c_bot, self.c_policy, self.c_optimization) < 0:
            raise ValueError("costs must be non-negative")

    @property
    def eta(self) -> Decimal:
        return efficiency_ratio(self.c_agent, self.c_bot, self.c_policy, self.c_optimization, self.n)

    @property
    def limit(self) -> Decimal:
        return self.c_agent / self.c_bot

    def to_dict(self) -> dict:
        return {
            "units": self.units,
            "c_agent": str(self.c_agent),
            "c_bot": str(self.c_bot),
            "c_policy": str(self.c_policy),
            "c_optimization": str(self.c_optimization),
            "n": self.n,
            "eta": str(self.eta),
            "eta_limit": str(self.limit),
        }


def wall_clock_report(
    agent_latency_s: float, bot_step_s: float, policy_s: float, optimization_s: float, n: int
) -> EfficiencyReport:
    return EfficiencyReport(D(agent_latency_s), D(bot_step_s), D(policy_s), D(optimization_s), n, "wall_clock_s")
