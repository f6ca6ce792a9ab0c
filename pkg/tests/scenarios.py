"""Run configurations shared by the closed-loop tests and the acceptance suite."""

from __future__ import annotations

import pathlib

from gridloop.runtime.config import RunConfig, load_config
from gridloop.optimizer.hierarchy import OptimizationCycle
from gridloop.runtime.optimize import OptimizeOutcome, market_simulator, optimize

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"

# every cycle log produced during the session, for the escalation audit
CYCLE_LOGS: list[tuple[str, list[OptimizationCycle]]] = []
# acceptance verdict lines, echoed in the terminal summary
VERDICTS: list[str] = []


def record_cycles(label: str, cycles) -> None:
    CYCLE_LOGS.append((label, list(cycles)))


def config(name: str, **overrides) -> RunConfig:
    return load_config(CONFIGS / f"{name}.yaml", overrides)


def simulator(cfg: RunConfig, market=None):
    market = market or cfg.load_market()
    return market_simulator(market, cfg.sim, cfg.detector, cfg.profile, cfg.start, cfg.end)


def run_optimize(cfg: RunConfig, simulate=None, label: str = "", **kw) -> OptimizeOutcome:
    args = dict(
        seeds=cfg.seeds, stochastic=cfg.stochastic, risk=cfg.risk, box=cfg.box, objective=cfg.objective,
        acceptance=cfg.acceptance, max_cycles=cfg.max_cycles, stop_after_passes=cfg.stop_after_passes,
        extra_free=cfg.extra_free,
    )
    args.update(kw)
    out = optimize(cfg.params, simulate or simulator(cfg), **args)
    record_cycles(label or "optimize", out.cycles)
    return out
