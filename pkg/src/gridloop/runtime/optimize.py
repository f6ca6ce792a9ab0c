"""Closed optimization loop: backtest -> feedback -> constraints -> search -> escalate."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Callable, Mapping

from gridloop.exchange.sim import SimConfig
from gridloop.market_data.snapshot import Market
from gridloop.metrics.feedback import Feedback, assemble_feedback
from gridloop.numeric import D, ZERO
from gridloop.optimizer.constraints import (
    BoxConfig,
    InfeasibleRegion,
    LinearConstraint,
    RiskConfig,
    compile_constraints,
    region_for,
)
from gridloop.optimizer.detectors import DetectorConfig
from gridloop.optimizer.hierarchy import (
    Intervention,
    OptimizationCycle,
    Registries,
    TerminalFailure,
    escalate,
)
from gridloop.optimizer.scenarios import detect_scenarios
from gridloop.optimizer.search import ObjectiveSpec, SearchError, solve_parameters
from gridloop.params import BotParams
from gridloop.runtime.backtest import run_backtest

log = logging.getLogger(__name__)

Simulate = Callable[[BotParams, int], Feedback]


@dataclass(frozen=True)
class AcceptanceSpec:
    max_mdd: Decimal = D("0.5")
    require_no_scenarios: bool = True
    beat_baseline_return: bool = True


def metric_values(fb: Feedback) -> dict[str, Decimal | None]:
    values = dict(fb.metrics)
    mdd = values.get("mdd")
    values["neg_mdd"] = None if mdd is None else -mdd
    for kind in ("drawdown_cascade", "boundary_breach", "premature_exit"):
        values[f"n_{kind}"] = D(len(fb.events_of(kind)))
    return values


def _mean(values: list[Decimal | None]) -> Decimal | None:
    if any(v is None for v in values):
        return None
    return sum(values, ZERO) / len(values)


def market_simulator(
    market: Market,
    sim_config: SimConfig,
    detector: DetectorConfig = DetectorConfig(),
    profile: str = "crypto",
    start: int | None = None,
    end: int | None = None,
) -> Simulate:
    def simulate(params: BotParams, seed: int) -> Feedback:
        cfg = dataclasses.replace(sim_config, faults=dataclasses.replace(sim_config.faults, seed=seed))
        res = run_backtest(market, params, cfg, start=start, end=end)
        return assemble_feedback(res.record, market, detector, profile)

    return simulate


class Evaluator:
    """Seed-averaged metrics of a parameter record, memoized on its serialized form."""

    def __init__(self, simulate: Simulate, seeds: tuple[int, ...], stochastic: bool):
        self.simulate = simulate
        self.seeds = seeds if stochastic else seeds[:1]
        self._cache: dict[str, tuple[dict, list[Feedback]]] = {}
        self.calls = 0

    def feedbacks(self, params: BotParams) -> list[Feedback]:
        return self._run(params)[1]

    def __call__(self, params: BotParams) -> dict[str, Decimal | None]:
        return self._run(params)[0]

    def _run(self, params: BotParams):
        key = json.dumps(params.to_dict(), sort_keys=True)
        if key not in self._cache:
            self.calls += 1
            fbs = [self.simulate(params, s) for s in self.seeds]
            per = [metric_values(fb) for fb in fbs]
            merged = {k: _mean([p[k] for p in per]) for k in per[0]}
            self._cache[key] = (merged, fbs)
        return self._cache[key]


@dataclass
class OptimizeOutcome:
    params: BotParams
    prototype: BotParams
    cycles: list[OptimizationCycle]
    constraints: list[LinearConstraint]
    passed: bool
    baseline: dict[str, Decimal | None]
    final: dict[str, Decimal | None]
    terminal: dict | None = None
    audits: list[list[dict]] = field(default_factory=list)

    def cycle_log_jsonl(self) -> str:
        return "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in self.cycles)


def accept(values: Mapping[str, Decimal | None], baseline: Mapping[str, Decimal | None],
           spec: AcceptanceSpec) -> tuple[bool, dict]:
    detail: dict = {}
    ok = True
    if spec.require_no_scenarios:
        n = sum(int(values[f"n_{k}"]) for k in ("drawdown_cascade", "boundary_breach", "premature_exit"))
        detail["scenarios"] = n
        ok &= n == 0
    mdd = values.get("mdd")
    detail["mdd"] = None if mdd is None else format(mdd, "f")
    ok &= mdd is not None and mdd <= spec.max_mdd
    if spec.beat_baseline_return:
        r, b = values.get("total_return"), baseline.get("total_return")
        detail["total_return"] = None if r is None else format(r, "f")
        detail["baseline_return"] = None if b is None else format(b, "f")
        ok &= r is not None and (b is None or r >= b)
    return bool(ok), detail


def optimize(
    prototype: BotParams,
    simulate: Simulate,
    *,
    seeds: tuple[int, ...] = (0, 1, 2),
    stochastic: bool = False,
    risk: RiskConfig = RiskConfig(),
    box: BoxConfig = BoxConfig(),
    objective: ObjectiveSpec = ObjectiveSpec(),
    acceptance: AcceptanceSpec = AcceptanceSpec(),
    registries: Registries = Registries(),
    max_cycles: int = 6,
    stop_after_passes: int = 1,
    extra_free: tuple[str, ...] = (),
    cycle_log: Path | None = None,
) -> OptimizeOutcome:
    """Iterate optimization cycles until ``stop_after_passes`` consecutive passes or failure."""
    evaluator = Evaluator(simulate, seeds, stochastic)
    baseline = evaluator(prototype)
    constraints: list[LinearConstraint] = []
    cycles: list[OptimizationCycle] = []
    audits: list[list[dict]] = []
    base = prototype  # last accepted record; interventions apply on top of it
    current = prototype
    pending: Intervention | None = None
    passes = 0
    final = baseline
    terminal = None

    for idx in range(max_cycles):
        level, change = "parameter", {}
        theta_in = current
        if pending is not None:
            level, change = pending.level, dict(pending.change)
            theta_in = pending.apply(base)

        fb = evaluator.feedbacks(theta_in)[0]
        scenarios = detect_scenarios(fb)
        new = compile_constraints(scenarios, theta_in, risk)
        known = {json.dumps(c.to_dict(), sort_keys=True) for c in constraints}
        constraints += [c for c in new if json.dumps(c.to_dict(), sort_keys=True) not in known]
        notes = f"{len(scenarios)} scenarios, {len(new)} new constraints"

        out = theta_in
        passed = False
        detail: dict = {}
        try:
            region = region_for(theta_in, constraints, box)
            free = region.coupled({k for c in constraints for k in c.coefficients} | set(extra_free))
            result = solve_parameters(region, objective, evaluator, theta_in, free)
            audits.append([e.to_dict() for e in result.audit])
            out = result.params
            values = evaluator(out)
            passed, detail = accept(values, baseline, acceptance)
            final = values
        except InfeasibleRegion as exc:
            notes += f"; infeasible: {exc.certificate.reason} ({'; '.join(exc.certificate.conflicting)})"
            detail = {"infeasible": exc.certificate.to_dict()}
        except SearchError as exc:
            notes += f"; search failed: {exc}"

        cycle = OptimizationCycle(
            idx, level, theta_in.to_dict(), out.to_dict(), [c.to_dict() for c in constraints],
            passed, notes, change, objective.budget, objective.search_seed, detail,
        )
        cycles.append(cycle)
        if cycle_log is not None:
            with open(cycle_log, "a") as fh:
                fh.write(json.dumps(cycle.to_dict(), sort_keys=True) + "\n")
        log.info("cycle %d (%s) passed=%s %s", idx, level, passed, notes)

        if passed:
            base = current = out
            pending = None
            passes += 1
            if passes >= stop_after_passes:
                break
            continue
        passes = 0
        try:
            pending = escalate(cycles, base, registries)
        except TerminalFailure as exc:
            terminal = exc.report()
            break

    ok = bool(cycles) and cycles[-1].passed
    return OptimizeOutcome(current, prototype, cycles, constraints, ok, baseline, final, terminal, audits)
