"""Simulation-backed search for the best parameter vector inside a feasible region."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Callable, Mapping, Sequence

from gridloop.numeric import D, ZERO
from gridloop.optimizer.constraints import Region
from gridloop.params import BotParams, ParamError

log = logging.getLogger(__name__)

Evaluator = Callable[[BotParams], Mapping[str, Decimal | None]]


class SearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class ObjectiveSpec:
    """Weighted metric sum; weights are normalized to 1 on construction."""

    terms: tuple[tuple[str, Decimal], ...] = (("total_return", D("0.6")), ("neg_mdd", D("0.4")))
    seeds: tuple[int, ...] = (0, 1, 2)
    budget: int = 16
    refine_rounds: int = 2
    search_seed: int = 0

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("objective needs at least one term")
        if any(w < 0 for _, w in self.terms):
            raise ValueError("objective weights must be non-negative")
        total = sum((w for _, w in self.terms), ZERO)
        if total <= 0:
            raise ValueError("objective weights must not all be zero")
        if total != 1:
            object.__setattr__(self, "terms", tuple((m, w / total) for m, w in self.terms))

    @property
    def metrics(self) -> list[str]:
        return [m for m, _ in self.terms]

    def score(self, values: Mapping[str, Decimal | None]) -> Decimal | None:
        total = ZERO
        for m, w in self.terms:
            v = values.get(m)
            if v is None:
                return None
            total += w * v
        return total

    def to_dict(self) -> dict[str, Any]:
        return {
            "terms": [[m, format(w, "f")] for m, w in self.terms],
            "seeds": list(self.seeds),
            "budget": self.budget,
            "refine_rounds": self.refine_rounds,
            "search_seed": self.search_seed,
        }


@dataclass
class AuditEntry:
    index: int
    vector: dict[str, Decimal]
    status: str  # "ok" | "undefined" | "failed"
    score: Decimal | None = None
    metrics: Mapping[str, Decimal | None] = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "vector": {k: format(v, "f") for k, v in sorted(self.vector.items())},
            "status": self.status,
            "score": None if self.score is None else format(self.score, "f"),
            "note": self.note,
        }


@dataclass
class SearchResult:
    params: BotParams
    vector: dict[str, Decimal]
    score: Decimal
    audit: list[AuditEntry]
    free: list[str]

    def pareto(self, metrics: Sequence[str]) -> list[AuditEntry]:
        """Evaluated candidates not dominated on ``metrics`` (all maximized)."""
        ok = [e for e in self.audit if e.status == "ok" and all(e.metrics.get(m) is not None for m in metrics)]
        front = []
        for e in ok:
            dominated = any(
                all(o.metrics[m] >= e.metrics[m] for m in metrics) and any(o.metrics[m] > e.metrics[m] for m in metrics)
                for o in ok if o is not e
            )
            if not dominated:
                front.append(e)
        return front


def _key(theta: Mapping[str, Decimal], free: Sequence[str]) -> tuple:
    return tuple(theta[k].normalize() for k in free)


def solve_parameters(
    region: Region,
    objective: ObjectiveSpec,
    evaluator: Evaluator,
    incumbent: BotParams,
    free: Sequence[str] | None = None,
) -> SearchResult:
    """Best-scoring evaluated point of ``region``; never returns an unevaluated value."""
    free = list(region.names if free is None else free)
    base = incumbent.vector()
    rng = random.Random(objective.search_seed)
    audit: list[AuditEntry] = []
    seen: set[tuple] = set()

    def evaluate(theta: dict[str, Decimal], note: str) -> AuditEntry | None:
        key = _key(theta, free)
        if key in seen:
            return None
        seen.add(key)
        entry = AuditEntry(len(audit), dict(theta), "failed", note=note)
        audit.append(entry)
        if not region.contains(theta):
            entry.note = note + "; outside region"
            return None
        try:
            params = incumbent.with_vector({k: theta[k] for k in free})
            values = evaluator(params)
        except (ParamError, ArithmeticError, ValueError, RuntimeError) as exc:
            entry.note = f"{note}; evaluator error: {exc}"
            log.warning("candidate %d discarded: %s", entry.index, exc)
            return None
        entry.metrics = dict(values)
        entry.score = objective.score(values)
        entry.status = "ok" if entry.score is not None else "undefined"
        return entry

    if not free:
        theta = dict(base)
        if not region.contains(theta):
            raise SearchError("incumbent violates the region and no component is free")
        entry = evaluate(theta, "incumbent")
        score = entry.score if entry is not None and entry.score is not None else ZERO
        return SearchResult(incumbent, theta, score, audit, free)

    start = region.project(base, free)
    evaluate(start, "incumbent projected")
    n_samples = max(0, objective.budget - 1)
    for i in range(n_samples):
        theta = region.sample(rng, free, start)
        if theta is not None:
            evaluate(theta, f"sample {i}")

    def best() -> AuditEntry | None:
        ok = [e for e in audit if e.status == "ok"]
        return max(ok, key=lambda e: (e.score, -e.index)) if ok else None

    frac = D("0.1")
    for _ in range(objective.refine_rounds):
        center = best()
        if center is None:
            break
        for k in free:
            lo, hi = region.intervals[k]
            step = (hi - lo) * frac
            for direction in (1, -1):
                theta = dict(center.vector)
                theta[k] = (theta[k] + direction * step).quantize(D("0.0001"))
                evaluate(region.project(theta, free), f"refine {k}{'+' if direction > 0 else '-'}")
        frac /= 2

    winner = best()
    if winner is None:
        raise SearchError(f"no candidate scored among {len(audit)} evaluated")
    if not region.contains(winner.vector):
        raise SearchError("selected candidate violates the region")
    params = incumbent.with_vector({k: winner.vector[k] for k in free})
    return SearchResult(params, winner.vector, winner.score, audit, free)
