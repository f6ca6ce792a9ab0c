"""Linear constraints on the parameter vector and the feasible region they cut out.

Supported constraint class: each constraint either bounds a single component
or bounds the plain sum of a set of components.  Together with the box and the
structural ordering of the price / exit exponent sequences this keeps
feasibility decidable by interval arithmetic plus one sum check.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal
from typing import Any, Iterable, Mapping, Sequence

from gridloop.numeric import D, QUANTUM, ULP, ZERO
from gridloop.optimizer.scenarios import RiskScenario
from gridloop.params import BotParams

LE, GE = "<=", ">="


class DegenerateScenarioError(ValueError):
    def __init__(self, scenario: RiskScenario, message: str):
        super().__init__(message)
        self.scenario = scenario


class UnsupportedConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coefficients[c] * theta[c]) <relation> bound (+/- epsilon when strict)."""

    coefficients: Mapping[str, Decimal]
    relation: str
    bound: Decimal
    epsilon: Decimal = ZERO
    provenance: str = ""
    scenario: str = ""

    def __post_init__(self) -> None:
        if self.relation not in (LE, GE):
            raise ValueError(f"relation must be {LE} or {GE}")
        if not any(c != 0 for c in self.coefficients.values()):
            raise ValueError("constraint needs a nonzero coefficient")
        if not self.bound.is_finite():
            raise ValueError("constraint bound must be finite")

    @property
    def effective_bound(self) -> Decimal:
        return self.bound - self.epsilon if self.relation == LE else self.bound + self.epsilon

    def lhs(self, theta: Mapping[str, Decimal]) -> Decimal:
        return sum((c * theta[k] for k, c in self.coefficients.items()), ZERO)

    def satisfied(self, theta: Mapping[str, Decimal]) -> bool:
        v = self.lhs(theta)
        return v <= self.effective_bound if self.relation == LE else v >= self.effective_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            "coefficients": {k: format(v, "f") for k, v in sorted(self.coefficients.items())},
            "relation": self.relation,
            "bound": format(self.bound, "f"),
            "epsilon": format(self.epsilon, "f"),
            "scenario": self.scenario,
            "provenance": self.provenance,
        }

    def describe(self) -> str:
        terms = " + ".join(k if c == 1 else f"{c}*{k}" for k, c in sorted(self.coefficients.items()))
        eps = f" + {self.epsilon}" if self.epsilon and self.relation == GE else (
            f" - {self.epsilon}" if self.epsilon else "")
        return f"{terms} {self.relation} {self.bound:.12g}{eps}   [{self.provenance}]"


@dataclass(frozen=True)
class RiskConfig:
    """Q_max = global_capital / (n_parallel * safety_factor) unless given directly."""

    global_capital: Decimal = D("10000")
    n_parallel: int = 1
    safety_factor: Decimal = D("2")
    q_max: Decimal | None = None

    @property
    def max_position(self) -> Decimal:
        if self.q_max is not None:
            return self.q_max
        return self.global_capital / (self.n_parallel * self.safety_factor)


def cascade_bound(q_max: Decimal, allocation: Decimal, c_m: Decimal, c_f: Decimal) -> Decimal:
    return q_max / (allocation * c_m * c_f)


def breach_bound(p_peak: Decimal, p_before: Decimal, phi: Decimal) -> Decimal:
    return (p_peak / p_before).ln() / (1 + phi).ln()


def trend_bound(delta_p: Decimal, p_entry: Decimal, phi: Decimal) -> Decimal:
    return (1 + delta_p / p_entry).ln() / (1 + phi).ln()


def compile_constraints(
    scenarios: Sequence[RiskScenario], params: BotParams, risk: RiskConfig = RiskConfig()
) -> list[LinearConstraint]:
    out = []
    for sc in scenarios:
        q = sc.quantities
        if sc.kind == "position_cascade":
            q_max = risk.max_position
            bound = cascade_bound(q_max, q["allocation"], q["c_m"], q["c_f"])
            coeffs = {f"q_{i}": D(1) for i in range(1, params.m + 1)}
            prov = (f"{sc.pair} position_cascade: sum q_i <= Q_max/(A*c_m*c_f) = "
                    f"{q_max}/({q['allocation']}*{q['c_m']}*{q['c_f']})")
            out.append(LinearConstraint(coeffs, LE, bound, ZERO, prov, sc.kind))
        elif sc.kind == "boundary_breach":
            phi = q["phi"]
            if phi <= 0:
                raise DegenerateScenarioError(sc, f"boundary_breach needs phi > 0, got {phi}")
            bound = breach_bound(q["p_peak"], q["p_before"], phi)
            prov = (f"{sc.pair} boundary_breach: p_m > log(P_peak/P_before)/log(1+phi), P_peak={q['p_peak']}, "
                    f"P_before={q['p_before']}, phi={phi}")
            out.append(LinearConstraint({f"p_{params.m}": D(1)}, GE, bound, ULP, prov, sc.kind))
        else:
            phi = q["phi"]
            if phi <= 0:
                raise DegenerateScenarioError(sc, f"premature_exit needs phi > 0, got {phi}")
            bound = trend_bound(q["delta_p_trend"], q["p_entry"], phi)
            prov = (f"{sc.pair} premature_exit: h_1 >= log_(1+phi)(1 + dP/P_entry), "
                    f"dP={q['delta_p_trend']}, P_entry={q['p_entry']}, phi={phi}")
            out.append(LinearConstraint({"h_1": D(1)}, GE, bound, ZERO, prov, sc.kind))
    return out


# -- feasible region ---------------------------------------------------------------

@dataclass(frozen=True)
class BoxConfig:
    q: tuple[Decimal, Decimal] = (D("0.01"), D("1"))
    p: tuple[Decimal, Decimal] = (D("0.25"), D("16"))
    h: tuple[Decimal, Decimal] = (D("0.25"), D("32"))

    def for_params(self, params: BotParams) -> dict[str, tuple[Decimal, Decimal]]:
        return {name: getattr(self, name[0]) for name in params.component_names()}


@dataclass(frozen=True)
class InfeasibilityCertificate:
    conflicting: tuple[str, ...]
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {"conflicting": list(self.conflicting), "reason": self.reason}


class InfeasibleRegion(ValueError):
    def __init__(self, certificate: InfeasibilityCertificate):
        super().__init__(f"empty feasible region: {certificate.reason}")
        self.certificate = certificate


@dataclass
class _Sum:
    names: tuple[str, ...]
    relation: str
    bound: Decimal
    label: str


@dataclass
class Region:
    """Box intersected with single-component bounds, sum bounds and exponent ordering."""

    intervals: dict[str, tuple[Decimal, Decimal]]
    sums: list[_Sum]
    constraints: list[LinearConstraint]
    chains: list[list[str]] = field(default_factory=list)

    @property
    def names(self) -> list[str]:
        return list(self.intervals)

    def coupled(self, names: Iterable[str]) -> list[str]:
        """``names`` plus every component sharing an ordering chain with one of them."""
        out = set(names)
        for chain in self.chains:
            if out.intersection(chain):
                out.update(chain)
        return sorted(out)

    def contains(self, theta: Mapping[str, Decimal]) -> bool:
        for k, (lo, hi) in self.intervals.items():
            if not lo <= theta[k] <= hi:
                return False
        if not all(c.satisfied(theta) for c in self.constraints):
            return False
        for chain in self.chains:
            strict = chain[0].startswith("p_")
            for a, b in zip(chain, chain[1:]):
                if theta[b] < theta[a] or (strict and theta[b] == theta[a]):
                    return False
        return True

    def project(self, theta: Mapping[str, Decimal], free: Sequence[str] | None = None) -> dict[str, Decimal]:
        """A nearby point of the region: clamp, restore ordering, shrink sums toward lower bounds."""
        free = set(self.names if free is None else free)
        out = dict(theta)
        for k in free:
            lo, hi = self.intervals[k]
            out[k] = min(max(out[k], lo), hi)
        for chain in self.chains:
            strict = chain[0].startswith("p_")
            for a, b in zip(chain, chain[1:]):
                need = out[a] + (ULP if strict else ZERO)
                if out[b] < need and b in free:
                    out[b] = need
            for a, b in zip(reversed(chain[:-1]), reversed(chain[1:])):
                cap = out[b] - (ULP if strict else ZERO)
                if out[a] > cap and a in free:
                    out[a] = max(cap, self.intervals[a][0])
        for s in self.sums:
            total = sum((out[n] for n in s.names), ZERO)
            movable = [n for n in s.names if n in free]
            if s.relation == LE and total > s.bound and movable:
                lows = sum((self.intervals[n][0] for n in movable), ZERO)
                fixed = total - sum((out[n] for n in movable), ZERO)
                room = s.bound - fixed - lows
                excess = sum((out[n] - self.intervals[n][0] for n in movable), ZERO)
                for n in movable:
                    lo = self.intervals[n][0]
                    share = (out[n] - lo) * room / excess if excess > 0 else ZERO
                    out[n] = lo + share.quantize(QUANTUM, rounding=ROUND_FLOOR)
        return out

    def sample(self, rng: random.Random, free: Sequence[str], base: Mapping[str, Decimal],
               digits: int = 4, max_tries: int = 200) -> dict[str, Decimal] | None:
        """Uniform draw over the free components, rejected until it lies in the region."""
        q = Decimal(1).scaleb(-digits)
        for _ in range(max_tries):
            theta = dict(base)
            for k in free:
                lo, hi = self.intervals[k]
                for s in self.sums:
                    if k in s.names and s.relation == LE:
                        others = sum((self.intervals[n][0] for n in s.names if n != k), ZERO)
                        hi = min(hi, s.bound - others)
                v = lo + (hi - lo) * D(rng.random())
                theta[k] = v.quantize(q)
            for chain in self.chains:
                vals = sorted(theta[n] for n in chain)
                if all(n in free for n in chain):
                    for n, v in zip(chain, vals):
                        theta[n] = v
            if self.contains(theta):
                return theta
        return None


def feasible_region(
    constraints: Sequence[LinearConstraint],
    box: Mapping[str, tuple[Decimal, Decimal]],
    chains: Sequence[Sequence[str]] = (),
) -> Region:
    intervals = {k: (D(lo), D(hi)) for k, (lo, hi) in box.items()}
    origin = {k: "box" for k in intervals}
    sums: list[_Sum] = []
    for c in constraints:
        unknown = set(c.coefficients) - set(intervals)
        if unknown:
            raise UnsupportedConstraintError(f"constraint references components without box bounds: {sorted(unknown)}")
        nz = {k: v for k, v in c.coefficients.items() if v != 0}
        label = c.provenance or c.describe()
        if len(nz) == 1:
            (k, a), = nz.items()
            b = c.effective_bound / a
            rel = c.relation if a > 0 else (GE if c.relation == LE else LE)
            lo, hi = intervals[k]
            if rel == LE and b < hi:
                intervals[k] = (lo, b)
                origin[k + ":hi"] = label
            elif rel == GE and b > lo:
                intervals[k] = (b, hi)
                origin[k + ":lo"] = label
        elif all(v == 1 for v in nz.values()):
            names = tuple(sorted(nz))
            if any(set(s.names) != set(names) and set(s.names) & set(names) for s in sums):
                raise UnsupportedConstraintError("overlapping sum constraints over different component sets")
            sums.append(_Sum(names, c.relation, c.effective_bound, label))
        else:
            raise UnsupportedConstraintError(f"unsupported constraint shape: {c.describe()}")

    chain_list = [list(ch) for ch in chains]
    for chain in chain_list:
        strict = chain[0].startswith("p_")
        gap = ULP if strict else ZERO
        for a, b in zip(chain, chain[1:]):
            lo_b = max(intervals[b][0], intervals[a][0] + gap)
            intervals[b] = (lo_b, intervals[b][1])
        for a, b in zip(reversed(chain[:-1]), reversed(chain[1:])):
            hi_a = min(intervals[a][1], intervals[b][1] - gap)
            intervals[a] = (intervals[a][0], hi_a)

    for k, (lo, hi) in intervals.items():
        if lo > hi:
            names = [origin.get(k + ":lo", "box lower bound"), origin.get(k + ":hi", "box upper bound")]
            if any(k in ch for ch in chain_list):
                names.append("exponent ordering")
            raise InfeasibleRegion(InfeasibilityCertificate(tuple(names), f"{k}: lower {lo} > upper {hi}"))
    for s in sums:
        lows = sum((intervals[n][0] for n in s.names), ZERO)
        highs = sum((intervals[n][1] for n in s.names), ZERO)
        if s.relation == LE and lows > s.bound:
            raise InfeasibleRegion(InfeasibilityCertificate(
                (s.label, "lower bounds of " + ", ".join(s.names)),
                f"sum of lower bounds {lows} exceeds {s.bound}",
            ))
        if s.relation == GE and highs < s.bound:
            raise InfeasibleRegion(InfeasibilityCertificate(
                (s.label, "upper bounds of " + ", ".join(s.names)),
                f"sum of upper bounds {highs} below {s.bound}",
            ))
    return Region(intervals, sums, list(constraints), chain_list)


def param_chains(params: BotParams) -> list[list[str]]:
    return [[f"p_{i}" for i in range(1, params.m + 1)], [f"h_{i}" for i in range(1, params.k + 1)]]


def region_for(params: BotParams, constraints: Sequence[LinearConstraint], box: BoxConfig = BoxConfig()) -> Region:
    return feasible_region(constraints, box.for_params(params), param_chains(params))


def derivation_dump(constraints: Sequence[LinearConstraint]) -> str:
    return "".join(c.describe() + "\n" for c in constraints)
