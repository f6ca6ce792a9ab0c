import math
import random
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from gridloop.metrics.feedback import Feedback, assemble_feedback
from gridloop.numeric import D, ULP
from gridloop.optimizer.calibration import PairProfile, initialize_pair_params
from gridloop.optimizer.constraints import (
    GE,
    LE,
    BoxConfig,
    InfeasibleRegion,
    LinearConstraint,
    RiskConfig,
    compile_constraints,
    feasible_region,
    region_for,
)
from gridloop.optimizer.hierarchy import (
    OptimizationCycle,
    TerminalFailure,
    escalate,
    lint_cycle_log,
    read_cycle_log,
)
from gridloop.optimizer.scenarios import RiskScenario, ScenarioError, detect_scenarios
from gridloop.optimizer.search import ObjectiveSpec, solve_parameters
from gridloop.params import BotParams
from gridloop.runtime.backtest import run_backtest
from gridloop.runtime.optimize import Evaluator

import oracles
import scenarios

P = BotParams(quantity_fractions=(D("0.2"), D("0.3"), D("0.5")))


def _cascade(a=1000, c_m=1, c_f=1):
    return RiskScenario("position_cascade", "X", {"allocation": D(a), "c_m": D(c_m), "c_f": D(c_f)})


def _breach(peak, before, phi):
    return RiskScenario("boundary_breach", "X", {"p_peak": D(peak), "p_before": D(before), "phi": D(phi)}, "sell")


def _trend(dp, entry, phi):
    return RiskScenario("premature_exit", "X", {"delta_p_trend": D(dp), "p_entry": D(entry), "phi": D(phi)})


class TestCompile:
    def test_cascade(self):
        (c,) = compile_constraints([_cascade()], P, RiskConfig(q_max=D(400)))
        assert c.coefficients == {"q_1": 1, "q_2": 1, "q_3": 1}
        assert c.relation == LE and c.bound == D("0.4")

    def test_breach(self):
        (c,) = compile_constraints([_breach(121, 100, "0.1")], P)
        assert c.coefficients == {"p_3": 1} and c.relation == GE
        assert abs(c.bound - 2) < D("1e-25")
        assert c.epsilon == ULP

    def test_trend(self):
        (c,) = compile_constraints([_trend(10, 100, "0.05")], P)
        assert c.coefficients == {"h_1": 1} and c.relation == GE
        assert round(c.bound, 4) == D("1.9535")
        assert abs(float(c.bound) - math.log(1.1) / math.log(1.05)) < 1e-12

    def test_default_q_max(self):
        # global 10000 / (1 parallel * safety 2) over A = 1000
        (c,) = compile_constraints([_cascade()], P)
        assert c.bound == 5

    def test_degenerate_phi(self):
        with pytest.raises(ScenarioError):
            _breach(121, 100, 0)

    def test_constraint_shape(self):
        with pytest.raises(ValueError):
            LinearConstraint({"q_1": D(0)}, LE, D(1))


def _box(m=2):
    return {**{f"q_{i}": (D("0.05"), D("0.5")) for i in range(1, m + 1)}}


class TestRegion:
    def test_no_constraints(self):
        r = feasible_region([], _box())
        assert r.intervals == _box()

    def test_sum_feasible(self):
        c = LinearConstraint({"q_1": D(1), "q_2": D(1)}, LE, D("0.4"))
        r = feasible_region([c], _box())
        assert r.contains({"q_1": D("0.2"), "q_2": D("0.2")})
        assert not r.contains({"q_1": D("0.3"), "q_2": D("0.2")})

    def test_sum_infeasible(self):
        c = LinearConstraint({"q_1": D(1), "q_2": D(1)}, LE, D("0.05"), provenance="cascade")
        with pytest.raises(InfeasibleRegion) as ei:
            feasible_region([c], _box())
        cert = ei.value.certificate
        assert "cascade" in cert.conflicting
        assert any("lower bounds" in x for x in cert.conflicting)

    def test_single_bound_vs_box(self):
        c = LinearConstraint({"p_3": D(1)}, GE, D(20), provenance="breach")
        with pytest.raises(InfeasibleRegion) as ei:
            region_for(P, [c])
        assert "breach" in ei.value.certificate.conflicting

    def test_chain_propagation(self):
        c = LinearConstraint({"h_1": D(1)}, GE, D(5))
        r = region_for(P, [c])
        assert r.intervals["h_2"][0] == 5
        assert r.coupled({"h_1"}) == ["h_1", "h_2"]


def test_solve_single_point():
    box = BoxConfig(q=(D("0.3"), D("0.3")), p=(D(2), D(2)), h=(D(1), D(1)))
    params = BotParams(price_exponents=(D(2),), quantity_fractions=(D("0.3"),), exit_exponents=(D(1),))
    region = region_for(params, [], box)
    res = solve_parameters(region, ObjectiveSpec(), lambda p: {"total_return": D(1), "neg_mdd": D(0)}, params)
    assert res.vector == {"q_1": D("0.3"), "p_1": D(2), "h_1": D(1)}


def _mean_reverting_evaluator():
    cfg = scenarios.config("range")
    market = cfg.load_market()
    return Evaluator(scenarios.simulator(cfg, market), (0,), False)


WIN = ObjectiveSpec(terms=(("win_rate", D(1)),), budget=10, refine_rounds=1)


@pytest.fixture(scope="module")
def unconstrained():
    ev = _mean_reverting_evaluator()
    region = region_for(P, [])
    return solve_parameters(region, WIN, ev, P, ["q_1", "q_2", "q_3"]), ev


def test_search_reports_audit_max(unconstrained):
    res, _ = unconstrained
    scores = [e.score for e in res.audit if e.status == "ok"]
    assert scores and res.score == max(scores)
    assert res.pareto(["win_rate"])


def test_constrained_dominance(unconstrained):
    res, ev = unconstrained
    c = LinearConstraint({"q_1": D(1), "q_2": D(1), "q_3": D(1)}, LE, D("0.3"))
    region = region_for(P, [c])
    con = solve_parameters(region, WIN, ev, P, ["q_1", "q_2", "q_3"])
    assert sum(con.params.quantity_fractions) <= D("0.3")
    assert con.score <= res.score


@given(st.integers(0, 10**6))
def test_solution_inside_region(seed):
    rng = random.Random(seed)
    cons = [LinearConstraint({"q_1": D(1), "q_2": D(1), "q_3": D(1)}, LE, D(rng.randint(10, 150)) / 100)]
    if rng.random() < 0.5:
        cons.append(LinearConstraint({"p_3": D(1)}, GE, D(rng.randint(300, 1500)) / 100, ULP))
    if rng.random() < 0.5:
        cons.append(LinearConstraint({"h_1": D(1)}, GE, D(rng.randint(100, 3000)) / 100))
    region = region_for(P, cons)
    target = {k: D(rng.randint(1, 100)) / 10 for k in P.component_names()}

    def ev(params):
        v = params.vector()
        return {"total_return": -sum((v[k] - target[k]) ** 2 for k in v), "neg_mdd": D(0)}

    free = region.coupled({k for c in cons for k in c.coefficients})
    res = solve_parameters(region, ObjectiveSpec(budget=8, refine_rounds=1, search_seed=seed), ev, P, free)
    vec = res.params.vector()
    assert all(c.satisfied(vec) for c in cons)
    assert region.contains(vec)
    assert res.score == max(e.score for e in res.audit if e.status == "ok")


def _cycle(i, level, passed, change=None):
    return OptimizationCycle(i, level, {}, {}, passed=passed, change=change or {})


class TestEscalate:
    def test_pass_means_none(self):
        assert escalate([_cycle(0, "parameter", True)], P) is None

    def test_parameter_failure_goes_to_function(self):
        nxt = escalate([_cycle(0, "parameter", False)], P)
        assert nxt.level == "function"
        assert nxt.change == {"placement": "linear"}

    def test_walk_to_terminal(self):
        hist = [_cycle(0, "parameter", False)]
        for _ in range(5):
            try:
                nxt = escalate(hist, P)
            except TerminalFailure as exc:
                report = exc.report()
                break
            hist.append(_cycle(len(hist), nxt.level, False, dict(nxt.change)))
        else:
            pytest.fail("escalation never terminated")
        assert [c.level for c in hist] == ["parameter", "function", "function", "strategy"]
        assert [c.change for c in hist[1:]] == [
            {"placement": "linear"}, {"volatility_estimator": "hl_range_volatility"}, {"strategy": "trend"},
        ]
        assert report["status"] == "terminal_failure" and lint_cycle_log(hist) == []

    def test_linter_flags(self):
        bad = [_cycle(0, "function", False), _cycle(1, "parameter", True), _cycle(2, "strategy", False)]
        problems = lint_cycle_log(bad)
        assert len(problems) == 2
        again = read_cycle_log("".join(__import__("json").dumps(c.to_dict()) + "\n" for c in bad))
        assert lint_cycle_log(again) == problems


class TestCalibration:
    def test_deterministic(self):
        prof = PairProfile("A", tuple(D(x) / 100 for x in (1, 2, 3, 5, 8)), D(5 * 10**7), 3)
        a = initialize_pair_params(prof)
        b = initialize_pair_params(PairProfile("B", prof.phi_history, prof.liquidity, prof.mcap_rank))
        assert a.params == b.params and a.rationale == b.rationale
        assert a.params.volatility_req == D("0.03") and a.params.allocation == D(1000)

    def test_dispersion_widens(self):
        narrow = PairProfile("A", tuple(D(x) / 100 for x in (4, 5, 5, 5, 6)), D(0))
        wide = PairProfile("B", tuple(D(x) / 100 for x in (3, 4, 5, 6, 7)), D(0))
        pa = initialize_pair_params(narrow).params.price_exponents
        pb = initialize_pair_params(wide).params.price_exponents
        assert all(b >= a for a, b in zip(pa, pb)) and pb != pa

    def test_empty(self):
        cal = initialize_pair_params(PairProfile("A"))
        assert cal.params.provenance == "default"
        assert cal.params.price_exponents == BotParams().price_exponents
        assert cal.rationale


class TestDetectors:
    def _feedback(self, name):
        cfg = scenarios.config(name)
        market = cfg.load_market()
        res = run_backtest(market, cfg.params, cfg.sim)
        return assemble_feedback(res.record, market, cfg.detector, cfg.profile)

    def test_clean_period(self):
        fb = self._feedback("range")
        assert fb.metrics["total_return"] > 0
        assert detect_scenarios(fb) == []

    def test_crash(self):
        kinds = [s.kind for s in detect_scenarios(self._feedback("case1_crash"))]
        assert kinds == ["position_cascade"]

    def test_surge(self):
        (sc,) = detect_scenarios(self._feedback("case2_surge"))
        assert sc.kind == "boundary_breach"
        top = sc.quantities["p_before"] * (1 + sc.quantities["phi"]) ** P.price_exponents[-1]
        assert sc.quantities["p_peak"] > top


@pytest.mark.parametrize("seed", range(3))
def test_closed_forms_random(seed):
    rng = random.Random(seed)
    for _ in range(50):
        q_max, a = rng.uniform(10, 5000), rng.uniform(10, 5000)
        c_m, c_f = rng.uniform(0.25, 1), rng.uniform(0.01, 1)
        peak, before, phi = rng.uniform(101, 300), rng.uniform(50, 100), rng.uniform(0.001, 0.5)
        cons = compile_constraints(
            [_cascade(repr(a), repr(c_m), repr(c_f)), _breach(repr(peak), repr(before), repr(phi)),
             _trend(repr(peak - before), repr(before), repr(phi))],
            P, RiskConfig(q_max=D(repr(q_max))),
        )
        want = [
            oracles.cascade_closed_form(q_max, a, c_m, c_f),
            oracles.breach_closed_form(peak, before, phi),
            oracles.trend_closed_form(peak - before, before, phi),
        ]
        for c, w in zip(cons, want):
            assert abs(float(c.bound) - w) / abs(w) < 1e-12
