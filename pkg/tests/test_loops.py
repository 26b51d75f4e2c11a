import dataclasses

import numpy as np
import pytest

import frozen
from ragoose.acquisition import PsoConfig
from ragoose.benchmarks.synthetic import mv_optimum, synthetic_problem
from ragoose.gp import KernelConfig, TrainingSet, fit
from ragoose.loops import (RunAborted, audit_trace, cbo_run, goose_run, ragoose_run, recommend,
                           regret_series, run_algorithm)
from ragoose.risk import RiskConfig

FAST_PSO = PsoConfig(particles=12, iterations=15, seed=0)


@pytest.fixture(scope="module")
def short_runs():
    prob = synthetic_problem()
    return {
        "ragoose": ragoose_run(prob, RiskConfig(alpha=30.0), FAST_PSO, T=12, seed=4),
        "goose": goose_run(prob, FAST_PSO, T=12, seed=4),
        "cbo": cbo_run(prob, T=6, seed=4, pso=FAST_PSO),
    }


def test_single_iteration_yields_one_record():
    tr = ragoose_run(synthetic_problem(), RiskConfig(alpha=10.0), FAST_PSO, T=1, seed=0)
    assert len(tr) == 1
    assert tr.records[0].t == 1
    assert tr.final_x is not None


def test_zero_iterations_rejected():
    with pytest.raises(ValueError):
        ragoose_run(synthetic_problem(), RiskConfig(), FAST_PSO, T=0)


def test_unknown_algorithm_rejected():
    with pytest.raises(ValueError):
        run_algorithm(synthetic_problem(), "bogus", RiskConfig(), FAST_PSO, 1, 0)


def test_runs_are_deterministic():
    prob = synthetic_problem()
    a = ragoose_run(prob, RiskConfig(alpha=30.0), FAST_PSO, T=5, seed=2)
    b = ragoose_run(prob, RiskConfig(alpha=30.0), FAST_PSO, T=5, seed=2)
    np.testing.assert_array_equal(a.X, b.X)
    assert [r.y for r in a.records] == [r.y for r in b.records]
    np.testing.assert_array_equal(a.final_x, b.final_x)


def test_goose_runs_risk_neutral(short_runs):
    assert short_runs["goose"].alpha == 0.0
    assert short_runs["goose"].config["risk"]["alpha"] == 0.0
    assert short_runs["ragoose"].alpha == 30.0


def test_trace_lengths_and_roles(short_runs):
    for name, tr in short_runs.items():
        assert len(tr) == tr.config["T"]
        assert [r.t for r in tr.records] == list(range(1, len(tr) + 1))
        assert all(r.role in ("optimum", "expander", "fallback") for r in tr.records)
        assert all(r.s2 >= 0 for r in tr.records)
        assert all(0.0 <= r.x[0] <= 10.0 for r in tr.records)
    assert all(r.role == "optimum" for r in short_runs["cbo"].records)


def test_safe_runs_pass_their_own_audit(short_runs):
    prob = synthetic_problem()
    assert audit_trace(short_runs["ragoose"], prob) == []
    assert audit_trace(short_runs["goose"], prob) == []


def test_expander_queries_are_flagged(short_runs):
    for tr in (short_runs["ragoose"], short_runs["goose"]):
        for r in tr.records:
            assert r.in_expanders == (r.role == "expander")


def test_violation_flag_matches_measurement(short_runs):
    for tr in short_runs.values():
        for r in tr.records:
            assert r.violation == (r.m > 3.0)
        assert tr.violations == sum(r.violation for r in tr.records)


def test_overly_cautious_model_falls_back_to_seeds():
    prob = synthetic_problem()
    tr = ragoose_run(prob, RiskConfig(beta_q=1e6), FAST_PSO, T=7, seed=0)
    assert all(r.role == "fallback" for r in tr.records)
    expected = np.array([prob.seeds[i % 5] for i in range(7)])
    np.testing.assert_array_equal(tr.X, expected)
    assert audit_trace(tr, prob) == []


def test_failure_keeps_partial_trace():
    prob = synthetic_problem()
    calls = {"n": 0}

    def flaky(x, k, rng):
        calls["n"] += 1
        if calls["n"] > len(prob.seeds) + 3:
            raise RuntimeError("sensor dropout")
        return prob.objective(x) + 0.1 * rng.standard_normal(k), 0.0

    prob = dataclasses.replace(prob, sampler=flaky)
    with pytest.raises(RunAborted) as info:
        goose_run(prob, FAST_PSO, T=10, seed=0)
    assert info.value.trace is not None
    assert len(info.value.trace) == 3
    assert "sensor dropout" in str(info.value)


def test_recommend_picks_lowest_pessimistic_score():
    X = np.array([[0.0], [5.0]])
    f = fit(TrainingSet(X, np.array([1.0, -1.0]), 1e-8), KernelConfig(1.0, (0.5,)))
    var = fit(TrainingSet(X, np.array([0.01, 0.2]), 1e-8), KernelConfig(0.1, (0.5,)))
    assert recommend(f, var, X, alpha=0.0, beta_f=0.0, beta_var=0.0)[0] == 5.0
    # 1 + 20 * 0.01 = 1.2 beats -1 + 20 * 0.2 = 3
    assert recommend(f, var, X, alpha=20.0, beta_f=0.0, beta_var=0.0)[0] == 0.0


def test_recommend_ties_go_first():
    f = fit(TrainingSet.empty(1), KernelConfig(1.0, (1.0,)))
    C = np.array([[3.0], [1.0], [2.0]])
    assert recommend(f, None, C, alpha=0.0)[0] == 3.0


def test_recommend_uses_fallback_without_candidates():
    f = fit(TrainingSet.empty(1), KernelConfig(1.0, (1.0,)))
    out = recommend(f, None, np.empty((0, 1)), 0.0, fallback=np.array([[0.25], [0.75]]))
    assert out[0] == 0.25
    with pytest.raises(ValueError):
        recommend(f, None, np.empty((0, 1)), 0.0)


def test_regret_series_values(short_runs):
    prob = synthetic_problem()
    x_star, f_star, v_star = mv_optimum(50.0)
    opt = f_star + 50.0 * v_star
    tr = short_runs["goose"]
    recs = [dataclasses.replace(tr.records[0], x=np.array([x_star])),
            dataclasses.replace(tr.records[0], x=np.array([4.5]))]
    tr = dataclasses.replace(tr, records=recs)
    reg = regret_series(tr, prob, opt, weight=50.0)
    assert reg[0] == pytest.approx(0.0, abs=1e-12)
    assert reg[1] == pytest.approx(-1.0 + 50.0 * frozen.SYN_RHO2_45 - opt, rel=1e-9)
    assert reg[1] > 9.0
    reg0 = regret_series(tr, prob, -1.0, weight=0.0)
    assert reg0[1] == pytest.approx(0.0, abs=1e-12)


def test_regret_non_negative_on_safe_queries(short_runs):
    prob = synthetic_problem()
    _, f_star, v_star = mv_optimum(50.0)
    reg = regret_series(short_runs["ragoose"], prob, f_star + 50.0 * v_star)
    safe = np.array([prob.constraint(r.x) <= 3.0 for r in short_runs["ragoose"].records])
    assert np.all(reg[safe] >= -1e-9)


def test_best_so_far_mean_variance_is_monotone(short_runs):
    prob = synthetic_problem()
    mv = np.array([prob.mv(r.x, 50.0) for r in short_runs["ragoose"].records])
    best = np.minimum.accumulate(mv)
    assert np.all(np.diff(best) <= 0)


def test_recommendations_are_certified(short_runs):
    prob = synthetic_problem()
    for tr in (short_runs["ragoose"], short_runs["goose"]):
        for r in tr.records:
            assert prob.bounds[0, 0] <= r.recommendation[0] <= prob.bounds[0, 1]
        assert prob.constraint(tr.final_x) <= 3.0
