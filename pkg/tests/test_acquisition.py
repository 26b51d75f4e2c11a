import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import frozen
from ragoose.acquisition import (AcquisitionContext, InfeasibleError, PsoConfig, constrained_ei,
                                 lcb_acq, pso_minimize, rahbo_acq)
from ragoose.gp import KernelConfig, TrainingSet, fit
from ragoose.risk import RiskConfig
from ragoose.safeset import DiscretizedDomain, build_safe_region, discretization_step


def prior(dim, sd, ls, mu0):
    return fit(TrainingSet.empty(dim), KernelConfig(sd, (ls,) * dim, prior_mean=mu0))


def quadratic_f(center, ls=1.0):
    # a GP whose mean is (nearly) a bowl centred on ``center``
    X = np.linspace(0, 10, 41)[:, None]
    y = (X[:, 0] - center) ** 2 / 10.0
    return fit(TrainingSet(X, y, 1e-6), KernelConfig(3.0, (ls,), prior_mean=float(y.mean())))


def safe_everywhere_region(q_model, lo=0.0, hi=10.0):
    dom = DiscretizedDomain([[lo, hi]], discretization_step(q_model.config))
    return build_safe_region(q_model, dom, 3.0, 0.6, 3.0)


def test_pso_config_validation():
    with pytest.raises(ValueError):
        PsoConfig(particles=2)
    with pytest.raises(ValueError):
        PsoConfig(iterations=0)
    with pytest.raises(ValueError):
        PsoConfig(inertia=1.5)
    with pytest.raises(ValueError):
        PsoConfig(velocity_clamp=0.0)


def test_context_rejects_mixed_dimensions():
    with pytest.raises(ValueError):
        AcquisitionContext(prior(1, 1, 1, 0), prior(2, 1, 1, 0), prior(1, 1, 1, 0), RiskConfig(),
                           None, 3.0, bounds=[[0, 1]])


def test_context_needs_bounds():
    with pytest.raises(ValueError):
        AcquisitionContext(prior(1, 1, 1, 0), None, prior(1, 1, 1, 0), RiskConfig(), None, 3.0)


def test_rahbo_reduces_to_lcb_at_zero_alpha(rng):
    f = fit(TrainingSet(rng.uniform(0, 10, (5, 1)), rng.normal(size=5), 0.01),
            KernelConfig(1.0, (1.0,)))
    ctx = AcquisitionContext(f, prior(1, 0.01, 1.0, 0.3), prior(1, 1, 1, 0),
                             RiskConfig(alpha=0.0), None, 3.0, bounds=[[0, 10]])
    X = np.linspace(0, 10, 33)[:, None]
    np.testing.assert_array_equal(rahbo_acq(ctx, X), lcb_acq(ctx, X))


def test_rahbo_on_priors():
    ctx = AcquisitionContext(prior(2, 1.0, 50.0, 0.0), prior(2, 0.01, 50.0, 0.3),
                             prior(2, 1.0, 50.0, 0.0), RiskConfig(alpha=10.0), None, 3.0,
                             bounds=[[0, 100], [0, 100]])
    # -3 + 10 * (0.3 - 0.03)
    assert rahbo_acq(ctx, np.array([[20.0, 70.0]]))[0] == pytest.approx(-0.3, abs=1e-12)
    ctx.risk = RiskConfig(alpha=30.0)
    assert rahbo_acq(ctx, np.array([[20.0, 70.0]]))[0] == pytest.approx(5.1, abs=1e-12)


@given(st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_rahbo_monotone_in_alpha(a1, a2):
    lo, hi = sorted((a1, a2))
    X = np.array([[0.1], [0.5], [0.9]])
    var = fit(TrainingSet(X, np.array([0.02, 0.2, 0.05]), 1e-4),
              KernelConfig(0.05, (0.3,), prior_mean=0.05))
    f = prior(1, 1.0, 0.3, 0.0)
    x = np.linspace(0, 1, 21)[:, None]
    a = rahbo_acq(AcquisitionContext(f, var, f, RiskConfig(alpha=lo), None, 3.0, [[0, 1]]), x)
    b = rahbo_acq(AcquisitionContext(f, var, f, RiskConfig(alpha=hi), None, 3.0, [[0, 1]]), x)
    assert np.all(a <= b + 1e-12)


def test_constrained_ei_zero_spread():
    f = fit(TrainingSet(np.array([[0.0]]), np.array([1.0]), 0.0), KernelConfig(1.0, (1.0,)))
    q = prior(1, 1e-9, 1.0, -100.0)
    assert constrained_ei(f, q, 0.5, [[0.0]], 3.0)[0] == pytest.approx(0.0, abs=1e-6)
    assert constrained_ei(f, q, 1.5, [[0.0]], 3.0)[0] == pytest.approx(0.5, abs=1e-6)


def test_constrained_ei_matches_monte_carlo():
    f = prior(1, 0.7, 1.0, 0.0)
    q = prior(1, 1e-6, 1.0, -100.0)
    ei = constrained_ei(f, q, 0.7, [[0.3]], 3.0)[0]
    assert ei / 0.7 == pytest.approx(frozen.EI_Z1_MC, abs=3e-3)


def test_constrained_ei_halves_on_coin_flip_feasibility():
    f = prior(1, 0.7, 1.0, 0.0)
    full = constrained_ei(f, prior(1, 1e-6, 1.0, -100.0), 0.7, [[0.3]], 3.0)[0]
    half = constrained_ei(f, prior(1, 2.0, 1.0, 3.0), 0.7, [[0.3]], 3.0)[0]
    assert half == pytest.approx(full / 2, rel=1e-12)


def test_constrained_ei_rejects_infinite_incumbent():
    with pytest.raises(ValueError):
        constrained_ei(prior(1, 1, 1, 0), prior(1, 1, 1, 0), np.inf, [[0.0]], 3.0)


def test_pso_finds_quadratic_minimum():
    f = quadratic_f(6.3)
    q = prior(1, 0.1, 1.0, 0.0)
    region = safe_everywhere_region(q)
    ctx = AcquisitionContext(f, None, q, RiskConfig(beta_f=0.0), region, 3.0)
    x, val = pso_minimize(lambda X: lcb_acq(ctx, X), ctx, PsoConfig(seed=3))
    assert abs(x[0] - 6.3) <= 0.5 * region.domain.step[0]


def test_pso_single_safe_cell():
    dom = DiscretizedDomain([[0.0, 10.0]], [0.3])
    q = fit(TrainingSet(dom.points[[10]], np.array([-20.0]), 0.0),
            KernelConfig(4.0, (0.05,), prior_mean=6.0))
    region = build_safe_region(q, dom, 3.0, 0.6, 3.0)
    assert region.n_safe == 1
    ctx = AcquisitionContext(prior(1, 1, 1, 0), None, q, RiskConfig(), region, 3.0)
    x, _ = pso_minimize(lambda X: lcb_acq(ctx, X), ctx, PsoConfig(seed=0))
    assert region.admissible(x[None, :])[0]


def test_pso_deterministic_for_fixed_seed():
    f = quadratic_f(2.2)
    q = prior(1, 0.1, 1.0, 0.0)
    ctx = AcquisitionContext(f, None, q, RiskConfig(), safe_everywhere_region(q), 3.0)
    a = pso_minimize(lambda X: lcb_acq(ctx, X), ctx, PsoConfig(seed=7))
    b = pso_minimize(lambda X: lcb_acq(ctx, X), ctx, PsoConfig(seed=7))
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_pso_result_is_admissible_and_beats_grid(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 10, (6, 1))
    q = fit(TrainingSet(X, rng.uniform(0, 4, 6), 0.01), KernelConfig(2.0, (1.0,), prior_mean=3.0))
    f = fit(TrainingSet(X, rng.normal(size=6), 0.01), KernelConfig(1.0, (1.0,)))
    dom = DiscretizedDomain([[0.0, 10.0]], discretization_step(q.config))
    region = build_safe_region(q, dom, 3.0, 0.6, 3.0)
    ctx = AcquisitionContext(f, None, q, RiskConfig(), region, 3.0)
    obj = lambda Z: lcb_acq(ctx, Z)
    if region.n_safe == 0:
        with pytest.raises(InfeasibleError):
            pso_minimize(obj, ctx, PsoConfig(seed=seed % 1000))
        return
    x, val = pso_minimize(obj, ctx, PsoConfig(seed=seed % 1000))
    assert region.admissible(x[None, :])[0]
    assert val == pytest.approx(obj(x[None, :])[0], abs=1e-12)
    assert val <= obj(region.safe_points).min() + 1e-6


def test_pso_raises_on_empty_safe_set():
    q = prior(1, 4.0, 1.0, 6.0)
    dom = DiscretizedDomain([[0.0, 10.0]], [0.5])
    region = build_safe_region(q, dom, 3.0, 0.6, 3.0)
    ctx = AcquisitionContext(prior(1, 1, 1, 0), None, q, RiskConfig(), region, 3.0)
    with pytest.raises(InfeasibleError):
        pso_minimize(lambda X: lcb_acq(ctx, X), ctx)


def test_zero_alpha_pso_matches_lcb_argmin_on_grid():
    f = quadratic_f(4.0)
    q = prior(1, 0.1, 1.0, 0.0)
    region = safe_everywhere_region(q)
    var = prior(1, 0.01, 1.0, 0.3)
    ctx = AcquisitionContext(f, var, q, RiskConfig(alpha=0.0), region, 3.0)
    x, _ = pso_minimize(lambda X: rahbo_acq(ctx, X), ctx, PsoConfig(seed=1))
    grid = region.safe_points
    x_grid = grid[np.argmin(lcb_acq(ctx, grid))]
    assert abs(x[0] - x_grid[0]) <= region.domain.step[0]
