import numpy as np
import pytest

import frozen
from ragoose.benchmarks import synthetic as syn


def test_three_global_minima():
    for x in (1.5, 4.5, 7.5):
        assert syn.objective(x) == pytest.approx(-1.0, abs=1e-15)


def test_noise_levels_at_minima():
    assert syn.noise_var(1.5) == pytest.approx(frozen.SYN_RHO2_15, rel=1e-14)
    assert syn.noise_var(4.5) == pytest.approx(frozen.SYN_RHO2_45, rel=1e-14)
    assert syn.noise_var(1.5) == pytest.approx(0.0121, abs=5e-5)


def test_constraint_values():
    assert syn.constraint(0.5) == pytest.approx(frozen.SYN_Q_05, rel=1e-12)
    assert syn.constraint(7.5) == pytest.approx(frozen.SYN_Q_75, rel=1e-14)
    assert syn.constraint(0.5) <= syn.THRESHOLD < syn.constraint(7.5)


def test_invariants_on_dense_grid():
    xs = np.linspace(0, 10, 10_000)
    f = np.array([syn.objective(x) for x in xs])
    v = np.array([syn.noise_var(x) for x in xs])
    q = np.array([syn.constraint(x) for x in xs])
    assert np.all(f >= -1.0) and np.all(f <= 1.0)
    assert np.all(v > 0.01) and np.all(v < 0.2)
    assert np.all(np.diff(v) > 0)
    assert np.all(np.diff(q) > 0)
    assert np.all(q[xs <= 1.0] <= syn.THRESHOLD)


def test_eval_outside_domain_raises(rng):
    with pytest.raises(ValueError):
        syn.synthetic_eval(10.5, rng)
    with pytest.raises(ValueError):
        syn.synthetic_eval(-0.1, rng)


def test_eval_draw_statistics():
    rng = np.random.default_rng(5)
    ys, m = syn.synthetic_eval(4.5, rng, k=20_000)
    assert ys.mean() == pytest.approx(-1.0, abs=4 * np.sqrt(frozen.SYN_RHO2_45 / 20_000))
    assert ys.var(ddof=1) == pytest.approx(frozen.SYN_RHO2_45, rel=0.05)
    assert np.isfinite(m)


def test_problem_shape():
    prob = syn.synthetic_problem()
    assert prob.dim == 1
    assert prob.seeds.shape == (5, 1)
    assert prob.check_seeds()
    assert prob.eps == pytest.approx(0.6)


def test_mv_optimum():
    x, f, v = syn.mv_optimum(0.0)
    assert f == pytest.approx(-1.0, abs=1e-8)
    x, f, v = syn.mv_optimum(50.0)
    assert x < 3.0
    assert syn.constraint(x) <= syn.THRESHOLD
    assert f + 50 * v <= -1.0 + 50 * frozen.SYN_RHO2_15
