"""Noise plan determinism and the compensated Euler simulator."""

import numpy as np
import pytest
from scipy import stats

from helpers import random_problem, scalar_problem

from jumplq import (NoisePlan, NumericalFailure, closed_loop_strategy, euler_step, poisson_icdf,
                    simulate_closed_loop, simulate_open_loop, solve_adjoint, solve_riccati, validate)


def test_poisson_icdf_matches_reference_quantiles():
    rng = np.random.default_rng(31)
    for lam in (0.0, 1e-4, 0.05, 0.7, 3.0, 12.0):
        u = rng.uniform(1e-9, 1.0 - 1e-9, size=500)
        ours = poisson_icdf(u, lam)
        ref = stats.poisson.ppf(u, lam) if lam > 0 else np.zeros_like(u)
        assert np.array_equal(ours, ref.astype(np.int64))


def test_poisson_icdf_extremes():
    assert np.all(poisson_icdf(np.full(10, 1e-300), 0.5) == 0)
    assert poisson_icdf(np.array([0.9]), 1e-6)[0] == 0  # cdf(0) already covers it
    assert poisson_icdf(np.array([1.0 - 1e-12]), 1e-6)[0] == 1  # but the far tail does not
    assert poisson_icdf(np.array([0.99999]), 4.0)[0] > 4


def test_uniforms_are_strictly_inside_unit_interval():
    plan = NoisePlan(seed=1, paths=20000)
    u = plan.uniforms(0, 0)
    assert np.all(u > 0.0) and np.all(u < 1.0)


def test_draws_are_addressed_by_coordinates():
    plan = NoisePlan(seed=42, paths=256)
    a = plan.uniforms(3, 0)
    assert np.array_equal(a, NoisePlan(seed=42, paths=256).uniforms(3, 0))
    assert not np.array_equal(a, plan.uniforms(4, 0))
    assert not np.array_equal(a, plan.uniforms(3, 1))
    assert not np.array_equal(a, NoisePlan(seed=43, paths=256).uniforms(3, 0))


def test_draws_are_prefix_stable_in_path_count():
    # Path p must see the same numbers no matter how many paths run beside it.
    small = NoisePlan(seed=7, paths=100)
    large = NoisePlan(seed=7, paths=4096)
    assert np.array_equal(large.uniforms(5, 0)[:100], small.uniforms(5, 0))
    assert np.array_equal(large.brownian(9, 0.01)[:100], small.brownian(9, 0.01))
    lam = np.array([0.3])
    assert np.array_equal(large.mark_counts(2, lam)[:100], small.mark_counts(2, lam))


def test_brownian_and_poisson_moments():
    plan = NoisePlan(seed=5, paths=200000)
    h = 0.02
    dw = plan.brownian(0, h)
    assert abs(float(np.mean(dw))) <= 4.0 * np.sqrt(h / plan.paths)
    assert float(np.var(dw)) == pytest.approx(h, rel=0.02)
    lam = 0.25
    dn = plan.mark_counts(0, np.array([lam]))[:, 0]
    assert float(np.mean(dn)) == pytest.approx(lam, abs=4.0 * np.sqrt(lam / plan.paths))


def test_euler_step_drift_only():
    prob = validate(scalar_problem(A=2.0, B=1.0, b=0.5, steps=10))
    # X' = X + [A X + B u + b] h with h = 0.1.
    x1 = euler_step(np.array([1.0]), np.array([3.0]), 0.0, 0.0, np.zeros((0,)), prob)
    assert x1[0] == pytest.approx(1.0 + 0.1 * (2.0 + 3.0 + 0.5), abs=1e-14)


def test_euler_step_compensated_jump():
    prob = validate(scalar_problem(F=(1.0,), G=(0.0,), pis=(1.0,), fj=(0.0,), steps=100))
    # One jump against intensity 1 over h = 0.01: X' = 1 + 1*(1 - 0.01) = 1.99.
    x1 = euler_step(np.array([1.0]), np.array([0.0]), 0.0, 0.0, np.array([1]), prob)
    assert x1[0] == pytest.approx(1.99, abs=1e-15)


def test_euler_step_diffusion_term():
    prob = validate(scalar_problem(C=0.5, D=0.2, sigma=1.0, steps=10))
    x1 = euler_step(np.array([2.0]), np.array([1.0]), 0.0, 0.3, np.zeros((0,)), prob)
    assert x1[0] == pytest.approx(2.0 + 0.3 * (1.0 + 0.2 + 1.0), abs=1e-14)


def _solved_strategy(spec):
    prob = validate(spec)
    ride = solve_riccati(prob)
    adj = solve_adjoint(prob, ride)
    return prob, closed_loop_strategy(prob, ride, adj)


def test_simulation_batch_shapes_and_initial_state():
    prob, strat = _solved_strategy(scalar_problem(B=1.0, R=1.0, H=1.0, sigma=0.5,
                                                  F=(0.2,), G=(0.0,), pis=(0.5,), fj=(0.1,),
                                                  steps=40))
    batch = simulate_closed_loop(prob, strat, NoisePlan(seed=2, paths=8))
    assert batch.X.shape == (8, 41, 1)
    assert batch.u.shape == (8, 40, 1)
    assert batch.jump_counts.shape == (8, 40, 1)
    assert batch.jump_counts.dtype == np.int64
    assert np.all(batch.X[:, 0, 0] == prob.x0[0])
    traj = batch.path(3)
    assert np.array_equal(traj.X, batch.X[3])


def test_simulation_is_reproducible_bit_for_bit():
    rng = np.random.default_rng(33)
    spec = random_problem(rng, steps=30, inhomogeneous=True)
    prob, strat = _solved_strategy(spec)
    a = simulate_closed_loop(prob, strat, NoisePlan(seed=11, paths=64))
    b = simulate_closed_loop(prob, strat, NoisePlan(seed=11, paths=64))
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.jump_counts, b.jump_counts)


def test_recorded_controls_replay_identically():
    prob, strat = _solved_strategy(scalar_problem(B=1.0, R=1.0, H=1.0, sigma=1.0, steps=50))
    plan = NoisePlan(seed=4, paths=32)
    closed = simulate_closed_loop(prob, strat, plan)
    replay = simulate_open_loop(prob, closed.u, plan)
    assert np.array_equal(replay.X, closed.X)


def test_pure_jump_compensated_state_is_a_martingale():
    # No drift, no diffusion: E[X_{k+1} | X_k] = X_k exactly under the scheme.
    prob, strat = _solved_strategy(scalar_problem(F=(1.0,), G=(0.0,), pis=(1.0,), fj=(0.0,),
                                                  H=1.0, x0=1.0, steps=100))
    batch = simulate_closed_loop(prob, strat, NoisePlan(seed=6, paths=4000))
    final = batch.X[:, -1, 0]
    se = float(np.std(final, ddof=1) / np.sqrt(len(final)))
    assert abs(float(np.mean(final)) - 1.0) <= 3.0 * se


def test_open_loop_accepts_shared_and_per_path_controls():
    prob = validate(scalar_problem(B=1.0, R=1.0, steps=20))
    plan = NoisePlan(seed=9, paths=5)
    shared = np.ones((20, 1))
    a = simulate_open_loop(prob, shared, plan)
    per_path = np.tile(shared, (5, 1, 1))
    b = simulate_open_loop(prob, per_path, plan)
    assert np.array_equal(a.X, b.X)


def test_divergent_simulation_reports_path_and_step():
    wild = validate(scalar_problem(A=1e200, b=1.0, steps=5))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NumericalFailure) as info:
            simulate_open_loop(wild, np.zeros((5, 1)), NoisePlan(seed=1, paths=3))
    assert info.value.step is not None and info.value.path is not None
