import numpy as np
import pytest

from hjbr import (
    P1, InvalidInputError, MCConfig, Policy, build_example1, constant_cost_problem, estimate_cost,
    estimate_value, path_costs, tail_bound, truncation_horizon,
)
from hjbr.estimate import boundary_cost_bound, local_time_growth, running_cost_bound, value_bound


def test_constant_cost_telescopes():
    prob = constant_cost_problem(P1, 0.25)
    t = 0.73
    pc = path_costs(prob, Policy.constant(0.5), 0.3, t, 1e-2, 16, seed=0)
    n = pc.n_steps
    exact = 0.25 * (1 - np.exp(-n * 1e-2)) / 1.0
    np.testing.assert_allclose(pc.costs, exact, rtol=0, atol=1e-12)


def test_constant_cost_with_value_terminal_equals_value():
    prob = constant_cost_problem(P1, 0.25)
    pc = path_costs(prob, Policy.constant(0.5), 0.0, 0.5, 1e-3, 8, seed=1, terminal=lambda x: np.full(np.shape(x), 0.25))
    np.testing.assert_allclose(pc.costs, 0.25, rtol=0, atol=1e-10)


def test_bounds_for_reference_problem(ex1):
    assert running_cost_bound(ex1) == pytest.approx(0.25)
    assert boundary_cost_bound(ex1) == pytest.approx(0.2)
    assert value_bound(ex1, 0.0) == pytest.approx(0.25)


def test_tail_bound_decreasing_and_horizon_meets_epsilon(ex1):
    ts = np.linspace(0, 20, 50)
    tails = [tail_bound(ex1, t, 0.05) for t in ts]
    assert np.all(np.diff(tails) < 0)
    T = truncation_horizon(ex1, 1e-4, 0.05)
    assert tail_bound(ex1, T, 0.05) <= 1e-4
    assert tail_bound(ex1, T - 1e-6, 0.05) > 1e-4


def test_truncation_horizon_zero_when_trivial(ex1):
    assert truncation_horizon(ex1, 10.0, 0.05) == 0.0
    with pytest.raises(InvalidInputError):
        truncation_horizon(ex1, 0.0, 0.05)


def test_common_random_numbers(ex1):
    a = path_costs(ex1, Policy.constant(0.2), 0.1, 0.5, 1e-3, 64, seed=9)
    b = path_costs(ex1, Policy.constant(0.2), 0.1, 0.5, 1e-3, 64, seed=9)
    assert a.costs.tobytes() == b.costs.tobytes()


def test_estimate_fields(ex1):
    est = estimate_cost(ex1, Policy.constant(0.5), 0.0, 2.0, 1e-2, 200, seed=0)
    assert est.std_error > 0
    assert est.n_steps == 200
    assert est.tail_bound == pytest.approx(tail_bound(ex1, 2.0, est.local_time_constant))
    assert "mean = " in est.to_text()


def test_policy_family_minimum(ex1):
    mc = MCConfig(n_paths=200, dt=1e-2, horizon=3.0)
    family = [Policy.constant(0.0), Policy.constant(0.5), Policy.constant(1.0)]
    best, idx = estimate_value(ex1, 0.0, family, mc)
    assert idx == 1  # u = theta_d makes the running cost vanish


def test_local_time_growth_monotone(ex1):
    lt = local_time_growth(build_example1(P1.replace(sigma_x=1.0)), Policy.constant(0.5), 0.9,
                           [0.5, 1.0, 2.0], 1e-2, 100, seed=0)
    assert lt.shape == (3, 100)
    assert np.all(np.diff(lt, axis=0) >= 0)
    assert lt[-1].mean() > 0


def test_mc_config_validation():
    with pytest.raises(InvalidInputError):
        MCConfig(n_paths=0)
    with pytest.raises(InvalidInputError):
        MCConfig(horizon=None, epsilon=None)
