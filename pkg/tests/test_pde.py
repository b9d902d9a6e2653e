import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjbr import (
    P1, DomainSpec, InvalidInputError, UnsupportedDimensionError, ValueFunction, assemble_fixed_policy,
    build_example1, build_example2, build_grid, constant_cost_problem, extract_policy, policy_iteration,
)
from hjbr.pde import discrete_residual, write_convergence_log, write_value_csv


def test_grid_shape():
    g = build_grid(DomainSpec(2.0), 5)
    np.testing.assert_allclose(g.nodes, [-2, -1, 0, 1, 2])
    assert g.spacing == 1.0
    with pytest.raises(InvalidInputError):
        build_grid(DomainSpec(1.0), 2)
    with pytest.raises(UnsupportedDimensionError):
        build_grid(DomainSpec(1.0, dim=2), 11)


def test_constant_cost_exact():
    vf = policy_iteration(constant_cost_problem(P1, 0.25), build_grid(DomainSpec(1.0), 101))
    np.testing.assert_allclose(vf.values, 0.25, rtol=0, atol=1e-12)


def test_zero_boundary_cost_gives_zero_value():
    prob = build_example1(P1.replace(theta_e=0.0, theta_d=0.3))
    vf = policy_iteration(prob, build_grid(prob.domain, 101))
    assert np.max(np.abs(vf.values)) <= 1e-12
    np.testing.assert_allclose(vf.policy, 0.3, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dominance_for_random_policies(seed):
    rng = np.random.default_rng(seed)
    for prob in (build_example1(P1), build_example2(P1)):
        grid = build_grid(prob.domain, 41)
        sys = assemble_fixed_policy(prob, grid, rng.uniform(0, 1, 41))
        margin = sys.dominance_margin()
        assert np.all(margin[1:-1] >= prob.beta - 1e-9)
        assert np.all(margin[[0, -1]] >= 0)
        assert np.all(sys.lower[1:] <= 0) and np.all(sys.upper[:-1] <= 0)


def test_solution_satisfies_scheme(ex1):
    vf = policy_iteration(ex1, build_grid(ex1.domain, 201))
    res = discrete_residual(ex1, vf.grid, vf.policy, vf.values)
    assert np.max(np.abs(res)) <= 1e-9
    # Neumann rows: one-sided derivatives equal theta_e in the outward direction.
    dx = vf.grid.spacing
    assert (vf.values[0] - vf.values[1]) / dx == pytest.approx(0.2)
    assert (vf.values[-1] - vf.values[-2]) / dx == pytest.approx(0.2)


def test_reference_values(ex1):
    vf = policy_iteration(ex1, build_grid(ex1.domain, 401))
    assert vf.iterations <= 10
    assert vf(0.0) == pytest.approx(0.0038, abs=2e-4)
    assert vf(-1.0) > vf(1.0) > vf(0.0) > 0


def test_example2_converges(ex2):
    vf = policy_iteration(ex2, build_grid(ex2.domain, 201))
    assert np.all(np.isfinite(vf.values))
    assert np.all((vf.policy >= 0) & (vf.policy <= 1))


def test_initial_policy_independence(ex1):
    grid = build_grid(ex1.domain, 101)
    a = policy_iteration(ex1, grid, initial_policy=0.0)
    b = policy_iteration(ex1, grid, initial_policy=1.0)
    np.testing.assert_allclose(a.values, b.values, rtol=0, atol=1e-8)


def test_no_convergence_error(ex1):
    from hjbr import NoConvergenceError
    with pytest.raises(NoConvergenceError) as info:
        policy_iteration(ex1, build_grid(ex1.domain, 101), max_iter=1, initial_policy=0.0)
    assert info.value.iterations == 1


def test_extracted_policy_interpolates(ex1):
    vf = policy_iteration(ex1, build_grid(ex1.domain, 101))
    pol = extract_policy(vf)
    np.testing.assert_allclose(pol.control(vf.grid.nodes, 0, 1), vf.policy, atol=1e-14)
    mid = 0.5 * (vf.grid.nodes[10] + vf.grid.nodes[11])
    assert pol.control(mid, 0, 1) == pytest.approx(0.5 * (vf.policy[10] + vf.policy[11]))


def test_from_values_round_trip(ex1):
    vf = policy_iteration(ex1, build_grid(ex1.domain, 101))
    again = ValueFunction.from_values(ex1, vf.grid, vf.values)
    np.testing.assert_array_equal(again.policy, vf.policy)


def test_csv_writers(tmp_path, ex1):
    vf = policy_iteration(ex1, build_grid(ex1.domain, 11))
    write_value_csv(vf, tmp_path / "v.csv", "hdr")
    write_convergence_log(vf, tmp_path / "c.csv")
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[:2] == ["# hdr", "x,v,policy"] and len(lines) == 13
    assert (tmp_path / "c.csv").read_text().startswith("iteration,sup_update\n1,inf\n")


def test_values_within_a_priori_bound(ex1):
    from hjbr.estimate import estimate_local_time_constant, value_bound
    vf = policy_iteration(ex1, build_grid(ex1.domain, 201))
    c = estimate_local_time_constant(ex1, extract_policy(vf), 0.0, 1e-2, n_paths=500)
    assert np.max(np.abs(vf.values)) <= value_bound(ex1, c)
