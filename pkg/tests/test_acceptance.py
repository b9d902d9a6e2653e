"""End-to-end acceptance checks, one test per criterion.

Each test records a single ``criterion N: PASS|FAIL`` line which is echoed
in the terminal summary.
"""
import time

import numpy as np
import pytest

import hjbr.simulate as sim
from hjbr import (
    P1, DerivativeProbe, MCConfig, Policy, analytic_control_ex1, analytic_control_ex2,
    assemble_fixed_policy, build_example1, build_example2, build_grid, check_dpp,
    check_viscosity_residuals, compare_mc_pde, constant_cost_problem, extract_policy, generator_apply,
    hamiltonian_eval, path_costs, policy_iteration, simulate_batch, with_running_cost,
)
from hjbr.estimate import local_time_growth
from hjbr.verify import default_policy_family


def residual_ok(problem, vf):
    rep = check_viscosity_residuals(problem, vf)
    bound = 1e-6 * (1 + np.max(np.abs(vf.values)))
    return (rep.interior_max_abs_residual <= bound and rep.boundary_sub_ok and rep.boundary_super_ok), rep


@pytest.fixture(scope="module")
def p1_solution():
    prob = build_example1(P1)
    return prob, policy_iteration(prob, build_grid(prob.domain, 401))


# Solves from criteria 1 and 3, re-checked in criterion 5.
SOLVES = []


def test_criterion_1_trivial_solutions(record):
    details, ok = [], True
    for n in (101, 401):
        prob = constant_cost_problem(P1, 0.25)
        t0 = time.perf_counter()
        vf = policy_iteration(prob, build_grid(prob.domain, n))
        elapsed = time.perf_counter() - t0
        err = float(np.max(np.abs(vf.values - 0.25)))
        ok &= err <= 1e-9 and elapsed < 1.0
        details.append(f"const n={n} err={err:.1e} t={elapsed:.3f}s")
        SOLVES.append((prob, vf))
    for theta_d in (0.5, 0.3, 0.0, 1.0):
        prob = build_example1(P1.replace(theta_e=0.0, theta_d=theta_d))
        vf = policy_iteration(prob, build_grid(prob.domain, 401))
        err_v = float(np.max(np.abs(vf.values)))
        err_u = float(np.max(np.abs(vf.policy - theta_d)))
        ok &= err_v <= 1e-8 and err_u <= 1e-8
        details.append(f"theta_d={theta_d} |v|={err_v:.1e} |u-theta_d|={err_u:.1e}")
        SOLVES.append((prob, vf))
    assert record(1, ok, "; ".join(details))


def test_criterion_2_argmin_oracle(record, rng):
    us = np.linspace(0.0, 1.0, 10_000)
    worst_u = worst_obj = 0.0
    for builder, name in ((build_example1, "ex1"), (build_example2, "ex2")):
        prob = builder(P1)
        x = rng.uniform(-1, 1, 1000)
        g = rng.uniform(-6, 6, 1000)
        h = rng.uniform(-40, 40, 1000)
        probe = DerivativeProbe(x[:, None], 0.0, g[:, None], h[:, None])
        obj = generator_apply(prob, us[None, :], probe) + prob.running_cost(x[:, None], us[None, :])
        i = np.argmin(obj, axis=1)
        u_grid, obj_grid = us[i], obj[np.arange(1000), i]
        u_an = analytic_control_ex1(P1, g) if name == "ex1" else analytic_control_ex2(P1, x, g, h)
        p_an = DerivativeProbe(x, 0.0, g, h)
        obj_an = generator_apply(prob, u_an, p_an) + prob.running_cost(x, u_an)
        _, u_num = hamiltonian_eval(prob, p_an)
        worst_u = max(worst_u, np.max(np.abs(u_an - u_grid)), np.max(np.abs(u_num - u_an)))
        worst_obj = max(worst_obj, np.max(np.abs(obj_an - obj_grid)))
    g = rng.uniform(-6, 6, 1000)
    h = rng.uniform(-40, 40, 1000)
    reduction = np.array_equal(analytic_control_ex2(P1, 0.0, g, h), analytic_control_ex1(P1, g))
    ok = worst_u <= 1e-4 and worst_obj <= 1e-8 and reduction
    assert record(2, ok, f"max|du|={worst_u:.1e} max|dobj|={worst_obj:.1e} x=0 reduction exact={reduction}")


def test_criterion_3_mc_vs_pde(record, p1_solution):
    prob, vf = p1_solution
    SOLVES.append((prob, vf))
    mc = MCConfig(n_paths=100_000, dt=1e-3, epsilon=1e-4, seed=0)
    t0 = time.perf_counter()
    rep = compare_mc_pde(prob, vf, [-0.9, 0.0, 0.9], mc, scheme_budget=0.02, agreement_tol=0.05)
    elapsed = time.perf_counter() - t0
    rows = " ".join(f"x={r['x']:+.1f}: pde={r['v_pde']:.5f} mc={r['v_mc']:.5f}+-{r['std_error']:.1e}"
                    f" T={r['horizon']:.2f}" for r in rep.rows)
    ok = rep.passed and elapsed < 300
    assert record(3, ok, f"{rows} max|diff|={rep.max_abs_diff:.4f} t={elapsed:.0f}s")


def test_criterion_4_dpp(record, p1_solution):
    prob, vf = p1_solution
    family = default_policy_family(prob, vf)
    mc = MCConfig(n_paths=10_000, dt=1e-3, horizon=1.0, seed=0)
    gaps, ok = [], True
    for x0 in (0.0, 0.7):
        for t in (0.25, 0.5, 1.0):
            rep = check_dpp(prob, vf, x0, t, family, mc, budget=0.02)
            ok &= rep.passed
            gaps.append(abs(rep.gap) / rep.tolerance)
    const = constant_cost_problem(P1, 0.25)
    pc = path_costs(const, Policy.constant(0.5), 0.4, 0.73, 1e-3, 100, seed=0,
                    terminal=lambda x: np.full(np.shape(x), 0.25))
    tele = float(np.max(np.abs(pc.costs - 0.25)))
    ok &= tele <= 1e-10
    assert record(4, ok, f"max|gap|/tol={max(gaps):.3f} over 6 checks; telescoping err={tele:.1e}")


def test_criterion_5_residuals(record, p1_solution):
    solves = list(SOLVES) or []
    if not any(p is p1_solution[0] for p, _ in solves):
        solves.append(p1_solution)
    if len(solves) < 2:
        # Running this test alone: rebuild the criterion 1 solves.
        for n in (101, 401):
            prob = constant_cost_problem(P1, 0.25)
            solves.append((prob, policy_iteration(prob, build_grid(prob.domain, n))))
    results = [residual_ok(p, v) for p, v in solves]
    ok = all(r for r, _ in results)
    worst = max(rep.interior_max_abs_residual for _, rep in results)
    assert record(5, ok, f"{len(results)} solves, worst interior |F|={worst:.1e}, boundary conditions hold={ok}")


def test_criterion_6_scheme_structure(record, rng):
    ok = True
    worst_int, worst_bnd = np.inf, np.inf
    for builder in (build_example1, build_example2):
        prob = builder(P1)
        grid = build_grid(prob.domain, 401)
        for _ in range(100):
            margin = assemble_fixed_policy(prob, grid, rng.uniform(0, 1, 401)).dominance_margin()
            worst_int = min(worst_int, margin[1:-1].min() - prob.beta)
            worst_bnd = min(worst_bnd, margin[[0, -1]].min())
    ok &= worst_int >= -1e-9 and worst_bnd >= 0
    prob = build_example1(P1)
    grid = build_grid(prob.domain, 401)
    base = policy_iteration(prob, grid)
    c = 0.3
    shifted_prob = with_running_cost(prob, lambda x, u: prob.running_cost(x, u) + c)
    shifted = policy_iteration(shifted_prob, grid)
    shift_err = float(np.max(np.abs(shifted.values - base.values - c / prob.beta)))
    a = policy_iteration(prob, grid, initial_policy=P1.u_a)
    b = policy_iteration(prob, grid, initial_policy=P1.u_b)
    uniq = float(np.max(np.abs(a.values - b.values)))
    ok &= shift_err <= 1e-9 and uniq <= 1e-8
    assert record(6, ok, f"interior margin-beta={worst_int:.1e} boundary margin={worst_bnd:.1e} "
                         f"shift err={shift_err:.1e} u_a/u_b gap={uniq:.1e}")


def affine_fit(prob, policy, x0, horizons):
    mean_l = local_time_growth(prob, policy, x0, horizons, 1e-3, 1000, seed=11).mean(axis=1)
    slope, icpt = np.polyfit(horizons, mean_l, 1)
    fit = slope * horizons + icpt
    return mean_l, 1 - np.sum((mean_l - fit) ** 2) / np.sum((mean_l - mean_l.mean()) ** 2)


def test_criterion_7_simulation_invariants(record, monkeypatch):
    ok, notes = True, []
    for builder in (build_example1, build_example2):
        prob = builder(P1)
        policy = extract_policy(policy_iteration(prob, build_grid(prob.domain, 201)))
        trajs = simulate_batch(prob, policy, 0.0, 1.0, 1e-3, n_paths=1000, seed=11, workers=1)
        bad = sum(bool(t.check_invariants(prob.domain, boundary_tol=1e-12)) for t in trajs)
        ok &= bad == 0
        wide = simulate_batch(prob, policy, 0.0, 1.0, 1e-3, n_paths=1000, seed=11, workers=8)
        same = all(a.states.tobytes() == b.states.tobytes() and a.local_time.tobytes() == b.local_time.tobytes()
                   for a, b in zip(trajs, wide))
        # Small blocks so that eight workers really run concurrently.
        monkeypatch.setattr(sim, "BLOCK_SIZE", 64)
        small8 = simulate_batch(prob, policy, 0.0, 1.0, 1e-3, n_paths=1000, seed=11, workers=8)
        small1 = simulate_batch(prob, policy, 0.0, 1.0, 1e-3, n_paths=1000, seed=11, workers=1)
        monkeypatch.undo()
        same &= all(a.states.tobytes() == b.states.tobytes() == c.states.tobytes()
                    for a, b, c in zip(trajs, small8, small1))
        ok &= same
        # Growth is fitted from a boundary start. From x0 = 0 the drift needs
        # several time units to reach the boundary, so l(1) = l(2) = 0 and a
        # fit over {1, 2, 4, 8} would measure that transit time instead.
        horizons = np.array([1.0, 2.0, 4.0, 8.0])
        mean_l, r2 = affine_fit(prob, policy, -P1.alpha, horizons)
        _, r2_centre = affine_fit(prob, policy, 0.0, horizons)
        ok &= r2 >= 0.95
        notes.append(f"{prob.name}: violations={bad} bitwise={same} E[l(T)|x0=-alpha]="
                     f"{np.round(mean_l, 4).tolist()} R2={r2:.4f} (x0=0 R2={r2_centre:.3f}, info)")
    assert record(7, ok, "; ".join(notes))


def manufactured_problem(params):
    base = build_example1(params)
    a, te = params.alpha, params.theta_e

    def running_cost(x, u):
        x = np.asarray(x, dtype=float)
        v, dv, d2v = te * x * x / (2 * a), te * x / a, te / a
        return (base.beta * v - base.drift(x, u) * dv
                - base.diffusion_coefficient(x, u) * d2v)
    return with_running_cost(base, running_cost, name="manufactured")


def test_criterion_8_consistency_order(record, rng):
    prob = manufactured_problem(P1)
    errors = []
    for n in (41, 81, 161, 321, 641):
        grid = build_grid(prob.domain, n)
        exact = P1.theta_e * grid.nodes ** 2 / (2 * P1.alpha)
        policy = np.interp(grid.nodes, np.linspace(-1, 1, 9), rng.uniform(0, 1, 9))
        sys = assemble_fixed_policy(prob, grid, policy)
        errors.append(float(np.max(np.abs(sys.matvec(exact) - sys.rhs))))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    ok = bool(np.all((ratios >= 1.6) & (ratios <= 2.6)))
    assert record(8, ok, f"errors={[f'{e:.2e}' for e in errors]} ratios={np.round(ratios, 3).tolist()}")


def test_criterion_9_boundary_cost_sweep(record):
    values = []
    for te in (0.0, 0.1, 0.2):
        prob = build_example1(P1.replace(theta_e=te))
        values.append(policy_iteration(prob, build_grid(prob.domain, 401)).values)
    steps = np.diff(np.array(values), axis=0)
    ok = bool(np.all(steps >= 0))
    assert record(9, ok, f"min increment={steps.min():.2e} v(0)={[f'{v[200]:.5f}' for v in values]}")
