"""Cross-check: Monte Carlo cost of the extracted feedback against the PDE value.

Uses 20 000 paths per point, so it takes a minute or so. The full-size
version (1e5 paths) lives in tests/test_acceptance.py.

Run:  python3 demos/03_mc_vs_pde.py
"""
from hjbr import P1, MCConfig, build_example1, build_grid, compare_mc_pde, policy_iteration

problem = build_example1(P1)
vf = policy_iteration(problem, build_grid(problem.domain, 401))

# %% The horizon comes from the truncation bound with epsilon = 1e-4.
mc = MCConfig(n_paths=20_000, dt=1e-3, epsilon=1e-4, seed=0)
report = compare_mc_pde(problem, vf, [-0.9, 0.0, 0.9], mc, agreement_tol=0.05)
print(report.to_text())

# The Monte Carlo number is the cost of one admissible policy, so up to
# statistical, truncation and discretisation error it cannot be below v.
