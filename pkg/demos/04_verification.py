"""The numerical checks: viscosity residuals, dynamic programming, continuity.

Run:  python3 demos/04_verification.py
"""
from hjbr import (
    P1, MCConfig, Policy, ValueFunction, build_example1, build_grid, check_dpp, check_equicontinuity,
    check_viscosity_residuals, policy_iteration,
)
from hjbr.verify import default_policy_family

import numpy as np

problem = build_example1(P1)
vf = policy_iteration(problem, build_grid(problem.domain, 401))

# %% Residuals of the converged solution, then of a deliberately wrong one.
print(check_viscosity_residuals(problem, vf).to_text().split("# x")[0])
wrong = ValueFunction.from_values(problem, vf.grid, vf.values + 0.01 * np.cos(2 * vf.grid.nodes))
print(check_viscosity_residuals(problem, wrong).to_text().split("# x")[0])

# %% Dynamic programming over a short window.
mc = MCConfig(n_paths=4000, dt=1e-3, horizon=1.0)
for t in (0.25, 0.5, 1.0):
    rep = check_dpp(problem, vf, 0.7, t, default_policy_family(problem, vf), mc)
    print(f"t={t}: v(x0)={rep.lhs:.5f} best rhs={rep.rhs_min:.5f} ({rep.best_policy}) "
          f"gap={rep.gap:+.2e} tol={rep.tolerance:.3f} -> {'PASS' if rep.passed else 'FAIL'}")

# %% Sampled Lipschitz modulus of x -> J(x) under u = 1 with common noise.
rep = check_equicontinuity(problem, [(0.0, 0.1), (0.5, 0.6), (0.8, 0.9)], Policy.constant(1.0),
                           MCConfig(n_paths=2000, dt=2e-3, horizon=8.0))
print(rep.to_text())
