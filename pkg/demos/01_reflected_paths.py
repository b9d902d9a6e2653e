"""Reflected paths on [-1, 1] and the local time that keeps them there.

Run:  python3 demos/01_reflected_paths.py
"""
import numpy as np

from hjbr import P1, Policy, build_example1, simulate_batch

problem = build_example1(P1)

# %% A handful of paths under the constant control u = 0.5.
# The drift 0.1 x - 0.5 u is negative everywhere on the interval, so the
# paths slide towards -1 and then get held there by the reflection.
paths = simulate_batch(problem, Policy.constant(0.5), x0=0.0, horizon=8.0, dt=1e-3, n_paths=5, seed=1)

print("   t    " + "  ".join(f"x_{i}      " for i in range(5)))
for k in range(0, 8001, 1000):
    print(f"{paths[0].times[k]:5.1f}  " + "  ".join(f"{p.states[k]:+.5f}" for p in paths))

# %% Local time only grows while the path sits on the boundary.
for i, p in enumerate(paths):
    pushed = np.diff(p.local_time) > 0
    at = p.states[1:][pushed]
    print(f"path {i}: l(8) = {p.local_time[-1]:.4f}, pushed {pushed.sum():5d} steps, "
          f"all at |x| = 1: {np.all(np.abs(at) == 1.0)}")

# %% Invariant checks used by the test-suite, on 200 fresh paths.
more = simulate_batch(problem, Policy.constant(0.5), 0.9, 2.0, 1e-3, n_paths=200, seed=2)
print("invariant violations:", sum(len(p.check_invariants(problem.domain)) for p in more))
