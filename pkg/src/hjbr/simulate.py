"""Projected Euler-Maruyama simulation of the controlled reflected SDE.

Each step takes a full Euler step and projects the result back onto the
domain; the projection distance is the local-time increment. Noise for path
``i`` of a batch comes from its own generator seeded by
``derive_subseed(seed, i)``, and paths are processed in fixed-size blocks,
so results do not depend on how many worker threads are used.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError
from .geometry import boundary_distance, contains, project_to_domain
from .model import ControlProblem

__all__ = [
    "Policy",
    "Trajectory",
    "derive_subseed",
    "n_time_steps",
    "euler_reflected_step",
    "simulate_path",
    "simulate_batch",
    "iterate_paths",
    "map_blocks",
    "resolve_workers",
    "write_trajectory_csv",
]

#: Paths per vectorised block. Fixed so that block composition never depends
#: on the worker count.
BLOCK_SIZE = 8192
#: Time steps of noise drawn per generator call.
NOISE_CHUNK = 1024


@dataclass(frozen=True)
class Policy:
    """Constant control or state feedback; outputs are clamped to ``[u_a, u_b]``."""

    kind: str
    value: float | None = None
    fn: Callable | None = None
    label: str = ""

    @classmethod
    def constant(cls, u: float, label: str | None = None) -> "Policy":
        return cls("constant", value=float(u), label=label or f"u={u:g}")

    @classmethod
    def feedback(cls, fn: Callable, label: str = "feedback") -> "Policy":
        return cls("feedback", fn=fn, label=label)

    def control(self, x, lo: float, hi: float):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            shape = x.shape if x.ndim <= 1 else x.shape[:-1]
            return np.full(shape, np.clip(self.value, lo, hi))
        return np.clip(np.asarray(self.fn(x), dtype=float), lo, hi)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    local_time: np.ndarray
    controls: np.ndarray
    noise_increments: np.ndarray
    seed: int | None = None

    def __len__(self):
        return len(self.times)

    def check_invariants(self, domain, boundary_tol: float = 1e-12) -> list:
        """Return a list of violated invariants (empty when all hold)."""
        problems = []
        if not np.all(contains(domain, self.states)):
            problems.append("state outside the domain")
        if self.local_time[0] != 0.0:
            problems.append("local time does not start at zero")
        dl = np.diff(self.local_time)
        if np.any(dl < 0):
            problems.append("local time decreases")
        pushed = dl > 0
        if np.any(boundary_distance(domain, self.states[1:][pushed]) > boundary_tol):
            problems.append("local time increased away from the boundary")
        return problems


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = os.environ.get("HJBR_THREADS", "1")
    try:
        workers = int(workers)
    except (TypeError, ValueError):
        workers = 1
    return max(1, workers)


def derive_subseed(seed: int, index: int) -> int:
    """Pure function of ``(seed, index)`` used as the seed of path ``index``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def n_time_steps(horizon: float, dt: float) -> int:
    return max(1, int(np.ceil(horizon / dt - 1e-9)))


def _check_x0(problem, x0):
    x0 = np.asarray(x0, dtype=float)
    d = problem.domain.dim
    if d == 1 and x0.ndim != 0:
        raise InvalidInputError(f"x0 must be a scalar for the interval, got shape {x0.shape}")
    if d > 1 and x0.shape != (d,):
        raise InvalidInputError(f"x0 must have shape ({d},), got {x0.shape}")
    if not np.all(np.isfinite(x0)) or not bool(contains(problem.domain, x0)):
        raise InvalidInputError(f"x0={x0.tolist()} lies outside the domain")
    return x0


def _check_time(horizon, dt):
    if not (dt > 0 and horizon > 0):
        raise InvalidInputError("horizon and dt must be positive")
    if dt > horizon * (1 + 1e-12):
        raise InvalidInputError(f"dt={dt} exceeds horizon={horizon}")


def _noise_shape_tail(problem):
    return () if problem.domain.dim == 1 else (problem.noise_dim,)


def _increment(problem, x, u, dW, dt):
    mu = problem.drift(x, u)
    sig = problem.dispersion(x, u)
    if problem.domain.dim == 1:
        return x + mu * dt + sig * dW
    return x + mu * dt + np.einsum("...ij,...j->...i", sig, dW)


def euler_reflected_step(problem: ControlProblem, x, u, dW, dt: float):
    """One projected Euler step; returns ``(x_next, dl)``."""
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    x = np.asarray(x, dtype=float)
    x_tilde = _increment(problem, x, np.asarray(u, dtype=float), np.asarray(dW, dtype=float), dt)
    return project_to_domain(problem.domain, x_tilde)


def _draw_noise(rngs, m, tail):
    """Next ``m`` standard normal draws of every path, time-major ``(m, n, ...)``."""
    n = len(rngs)
    buf = np.empty((n, m) + tail)
    for i, r in enumerate(rngs):
        r.standard_normal(out=buf[i])
    # Transposed copy in column panels; a single strided copy is far slower.
    out = np.empty((m, n) + tail)
    for j in range(0, n, 256):
        out[:, j:j + 256] = buf[j:j + 256].swapaxes(0, 1)
    return out


def iterate_paths(problem, policy, x0, n_steps, dt, seeds):
    """Step a block of paths together.

    Yields ``(k, x, u, dW, x_next, dl)`` for ``k = 0 .. n_steps-1`` where
    ``x`` is the state at ``t_k`` and ``u`` the control applied on
    ``[t_k, t_{k+1})``. Arrays are fresh at every step; callers may keep them.
    """
    n = len(seeds)
    tail = _noise_shape_tail(problem)
    rngs = [np.random.default_rng(s) for s in seeds]
    sqdt = np.sqrt(dt)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (n,) + np.shape(x0)).copy()
    lo, hi = problem.control_lo, problem.control_hi
    noise = None
    for k in range(n_steps):
        j = k % NOISE_CHUNK
        if j == 0:
            m = min(NOISE_CHUNK, n_steps - k)
            noise = _draw_noise(rngs, m, tail) * sqdt
        dW = noise[j]
        u = policy.control(x, lo, hi)
        x_next, dl = project_to_domain(problem.domain, _increment(problem, x, u, dW, dt))
        yield k, x, u, dW, x_next, dl
        x = x_next


def map_blocks(fn, n_paths: int, workers=None):
    """Apply ``fn(start, stop)`` to fixed blocks of path indices, in order."""
    bounds = [(s, min(s + BLOCK_SIZE, n_paths)) for s in range(0, n_paths, BLOCK_SIZE)]
    w = min(resolve_workers(workers), len(bounds))
    if w <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))


def _simulate_block(problem, policy, x0, horizon, dt, seeds):
    n_steps = n_time_steps(horizon, dt)
    n = len(seeds)
    shape_x = np.shape(x0)
    tail = _noise_shape_tail(problem)
    states = np.empty((n, n_steps + 1) + shape_x)
    local = np.zeros((n, n_steps + 1))
    controls = np.empty((n, n_steps))
    noise = np.empty((n, n_steps) + tail)
    states[:, 0] = x0
    for k, x, u, dW, x_next, dl in iterate_paths(problem, policy, x0, n_steps, dt, seeds):
        controls[:, k] = u
        noise[:, k] = dW
        states[:, k + 1] = x_next
        local[:, k + 1] = local[:, k] + dl
    times = np.arange(n_steps + 1) * dt
    return [
        Trajectory(times, states[i], local[i], controls[i], noise[i], seed=int(seeds[i]))
        for i in range(n)
    ]


def simulate_path(problem: ControlProblem, policy: Policy, x0, horizon: float, dt: float,
                  seed: int) -> Trajectory:
    """Simulate one reflected path with ``ceil(horizon / dt)`` steps."""
    x0 = _check_x0(problem, x0)
    _check_time(horizon, dt)
    return _simulate_block(problem, policy, x0, horizon, dt, [int(seed)])[0]


def simulate_batch(problem: ControlProblem, policy: Policy, x0, horizon: float, dt: float,
                   n_paths: int, seed: int, workers=None) -> list:
    """Simulate ``n_paths`` paths; path ``i`` uses ``derive_subseed(seed, i)``."""
    if n_paths < 1:
        raise InvalidInputError("n_paths must be >= 1")
    x0 = _check_x0(problem, x0)
    _check_time(horizon, dt)
    seeds = [derive_subseed(seed, i) for i in range(n_paths)]
    blocks = map_blocks(
        lambda a, b: _simulate_block(problem, policy, x0, horizon, dt, seeds[a:b]),
        n_paths, workers,
    )
    return [traj for block in blocks for traj in block]


def write_trajectory_csv(traj: Trajectory, path, header: str = "") -> None:
    """Write ``t,x,l,u`` rows with 17 significant digits.

    ``u`` on the final row is ``nan``: no control is applied after the last
    time point.
    """
    states = np.asarray(traj.states)
    if states.ndim != 1:
        raise InvalidInputError("CSV trajectory dump supports one-dimensional states only")
    u = np.append(traj.controls, np.nan)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("t,x,l,u\n")
        for row in zip(traj.times, states, traj.local_time, u):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
