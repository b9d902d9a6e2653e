"""Monte Carlo estimation of the discounted cost functional.

The running cost is integrated against the exact discount weight of each
Euler step, ``exp(-beta t_k) (1 - exp(-beta dt)) / beta``, which is exact for
the piecewise-constant (left-point) integrand the scheme produces. The
boundary term adds ``exp(-beta t_{k+1}) h(x_{k+1}) dl_{k+1}`` with ``h`` read
at the projected point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .model import ControlProblem
from .simulate import (
    Policy,
    _check_time,
    _check_x0,
    derive_subseed,
    iterate_paths,
    map_blocks,
    n_time_steps,
)

__all__ = [
    "MCConfig",
    "MCEstimate",
    "PathCosts",
    "path_costs",
    "estimate_cost",
    "estimate_value",
    "estimate_local_time_constant",
    "local_time_growth",
    "running_cost_bound",
    "boundary_cost_bound",
    "tail_bound",
    "truncation_horizon",
    "value_bound",
    "resolve_horizon",
    "estimate_with_config",
]


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings. Exactly one of ``horizon``/``epsilon`` is used;
    ``horizon`` wins when both are given."""

    n_paths: int = 10_000
    dt: float = 1e-3
    horizon: float | None = None
    epsilon: float | None = 1e-4
    seed: int = 0
    workers: int | None = None
    pilot_paths: int = 2000

    def __post_init__(self):
        if self.n_paths < 1:
            raise InvalidInputError("n_paths must be >= 1")
        if not self.dt > 0:
            raise InvalidInputError("dt must be > 0")
        if self.horizon is None and self.epsilon is None:
            raise InvalidInputError("either horizon or epsilon must be set")
        if self.horizon is not None and not self.horizon > 0:
            raise InvalidInputError("horizon must be > 0")
        if self.horizon is None and not self.epsilon > 0:
            raise InvalidInputError("epsilon must be > 0")


@dataclass
class MCEstimate:
    mean: float
    std_error: float
    n_paths: int
    horizon: float
    dt: float
    tail_bound: float
    local_time_constant: float
    seed: int
    n_steps: int = 0

    def to_text(self, title: str = "estimate", extra: dict | None = None) -> str:
        lines = [f"[{title}]"]
        for key, value in {**(extra or {}), **self.__dict__}.items():
            lines.append(f"{key} = {_fmt(value)}")
        return "\n".join(lines) + "\n"


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


@dataclass
class PathCosts:
    """Per-path discounted costs plus the local-time profile of the run."""

    costs: np.ndarray
    checkpoint_times: np.ndarray
    mean_local_time: np.ndarray
    horizon: float
    dt: float
    n_steps: int
    seed: int

    @property
    def mean(self) -> float:
        return float(np.sum(self.costs) / self.costs.size)

    @property
    def std_error(self) -> float:
        n = self.costs.size
        return float(np.std(self.costs, ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    def local_time_constant(self, q: float = 95.0) -> float:
        ratios = self.mean_local_time / (1.0 + self.checkpoint_times)
        return float(np.percentile(ratios, q)) if ratios.size else 0.0


def _block_costs(problem, policy, x0, n_steps, dt, seeds, terminal, check_steps):
    beta = problem.discount
    weight = -np.expm1(-beta * dt) / beta
    n = len(seeds)
    cost = np.zeros(n)
    local = np.zeros(n)
    lt_sums = []
    x_last = None
    for k, x, u, _dW, x_next, dl in iterate_paths(problem, policy, x0, n_steps, dt, seeds):
        cost += (np.exp(-beta * k * dt) * weight) * problem.running_cost(x, u)
        hit = dl > 0
        if hit.any():
            cost[hit] += np.exp(-beta * (k + 1) * dt) * problem.boundary_cost(x_next[hit]) * dl[hit]
            local += dl
        if (k + 1) in check_steps:
            lt_sums.append(np.sum(local))
        x_last = x_next
    if terminal is not None:
        cost += np.exp(-beta * n_steps * dt) * terminal(x_last)
    return cost, np.asarray(lt_sums)


def path_costs(problem: ControlProblem, policy: Policy, x0, horizon: float, dt: float,
               n_paths: int, seed: int, terminal=None, workers=None,
               n_checkpoints: int = 20) -> PathCosts:
    """Discounted cost of each simulated path up to ``ceil(horizon/dt)`` steps.

    ``terminal``, when given, adds ``exp(-beta t_n) terminal(X(t_n))``.
    Path ``i`` uses ``derive_subseed(seed, i)`` regardless of ``x0`` or the
    policy, so calls sharing a seed use common random numbers.
    """
    x0 = _check_x0(problem, x0)
    _check_time(horizon, dt)
    if n_paths < 1:
        raise InvalidInputError("n_paths must be >= 1")
    n_steps = n_time_steps(horizon, dt)
    check = np.unique(np.linspace(n_steps / n_checkpoints, n_steps, n_checkpoints).round().astype(int))
    check = check[check >= 1]
    check_steps = set(check.tolist())
    seeds = [derive_subseed(seed, i) for i in range(n_paths)]
    blocks = map_blocks(
        lambda a, b: _block_costs(problem, policy, x0, n_steps, dt, seeds[a:b], terminal, check_steps),
        n_paths, workers,
    )
    costs = np.concatenate([c for c, _ in blocks])
    lt = np.sum([s for _, s in blocks], axis=0) / n_paths
    return PathCosts(costs, check * dt, lt, horizon, dt, n_steps, int(seed))


def running_cost_bound(problem: ControlProblem, n: int = 401, seed: int = 0) -> float:
    """``sup |L|`` over X x [u_a, u_b] on a grid that includes the corners."""
    us = np.linspace(problem.control_lo, problem.control_hi, n)
    if problem.domain.dim == 1:
        xs = np.linspace(-problem.domain.alpha, problem.domain.alpha, n)
        vals = problem.running_cost(xs[:, None], us[None, :])
    else:
        rng = np.random.default_rng(seed)
        d = problem.domain.dim
        v = rng.standard_normal((n, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        xs = v * (problem.domain.alpha * rng.uniform(0, 1, n) ** (1 / d))[:, None]
        xs = np.concatenate([np.zeros((1, d)), xs, problem.domain.alpha * v])
        vals = np.stack([problem.running_cost(xs, np.full(len(xs), u)) for u in us])
    return float(np.max(np.abs(vals)))


def boundary_cost_bound(problem: ControlProblem, n: int = 401, seed: int = 0) -> float:
    """``sup |h|`` over the boundary."""
    if problem.domain.dim == 1:
        pts = problem.domain.boundary_points
    else:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((n, problem.domain.dim))
        pts = problem.domain.alpha * v / np.linalg.norm(v, axis=1, keepdims=True)
    return float(np.max(np.abs(problem.boundary_cost(pts))))


def tail_bound(problem: ControlProblem, horizon: float, local_time_constant: float,
               cost_bound: float | None = None, boundary_bound: float | None = None) -> float:
    """Deterministic bound on the cost discarded by truncating at ``horizon``.

    ``C_L e^{-bT}/b + C_h C b int_T^inf e^{-bs}(1+s) ds`` with the integral
    in closed form, ``e^{-bT}((1+T)/b + 1/b^2)``.
    """
    b = problem.discount
    c_l = running_cost_bound(problem) if cost_bound is None else cost_bound
    c_h = boundary_cost_bound(problem) if boundary_bound is None else boundary_bound
    decay = np.exp(-b * horizon)
    return float(c_l * decay / b + c_h * local_time_constant * decay * (1.0 + horizon + 1.0 / b))


def truncation_horizon(problem: ControlProblem, epsilon: float, local_time_constant: float,
                       tol: float = 1e-9) -> float:
    """Smallest ``T`` with ``tail_bound(T) <= epsilon`` (bisection)."""
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be > 0")
    c_l = running_cost_bound(problem)
    c_h = boundary_cost_bound(problem)

    def tail(t):
        return tail_bound(problem, t, local_time_constant, c_l, c_h)

    if tail(0.0) <= epsilon:
        return 0.0
    lo, hi = 0.0, 1.0
    while tail(hi) > epsilon:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if tail(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    return hi


def value_bound(problem: ControlProblem, local_time_constant: float) -> float:
    """A priori bound on ``sup |v|``: the truncation tail evaluated at ``T = 0``."""
    return tail_bound(problem, 0.0, local_time_constant)


def local_time_growth(problem: ControlProblem, policy: Policy, x0, horizons, dt: float,
                      n_paths: int, seed: int, workers=None) -> np.ndarray:
    """Per-path local time ``l(T)`` (equal to ``sup_{[0,T]} l``) at each horizon.

    Returns an array of shape ``(len(horizons), n_paths)``. One run to the
    largest horizon is used; by the seeding discipline its prefix is exactly
    the shorter run.
    """
    x0 = _check_x0(problem, x0)
    horizons = np.asarray(horizons, dtype=float)
    _check_time(float(horizons.max()), dt)
    steps = [n_time_steps(h, dt) for h in horizons]
    n_steps = max(steps)
    seeds = [derive_subseed(seed, i) for i in range(n_paths)]

    def block(a, b):
        out = np.empty((len(steps), b - a))
        local = np.zeros(b - a)
        for k, _x, _u, _dW, _xn, dl in iterate_paths(problem, policy, x0, n_steps, dt, seeds[a:b]):
            local += dl
            for j, s in enumerate(steps):
                if s == k + 1:
                    out[j] = local
        return out

    return np.concatenate(map_blocks(block, n_paths, workers), axis=1)


def estimate_local_time_constant(problem: ControlProblem, policy: Policy, x0, dt: float,
                                 n_paths: int = 2000, seed: int = 0, horizon: float | None = None,
                                 workers=None) -> float:
    """Pilot estimate of ``C`` in ``E[l(t)] <= C (1 + t)``: the 95th percentile
    of ``mean l(t_j) / (1 + t_j)`` over checkpoints ``t_j``."""
    if horizon is None:
        horizon = max(5.0, 5.0 / problem.discount)
    pc = path_costs(problem, policy, x0, horizon, dt, n_paths, seed, workers=workers)
    return pc.local_time_constant()


def estimate_cost(problem: ControlProblem, policy: Policy, x0, horizon: float, dt: float,
                  n_paths: int, seed: int, workers=None,
                  local_time_constant: float | None = None) -> MCEstimate:
    """Monte Carlo estimate of the discounted cost of ``policy`` from ``x0``.

    If ``local_time_constant`` is omitted it is estimated from this run's own
    local-time profile.
    """
    pc = path_costs(problem, policy, x0, horizon, dt, n_paths, seed, workers=workers)
    c = pc.local_time_constant() if local_time_constant is None else float(local_time_constant)
    return MCEstimate(
        mean=pc.mean,
        std_error=pc.std_error,
        n_paths=n_paths,
        horizon=float(horizon),
        dt=float(dt),
        tail_bound=tail_bound(problem, pc.n_steps * dt, c),
        local_time_constant=c,
        seed=int(seed),
        n_steps=pc.n_steps,
    )


def resolve_horizon(problem: ControlProblem, policy: Policy, x0, mc: MCConfig):
    """Return ``(horizon, local_time_constant or None)`` for a config."""
    if mc.horizon is not None:
        return float(mc.horizon), None
    c = estimate_local_time_constant(problem, policy, x0, mc.dt, min(mc.n_paths, mc.pilot_paths),
                                     seed=mc.seed + 1, workers=mc.workers)
    return max(truncation_horizon(problem, mc.epsilon, c), mc.dt), c


def estimate_with_config(problem: ControlProblem, policy: Policy, x0, mc: MCConfig) -> MCEstimate:
    horizon, c = resolve_horizon(problem, policy, x0, mc)
    return estimate_cost(problem, policy, x0, horizon, mc.dt, mc.n_paths, mc.seed,
                         workers=mc.workers, local_time_constant=c)


def estimate_value(problem: ControlProblem, x0, policy_family, mc: MCConfig):
    """Best (lowest) estimated cost over a finite policy family.

    All members share ``mc.seed``. Returns ``(best_value, best_index)``;
    ties go to the earliest member. The result is an upper bound on the value
    function at ``x0`` up to statistical and truncation error.
    """
    policy_family = list(policy_family)
    if not policy_family:
        raise InvalidInputError("policy family must be non-empty")
    estimates = [estimate_with_config(problem, p, x0, mc) for p in policy_family]
    means = np.array([e.mean for e in estimates])
    best = int(np.argmin(means))
    return float(means[best]), best
