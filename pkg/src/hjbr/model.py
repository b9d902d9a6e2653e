"""Controlled reflected-diffusion problems and the two worked examples.

A :class:`ControlProblem` bundles drift, dispersion, running cost, boundary
cost, discount rate and the scalar control interval. All callables must
broadcast over numpy arrays: for the interval ``x`` and ``u`` are arrays of
matching (broadcastable) shape and the dispersion returns the scalar noise
loading. For ball domains ``x`` has shape ``(..., dim)``, the drift returns
``(..., dim)`` and the dispersion ``(..., dim, noise_dim)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidParamsError
from .geometry import DomainSpec

__all__ = [
    "ControlProblem",
    "ExampleParams",
    "ValidationReport",
    "build_example1",
    "build_example2",
    "constant_cost_problem",
    "with_running_cost",
    "validate_problem",
    "P1",
]


@dataclass(frozen=True)
class ControlProblem:
    domain: DomainSpec
    drift: Callable
    dispersion: Callable
    running_cost: Callable
    boundary_cost: Callable
    discount: float
    control_lo: float
    control_hi: float
    noise_dim: int = 1
    name: str = "custom"
    params: "ExampleParams | None" = field(default=None, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.discount) and self.discount > 0):
            raise InvalidParamsError(f"discount must satisfy beta > 0, got {self.discount!r}")
        if not self.control_lo < self.control_hi:
            raise InvalidParamsError(
                f"control bounds must satisfy u_a < u_b, got [{self.control_lo}, {self.control_hi}]"
            )

    @property
    def beta(self) -> float:
        return self.discount

    def diffusion_coefficient(self, x, u):
        """``0.5 * sigma sigma^T`` for the interval (scalar per point)."""
        s = self.dispersion(x, u)
        return 0.5 * s * s

    def clamp(self, u):
        return np.clip(u, self.control_lo, self.control_hi)


@dataclass(frozen=True)
class ExampleParams:
    """Parameters shared by both worked examples."""

    theta_a: float
    theta_b: float
    theta_d: float
    theta_e: float
    sigma_x: float
    u_a: float
    u_b: float
    alpha: float
    beta: float

    def __post_init__(self):
        checks = [
            (self.u_a < self.u_b, "u_a < u_b"),
            (self.theta_b != 0, "theta_b != 0"),
            (self.sigma_x > 0, "sigma_x > 0"),
            (self.beta > 0, "beta > 0"),
            (self.alpha > 0, "alpha > 0"),
        ]
        for ok, rule in checks:
            if not ok:
                raise InvalidParamsError(f"invalid example parameters: requires {rule}")
        for name, value in dataclasses.asdict(self).items():
            if not np.isfinite(value):
                raise InvalidParamsError(f"invalid example parameters: {name} must be finite")

    def replace(self, **changes) -> "ExampleParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


#: Reference parameter set used throughout the tests and demos.
P1 = ExampleParams(
    theta_a=0.1, theta_b=0.5, theta_d=0.5, theta_e=0.2, sigma_x=0.3,
    u_a=0.0, u_b=1.0, alpha=1.0, beta=1.0,
)


def _linear_drift(p):
    def drift(x, u):
        return p.theta_a * np.asarray(x, dtype=float) - p.theta_b * np.asarray(u, dtype=float)
    return drift


def _quadratic_cost(p):
    def running_cost(x, u):
        d = p.theta_d - np.asarray(u, dtype=float)
        return d * d
    return running_cost


def _constant_boundary(value):
    def boundary_cost(x):
        return np.full(np.shape(x), float(value))
    return boundary_cost


def build_example1(params: ExampleParams) -> ControlProblem:
    """Semilinear example: control enters the drift only.

    drift ``theta_a x - theta_b u``, dispersion ``sigma_x x``, running cost
    ``(theta_d - u)**2`` and a constant boundary cost ``theta_e``.
    """
    p = params

    def dispersion(x, u):
        return p.sigma_x * np.asarray(x, dtype=float)

    return ControlProblem(
        domain=DomainSpec(p.alpha, 1),
        drift=_linear_drift(p),
        dispersion=dispersion,
        running_cost=_quadratic_cost(p),
        boundary_cost=_constant_boundary(p.theta_e),
        discount=p.beta,
        control_lo=p.u_a,
        control_hi=p.u_b,
        name="example1",
        params=p,
    )


def build_example2(params: ExampleParams) -> ControlProblem:
    """Fully nonlinear example: dispersion ``sigma_x sqrt(u) x`` needs ``u_a >= 0``."""
    p = params
    if p.u_a < 0:
        raise InvalidParamsError("example 2 requires u_a >= 0 (square root of the control)")

    def dispersion(x, u):
        return p.sigma_x * np.sqrt(np.asarray(u, dtype=float)) * np.asarray(x, dtype=float)

    return ControlProblem(
        domain=DomainSpec(p.alpha, 1),
        drift=_linear_drift(p),
        dispersion=dispersion,
        running_cost=_quadratic_cost(p),
        boundary_cost=_constant_boundary(p.theta_e),
        discount=p.beta,
        control_lo=p.u_a,
        control_hi=p.u_b,
        name="example2",
        params=p,
    )


def with_running_cost(problem: ControlProblem, running_cost: Callable, name=None) -> ControlProblem:
    return dataclasses.replace(problem, running_cost=running_cost, name=name or problem.name)


def constant_cost_problem(params: ExampleParams, cost: float, boundary_cost: float = 0.0) -> ControlProblem:
    """Example-1 dynamics with ``L == cost`` and ``h == boundary_cost``.

    With ``h == 0`` the value function is the constant ``cost / beta``.
    """
    base = build_example1(params)

    def running_cost(x, u):
        return np.full(np.broadcast(np.asarray(x), np.asarray(u)).shape, float(cost))

    return dataclasses.replace(
        base,
        running_cost=running_cost,
        boundary_cost=_constant_boundary(boundary_cost),
        name="constant_cost",
    )


@dataclass
class ValidationReport:
    sup_drift: float
    sup_dispersion: float
    sup_running_cost: float
    lipschitz_drift: float
    lipschitz_dispersion: float
    lipschitz_running_cost: float
    boundary_cost_values: np.ndarray
    structural_ok: bool
    flags: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags


def _sample_states(domain, n, rng):
    if domain.dim == 1:
        # Deterministic nodes (odd count, so the origin is included) plus random draws.
        nodes = np.linspace(-domain.alpha, domain.alpha, 2 * (n // 4) + 1)
        return np.concatenate([nodes, rng.uniform(-domain.alpha, domain.alpha, n)])
    v = rng.standard_normal((n, domain.dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = domain.alpha * rng.uniform(0, 1, n) ** (1.0 / domain.dim)
    return np.concatenate([np.zeros((1, domain.dim)), v * r[:, None]])


def _norm(v, dim):
    v = np.asarray(v, dtype=float)
    if dim == 1 or v.ndim <= 1:
        return np.abs(v)
    return np.linalg.norm(v.reshape(v.shape[0], -1), axis=1)


def validate_problem(problem: ControlProblem, n_samples: int = 2000, seed: int = 0) -> ValidationReport:
    """Sampled check of boundedness and spatial Lipschitz ratios on X x U.

    Non-finite values anywhere in the sample are reported in ``flags``. The
    structural surrogate (drift affine in ``u``, running cost strictly convex
    in ``u``) is reported separately and does not raise a flag.
    """
    if n_samples < 2:
        raise InvalidParamsError("n_samples must be >= 2")
    rng = np.random.default_rng(seed)
    dim = problem.domain.dim
    xs = _sample_states(problem.domain, n_samples, rng)
    m = xs.shape[0]
    us = rng.uniform(problem.control_lo, problem.control_hi, m)
    us[: min(m, 2)] = [problem.control_lo, problem.control_hi][: min(m, 2)]
    flags = []

    with np.errstate(all="ignore"):
        mu = problem.drift(xs, us)
        sig = problem.dispersion(xs, us)
        cost = problem.running_cost(xs, us)
        vals = {"drift": mu, "dispersion": sig, "running_cost": cost}
        for name, arr in vals.items():
            if not np.all(np.isfinite(arr)):
                bad = np.flatnonzero(~np.isfinite(np.asarray(arr).reshape(m, -1)).all(axis=1))
                flags.append(f"{name}: non-finite value at x={xs[bad[0]]!r}")

        # Random pairs sharing the control; tiny separations are excluded to
        # keep cancellation out of the ratios.
        i = rng.integers(0, m, n_samples)
        j = rng.integers(0, m, n_samples)
        dx = _norm(xs[i] - xs[j], dim)
        keep = dx > 1e-6
        i, j, dx = i[keep], j[keep], dx[keep]
        u_pair = us[i]
        lips = {}
        for name, fn in (("drift", problem.drift), ("dispersion", problem.dispersion),
                         ("running_cost", problem.running_cost)):
            a = fn(xs[i], u_pair)
            b = fn(xs[j], u_pair)
            ratio = _norm(a - b, dim) / dx
            lips[name] = float(np.max(ratio)) if ratio.size else 0.0
            if not np.isfinite(lips[name]):
                flags.append(f"{name}: non-finite Lipschitz ratio")

        if dim == 1:
            hb = np.asarray(problem.boundary_cost(problem.domain.boundary_points), dtype=float)
        else:
            v = rng.standard_normal((n_samples, dim))
            hb = np.asarray(problem.boundary_cost(problem.domain.alpha * v / np.linalg.norm(v, axis=1, keepdims=True)))
        if not np.all(np.isfinite(hb)):
            flags.append("boundary_cost: non-finite value on the boundary")

        # Second differences in u: drift should be affine, cost strictly convex.
        du = 0.25 * (problem.control_hi - problem.control_lo)
        uc = problem.control_lo + 2 * du
        xs_s = xs[: min(m, 200)]
        d2mu = problem.drift(xs_s, uc + du) - 2 * problem.drift(xs_s, uc) + problem.drift(xs_s, uc - du)
        d2l = (problem.running_cost(xs_s, uc + du) - 2 * problem.running_cost(xs_s, uc)
               + problem.running_cost(xs_s, uc - du))
        structural_ok = bool(np.all(np.abs(d2mu) <= 1e-9 * (1 + np.abs(problem.drift(xs_s, uc))))
                             and np.all(d2l > 0))

    def sup(arr):
        a = np.abs(np.asarray(arr, dtype=float))
        return float(np.max(a)) if a.size else 0.0

    return ValidationReport(
        sup_drift=sup(mu), sup_dispersion=sup(sig), sup_running_cost=sup(cost),
        lipschitz_drift=lips["drift"], lipschitz_dispersion=lips["dispersion"],
        lipschitz_running_cost=lips["running_cost"],
        boundary_cost_values=hb, structural_ok=structural_ok, flags=flags,
    )
