"""Generator, Hamiltonian and the HJB residual functions.

The Hamiltonian is the infimum over the control interval of
``<drift, g> + 0.5 tr(sigma sigma^T H) + L``. The generic minimiser scans a
uniform control grid, narrows the best bracket by golden-section search and
finishes with one parabolic step, which is exact for objectives quadratic in
``u`` (both worked examples). Closed-form minimisers for the two examples are
provided for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParamsError
from .geometry import boundary_distance, phi_grad
from .model import ControlProblem, ExampleParams

__all__ = [
    "DerivativeProbe",
    "generator_apply",
    "minimize_control",
    "hamiltonian_eval",
    "hjb_residual",
    "boundary_residual",
    "analytic_control_ex1",
    "analytic_control_ex2",
]

_INVGOLD = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DerivativeProbe:
    """Candidate value and derivatives at a point.

    On the interval every field may be an array (one probe per entry). When
    ``grad_backward`` is set the probe is upwinded: ``grad`` is used where
    the drift is non-negative and ``grad_backward`` where it is negative.
    """

    x: object
    value: object
    grad: object
    hess: object
    grad_backward: object = None

    def __post_init__(self):
        h = np.asarray(self.hess, dtype=float)
        if h.ndim >= 2 and h.shape[-1] == h.shape[-2] and h.shape[-1] > 1:
            if not np.allclose(h, np.swapaxes(h, -1, -2), rtol=0, atol=1e-12):
                raise InvalidInputError("probe Hessian must be symmetric")


def generator_apply(problem: ControlProblem, u, probe: DerivativeProbe):
    """``<drift(x,u), g> + 0.5 tr(sigma sigma^T (x,u) H)``."""
    x = np.asarray(probe.x, dtype=float)
    u = np.asarray(u, dtype=float)
    mu = problem.drift(x, u)
    sig = problem.dispersion(x, u)
    if problem.domain.dim == 1:
        g = np.asarray(probe.grad, dtype=float)
        if probe.grad_backward is not None:
            g = np.where(mu >= 0, g, np.asarray(probe.grad_backward, dtype=float))
        return mu * g + 0.5 * sig * sig * np.asarray(probe.hess, dtype=float)
    g = np.asarray(probe.grad, dtype=float)
    sst = np.einsum("...ik,...jk->...ij", sig, sig)
    return np.einsum("...i,...i->...", mu, g) + 0.5 * np.einsum("...ij,...ji->...", sst,
                                                                np.asarray(probe.hess, dtype=float))


def minimize_control(objective, lo: float, hi: float, batch: int, n_grid: int = 65,
                     refine_width: float = 1e-5):
    """Minimise ``objective`` over ``[lo, hi]`` for a batch of independent problems.

    ``objective(u)`` receives an array of shape ``(batch, k)`` and returns the
    same shape. Returns ``(values, argmins)`` of shape ``(batch,)``. Exact
    ties go to the smaller control.
    """
    if n_grid < 2:
        raise InvalidInputError("n_grid must be >= 2")
    grid = np.linspace(lo, hi, n_grid)
    f = objective(np.broadcast_to(grid, (batch, n_grid)))
    k = np.argmin(f, axis=1)
    rows = np.arange(batch)
    u_grid, f_grid = grid[k], f[rows, k]
    a = grid[np.maximum(k - 1, 0)]
    b = grid[np.minimum(k + 1, n_grid - 1)]

    target = refine_width * (hi - lo)
    width = 2.0 * (hi - lo) / (n_grid - 1)
    n_iter = int(np.ceil(np.log(max(target, 1e-300) / width) / np.log(_INVGOLD))) if width > target else 0
    for _ in range(n_iter):
        c = b - _INVGOLD * (b - a)
        d = a + _INVGOLD * (b - a)
        fc, fd = objective(np.stack([c, d], axis=1)).T
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)

    m = 0.5 * (a + b)
    fa, fm, fb = objective(np.stack([a, m, b], axis=1)).T
    curv = fa - 2.0 * fm + fb
    h = 0.5 * (b - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = np.where(curv > 0, m + h * (fa - fb) / (2.0 * curv), m)
    vertex = np.clip(np.nan_to_num(vertex, nan=0.0), a, b)
    vertex = np.where(np.isfinite(vertex), vertex, m)
    fv = objective(vertex[:, None])[:, 0]

    cands = np.stack([u_grid, a, m, b, vertex], axis=1)
    vals = np.stack([f_grid, fa, fm, fb, fv], axis=1)
    best = np.min(vals, axis=1, keepdims=True)
    u_star = np.min(np.where(vals <= best, cands, np.inf), axis=1)
    return best[:, 0], u_star


def _flat_probe(problem, probe):
    """Broadcast an interval probe to flat arrays; returns (probe, shape)."""
    fields = [probe.x, probe.value, probe.grad, probe.hess]
    if probe.grad_backward is not None:
        fields.append(probe.grad_backward)
    arrs = np.broadcast_arrays(*[np.asarray(f, dtype=float) for f in fields])
    shape = arrs[0].shape
    flat = [a.reshape(-1, 1) for a in arrs]
    gb = flat[4] if probe.grad_backward is not None else None
    return DerivativeProbe(flat[0], flat[1], flat[2], flat[3], gb), shape


def hamiltonian_eval(problem: ControlProblem, probe: DerivativeProbe, n_grid: int = 65):
    """Return ``(value, u_star)`` of the Hamiltonian at ``probe``.

    Interval probes may carry arrays; the outputs then have the probe's
    broadcast shape.
    """
    lo, hi = problem.control_lo, problem.control_hi
    if problem.domain.dim == 1:
        flat, shape = _flat_probe(problem, probe)

        def objective(u):
            return generator_apply(problem, u, flat) + problem.running_cost(flat.x, u)

        vals, us = minimize_control(objective, lo, hi, flat.x.shape[0], n_grid)
        if shape == ():
            return float(vals[0]), float(us[0])
        return vals.reshape(shape), us.reshape(shape)

    x = np.asarray(probe.x, dtype=float)

    def objective(u):
        out = np.empty(u.shape)
        for j in range(u.shape[1]):
            uj = np.full(1, u[0, j])
            out[0, j] = generator_apply(problem, uj, DerivativeProbe(
                x[None], probe.value, np.asarray(probe.grad)[None], np.asarray(probe.hess)[None]))[0] \
                + problem.running_cost(x[None], uj)[0]
        return out

    vals, us = minimize_control(objective, lo, hi, 1, n_grid)
    return float(vals[0]), float(us[0])


def hjb_residual(problem: ControlProblem, probe: DerivativeProbe, n_grid: int = 65):
    """``beta * r - H(x, g, H)``."""
    value, _ = hamiltonian_eval(problem, probe, n_grid)
    return problem.discount * np.asarray(probe.value, dtype=float) - value


def boundary_residual(problem: ControlProblem, x, g):
    """Neumann defect ``<g, grad phi(x)> - h(x)`` at a boundary point."""
    x = np.asarray(x, dtype=float)
    if np.any(boundary_distance(problem.domain, x) > 1e-9):
        raise InvalidInputError(f"x={x.tolist()} is not on the boundary")
    n = phi_grad(problem.domain, x)
    g = np.asarray(g, dtype=float)
    inner = g * n if problem.domain.dim == 1 else np.sum(g * n, axis=-1)
    out = inner - problem.boundary_cost(x)
    return float(out) if np.ndim(out) == 0 else out


def _f_eta(params, g):
    return 2.0 * params.theta_d + params.theta_b * np.asarray(g, dtype=float)


def analytic_control_ex1(params: ExampleParams, g):
    """Closed-form minimiser of ``u^2 - (2 theta_d + theta_b g) u`` on ``[u_a, u_b]``.

    The clamp of half the linear coefficient; it coincides with the
    three-piece polygonal law for either sign of ``theta_b``.
    """
    if params.theta_b == 0:
        raise InvalidParamsError("closed-form control requires theta_b != 0")
    u = np.clip(0.5 * _f_eta(params, g), params.u_a, params.u_b)
    return float(u) if np.ndim(u) == 0 else u


def analytic_control_ex2(params: ExampleParams, x, g, hess):
    """Closed-form minimiser when the control also scales the diffusion.

    The linear coefficient gains ``-0.5 sigma_x^2 x^2 H``; at ``x = 0`` this
    is exactly :func:`analytic_control_ex1`.
    """
    if params.theta_b == 0:
        raise InvalidParamsError("closed-form control requires theta_b != 0")
    if params.u_a < 0:
        raise InvalidParamsError("closed-form control for example 2 requires u_a >= 0")
    x = np.asarray(x, dtype=float)
    f = _f_eta(params, g) - 0.5 * params.sigma_x ** 2 * x * x * np.asarray(hess, dtype=float)
    u = np.clip(0.5 * f, params.u_a, params.u_b)
    return float(u) if np.ndim(u) == 0 else u
