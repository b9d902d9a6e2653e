"""Monotone finite-difference HJB solver with Neumann boundary data.

Interior rows discretise ``beta v - mu v' - a v'' = L`` (``a = sigma^2/2``)
with the first derivative upwinded on the sign of the drift and a central
second difference, so each interior row has diagonal
``beta + |mu|/dx + 2a/dx^2`` and non-positive off-diagonals: a strictly
diagonally dominant M-matrix row with margin ``beta``. The two boundary rows
impose ``<Dv, Dphi> = h`` strongly with a two-point one-sided difference.
Howard policy iteration alternates linear solves and pointwise minimisation
of the same upwinded discrete Hamiltonian.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvalidInputError, NoConvergenceError, UnsupportedDimensionError
from .geometry import DomainSpec, phi_grad
from .hamiltonian import DerivativeProbe, hamiltonian_eval
from .model import ControlProblem
from .simulate import Policy

__all__ = [
    "Grid",
    "TridiagonalSystem",
    "ValueFunction",
    "build_grid",
    "assemble_fixed_policy",
    "discrete_probes",
    "discrete_residual",
    "improve_policy",
    "policy_iteration",
    "extract_policy",
    "write_value_csv",
    "write_convergence_log",
]


@dataclass(frozen=True)
class Grid:
    n_nodes: int
    nodes: np.ndarray
    spacing: float


def build_grid(domain: DomainSpec, n_nodes: int) -> Grid:
    """Uniform grid on ``[-alpha, alpha]`` with both endpoints as nodes."""
    if domain.dim != 1:
        raise UnsupportedDimensionError("the PDE solver supports one-dimensional domains only")
    if int(n_nodes) != n_nodes or n_nodes < 3:
        raise InvalidInputError(f"n_nodes must be an integer >= 3, got {n_nodes!r}")
    n = int(n_nodes)
    nodes = np.linspace(-domain.alpha, domain.alpha, n)
    return Grid(n, nodes, 2.0 * domain.alpha / (n - 1))


@dataclass
class TridiagonalSystem:
    """``A v = rhs`` with ``A`` stored by diagonals.

    ``lower[i]`` multiplies ``v[i-1]`` in row ``i`` (``lower[0]`` unused) and
    ``upper[i]`` multiplies ``v[i+1]`` (``upper[-1]`` unused).
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def solve(self) -> np.ndarray:
        ab = np.zeros((3, self.diag.size))
        ab[0, 1:] = self.upper[:-1]
        ab[1] = self.diag
        ab[2, :-1] = self.lower[1:]
        return solve_banded((1, 1), ab, self.rhs, check_finite=False)

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[1:] += self.lower[1:] * v[:-1]
        out[:-1] += self.upper[:-1] * v[1:]
        return out

    def to_dense(self) -> np.ndarray:
        n = self.diag.size
        A = np.diag(self.diag)
        A[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        A[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return A

    def dominance_margin(self) -> np.ndarray:
        """``|diag| - sum |off-diagonal|`` for every row."""
        off = np.abs(self.lower) + np.abs(self.upper)
        off[0] = abs(self.upper[0])
        off[-1] = abs(self.lower[-1])
        return np.abs(self.diag) - off


def assemble_fixed_policy(problem: ControlProblem, grid: Grid, policy) -> TridiagonalSystem:
    """Linear system of the scheme with the control frozen at nodal values."""
    u = np.asarray(policy, dtype=float)
    if u.shape != (grid.n_nodes,):
        raise InvalidInputError(f"policy must have length {grid.n_nodes}, got shape {u.shape}")
    x, dx = grid.nodes, grid.spacing
    xi, ui = x[1:-1], u[1:-1]
    mu = problem.drift(xi, ui)
    a = problem.diffusion_coefficient(xi, ui)
    fwd = np.maximum(mu, 0.0) / dx
    bwd = -np.minimum(mu, 0.0) / dx

    n = grid.n_nodes
    lower, diag, upper, rhs = np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n)
    lower[1:-1] = -(bwd + a / dx ** 2)
    upper[1:-1] = -(fwd + a / dx ** 2)
    diag[1:-1] = problem.discount + fwd + bwd + 2.0 * a / dx ** 2
    rhs[1:-1] = problem.running_cost(xi, ui)

    ends = np.array([x[0], x[-1]])
    normal = phi_grad(problem.domain, ends)
    h = problem.boundary_cost(ends)
    # Row 0: normal * (v1 - v0)/dx = h.  Row n-1: normal * (v_{n-1} - v_{n-2})/dx = h.
    diag[0], upper[0], rhs[0] = -normal[0] / dx, normal[0] / dx, h[0]
    diag[-1], lower[-1], rhs[-1] = normal[1] / dx, -normal[1] / dx, h[1]
    return TridiagonalSystem(lower, diag, upper, rhs)


def discrete_probes(grid: Grid, values) -> DerivativeProbe:
    """Upwind-ready derivative probes at every node.

    Interior nodes carry forward/backward differences and the central second
    difference; boundary nodes carry the inward one-sided difference (as both
    gradients) and the one-sided second difference.
    """
    v = np.asarray(values, dtype=float)
    dx = grid.spacing
    d = np.diff(v) / dx
    fwd = np.empty_like(v)
    bwd = np.empty_like(v)
    fwd[:-1], fwd[-1] = d, d[-1]
    bwd[1:], bwd[0] = d, d[0]
    hess = np.empty_like(v)
    hess[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx ** 2
    hess[0], hess[-1] = hess[1], hess[-2]
    return DerivativeProbe(grid.nodes, v, fwd, hess, grad_backward=bwd)


def discrete_residual(problem: ControlProblem, grid: Grid, policy, values) -> np.ndarray:
    """Row residuals ``A v - rhs`` of the scheme at a frozen policy."""
    sys = assemble_fixed_policy(problem, grid, policy)
    return sys.matvec(values) - sys.rhs


def improve_policy(problem: ControlProblem, grid: Grid, values, n_grid_controls: int = 65):
    """Pointwise minimiser of the discrete Hamiltonian; returns ``(H, policy)``."""
    return hamiltonian_eval(problem, discrete_probes(grid, values), n_grid_controls)


@dataclass
class ValueFunction:
    grid: Grid
    values: np.ndarray
    policy: np.ndarray
    iterations: int
    final_update_norm: float
    convergence_log: list = field(default_factory=list)
    problem: ControlProblem | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_values(cls, problem: ControlProblem, grid: Grid, values, n_grid_controls: int = 65):
        """Wrap arbitrary nodal values (e.g. a candidate to verify)."""
        values = np.asarray(values, dtype=float)
        _, policy = improve_policy(problem, grid, values, n_grid_controls)
        return cls(grid, values, policy, 0, float("nan"), [], problem)

    def __call__(self, x):
        return np.interp(x, self.grid.nodes, self.values)


def policy_iteration(problem: ControlProblem, grid: Grid, tol: float = 1e-9, max_iter: int = 200,
                     n_grid_controls: int = 65, initial_policy=None) -> ValueFunction:
    """Howard's algorithm on the monotone scheme.

    Stops when the sup-norm change of the values is at most ``tol`` or the
    improved policy equals the current one. The returned policy is the
    greedy policy for the returned values.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be > 0")
    lo, hi = problem.control_lo, problem.control_hi
    if initial_policy is None:
        policy = np.full(grid.n_nodes, 0.5 * (lo + hi))
    else:
        policy = np.clip(np.broadcast_to(np.asarray(initial_policy, dtype=float), (grid.n_nodes,)), lo, hi)

    log = []
    values = None
    update = np.inf
    for it in range(1, max_iter + 1):
        new_values = assemble_fixed_policy(problem, grid, policy).solve()
        if values is not None:
            update = float(np.max(np.abs(new_values - values)))
        values = new_values
        log.append((it, update))
        _, new_policy = improve_policy(problem, grid, values, n_grid_controls)
        stationary = np.array_equal(new_policy, policy)
        policy = new_policy
        if update <= tol or stationary:
            return ValueFunction(grid, values, policy, it, update if np.isfinite(update) else 0.0,
                                 log, problem)
    raise NoConvergenceError(
        f"policy iteration did not reach tol={tol:g} in {max_iter} iterations (last update {update:.3g})",
        iterations=max_iter, last_update=update,
    )


def extract_policy(vf: ValueFunction) -> Policy:
    """Feedback policy interpolating the nodal controls piecewise-linearly.

    The interpolant of in-range nodal values stays in range; :class:`Policy`
    clamps again on evaluation.
    """
    x0, dx, n = vf.grid.nodes[0], vf.grid.spacing, vf.grid.n_nodes
    pol = np.asarray(vf.policy, dtype=float).copy()
    slope = np.diff(pol)
    if vf.problem is not None:
        lo, hi = vf.problem.control_lo, vf.problem.control_hi
    else:
        lo, hi = float(pol.min()), float(pol.max())

    def feedback(x):
        # Uniform grid: locate the cell arithmetically instead of by search.
        s = (np.asarray(x, dtype=float) - x0) / dx
        i = np.clip(np.floor(s), 0, n - 2).astype(np.intp)
        return pol[i] + (s - i) * slope[i]

    return Policy.feedback(feedback, label="extracted")


def write_value_csv(vf: ValueFunction, path, header: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("x,v,policy\n")
        for row in zip(vf.grid.nodes, vf.values, vf.policy):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_convergence_log(vf: ValueFunction, path, header: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("iteration,sup_update\n")
        for it, upd in vf.convergence_log:
            fh.write(f"{it},{upd:.17g}\n")
