"""Cross-checks between the PDE solution and the stochastic control problem.

Every check returns a report object with a ``passed`` flag and a
``to_text()`` rendering that lists tolerances, seeds and raw numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .estimate import MCConfig, path_costs, resolve_horizon, tail_bound
from .geometry import contains
from .hamiltonian import DerivativeProbe, boundary_residual, hamiltonian_eval
from .model import ControlProblem
from .pde import ValueFunction, discrete_probes, extract_policy
from .simulate import Policy

__all__ = [
    "ResidualReport",
    "DppReport",
    "ComparisonReport",
    "EquicontinuityReport",
    "check_viscosity_residuals",
    "check_dpp",
    "compare_mc_pde",
    "check_equicontinuity",
    "default_policy_family",
]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (np.ndarray, list, tuple)):
        return "[" + ", ".join(_fmt(a) for a in v) + "]"
    return str(v)


def _render(title, passed, fields, rows=(), columns=()):
    lines = [f"[{title}]", f"status = {'PASS' if passed else 'FAIL'}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in fields.items()]
    if rows:
        lines.append("# " + ",".join(columns))
        for r in rows:
            lines.append(",".join(_fmt(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


@dataclass
class ResidualReport:
    interior_max_abs_residual: float
    boundary_sub_ok: bool
    boundary_super_ok: bool
    worst_node: float
    details: list
    tol_interior: float
    tol_boundary: float
    audit: dict | None = None

    @property
    def passed(self) -> bool:
        return (self.interior_max_abs_residual <= self.tol_interior
                and self.boundary_sub_ok and self.boundary_super_ok)

    def to_text(self) -> str:
        fields = {
            "interior_max_abs_residual": self.interior_max_abs_residual,
            "tol_interior": self.tol_interior,
            "tol_boundary": self.tol_boundary,
            "boundary_sub_ok": self.boundary_sub_ok,
            "boundary_super_ok": self.boundary_super_ok,
            "worst_node": self.worst_node,
        }
        if self.audit:
            fields.update({f"audit_{k}": v for k, v in self.audit.items()})
        return _render("viscosity_residuals", self.passed, fields, self.details, ("x", "F", "Gamma"))


def check_viscosity_residuals(problem: ControlProblem, vf: ValueFunction, tol_interior=None,
                              tol_boundary: float = 1e-6, n_grid: int = 65, audit: bool = False,
                              audit_samples: int = 16, seed: int = 0) -> ResidualReport:
    """Discrete sub/supersolution test of a nodal candidate.

    Interior nodes: ``F = beta v - H`` with the scheme's upwinded probes.
    Boundary nodes: ``F`` with one-sided probes and the Neumann defect
    ``Gamma``; the subsolution side requires ``min(F, Gamma) <= tol`` and the
    supersolution side ``max(F, Gamma) >= -tol``. ``tol_interior`` defaults
    to ``1e-6 (1 + sup|v|)``.

    With ``audit=True`` interior nodes are also probed with quadratic test
    functions whose slope ranges between the one-sided differences and whose
    curvature is perturbed upward (sub) or downward (super); the extremes are
    reported but do not affect ``passed``.
    """
    grid = vf.grid
    v = np.asarray(vf.values, dtype=float)
    if tol_interior is None:
        tol_interior = 1e-6 * (1.0 + float(np.max(np.abs(v))))
    probes = discrete_probes(grid, v)
    ham, _ = hamiltonian_eval(problem, probes, n_grid)
    F = problem.discount * v - ham

    interior = slice(1, -1)
    abs_int = np.abs(F[interior])
    k = int(np.argmax(abs_int)) + 1
    ends = np.array([0, grid.n_nodes - 1])
    gamma = boundary_residual(problem, grid.nodes[ends], np.asarray(probes.grad)[ends])
    fb = F[ends]
    sub_ok = bool(np.all(np.minimum(fb, gamma) <= tol_boundary))
    super_ok = bool(np.all(np.maximum(fb, gamma) >= -tol_boundary))

    details = [{"x": float(x), "F": float(f), "Gamma": float("nan")} for x, f in zip(grid.nodes, F)]
    for e, g in zip(ends, gamma):
        details[e]["Gamma"] = float(g)

    audit_out = None
    if audit:
        audit_out = _audit_quadratic(problem, grid, v, probes, n_grid, audit_samples, seed)

    return ResidualReport(
        interior_max_abs_residual=float(abs_int[k - 1]),
        boundary_sub_ok=sub_ok,
        boundary_super_ok=super_ok,
        worst_node=float(grid.nodes[k]),
        details=details,
        tol_interior=float(tol_interior),
        tol_boundary=float(tol_boundary),
        audit=audit_out,
    )


def _audit_quadratic(problem, grid, v, probes, n_grid, n_samples, seed):
    rng = np.random.default_rng(seed)
    x = grid.nodes[1:-1]
    gf = np.asarray(probes.grad)[1:-1]
    gb = np.asarray(probes.grad_backward)[1:-1]
    H = np.asarray(probes.hess)[1:-1]
    lo_g, hi_g = np.minimum(gf, gb), np.maximum(gf, gb)
    spread = np.abs(H) * 0.1 + 1e-8
    sub_max, super_min = -np.inf, np.inf
    for _ in range(n_samples):
        p = lo_g + rng.uniform(0, 1, x.size) * (hi_g - lo_g)
        bump = rng.uniform(0, 1, x.size) * spread
        for sign in (1.0, -1.0):
            probe = DerivativeProbe(x, v[1:-1], p, H + sign * bump)
            val, _ = hamiltonian_eval(problem, probe, n_grid)
            f = problem.discount * v[1:-1] - val
            if sign > 0:
                sub_max = max(sub_max, float(np.max(f)))
            else:
                super_min = min(super_min, float(np.min(f)))
    return {"sub_max_F": sub_max, "super_min_F": super_min, "samples": n_samples, "seed": seed}


@dataclass
class DppReport:
    x0: float
    t: float
    lhs: float
    rhs_min: float
    gap: float
    tolerance: float
    std_error: float
    budget: float
    slack: float
    best_policy: str
    per_policy: list = field(default_factory=list)
    seed: int = 0
    n_paths: int = 0
    dt: float = 0.0

    @property
    def passed(self) -> bool:
        return -self.tolerance <= self.gap <= self.tolerance + self.slack

    def to_text(self) -> str:
        fields = {k: getattr(self, k) for k in (
            "x0", "t", "lhs", "rhs_min", "gap", "tolerance", "std_error", "budget", "slack",
            "best_policy", "seed", "n_paths", "dt")}
        return _render("dpp", self.passed, fields, self.per_policy, ("policy", "rhs", "std_error"))


def default_policy_family(problem: ControlProblem, vf: ValueFunction | None = None) -> list:
    """Extracted feedback (when ``vf`` is given) plus the constants at
    ``u_a``, the midpoint and ``u_b``."""
    lo, hi = problem.control_lo, problem.control_hi
    family = [extract_policy(vf)] if vf is not None else []
    family += [Policy.constant(lo), Policy.constant(0.5 * (lo + hi)), Policy.constant(hi)]
    return family


def check_dpp(problem: ControlProblem, vf: ValueFunction, x0, t: float, policy_family,
              mc: MCConfig, budget: float = 0.02, slack: float = 0.0) -> DppReport:
    """Dynamic programming consistency at the deterministic time ``t``.

    For each policy the right side
    ``E[int_0^t e^{-bs} L ds + int_0^t e^{-bs} h dl + e^{-bt} v(X_t)]`` is
    estimated with common random numbers; ``gap = rhs_min - v(x0)``.
    """
    if not t > 0:
        raise InvalidInputError("t must be > 0")
    x0f = float(x0)
    if not bool(contains(problem.domain, x0f)):
        raise InvalidInputError(f"x0={x0f} lies outside the domain")
    family = list(policy_family)
    if not family:
        raise InvalidInputError("policy family must be non-empty")
    lhs = float(vf(x0f))
    per = []
    for p in family:
        pc = path_costs(problem, p, x0f, t, mc.dt, mc.n_paths, mc.seed, terminal=vf, workers=mc.workers)
        per.append({"policy": p.label, "rhs": pc.mean, "std_error": pc.std_error})
    best = min(range(len(per)), key=lambda i: per[i]["rhs"])
    se = per[best]["std_error"]
    rhs = per[best]["rhs"]
    return DppReport(
        x0=x0f, t=float(t), lhs=lhs, rhs_min=rhs, gap=rhs - lhs, tolerance=3.0 * se + budget,
        std_error=se, budget=budget, slack=slack, best_policy=per[best]["policy"], per_policy=per,
        seed=mc.seed, n_paths=mc.n_paths, dt=mc.dt,
    )


@dataclass
class ComparisonReport:
    rows: list
    scheme_budget: float
    agreement_tol: float | None
    seed: int
    n_paths: int
    dt: float

    @property
    def passed(self) -> bool:
        return all(r["agree"] and r["upper_bound_ok"] for r in self.rows)

    @property
    def max_abs_diff(self) -> float:
        return max(abs(r["diff"]) for r in self.rows)

    def to_text(self) -> str:
        fields = {"scheme_budget": self.scheme_budget, "agreement_tol": self.agreement_tol,
                  "max_abs_diff": self.max_abs_diff, "seed": self.seed, "n_paths": self.n_paths,
                  "dt": self.dt}
        cols = ("x", "v_pde", "v_mc", "std_error", "tail_bound", "horizon", "diff", "tolerance",
                "agree", "upper_bound_ok")
        return _render("mc_vs_pde", self.passed, fields, self.rows, cols)


def compare_mc_pde(problem: ControlProblem, vf: ValueFunction, points, mc: MCConfig,
                   scheme_budget: float = 0.02, agreement_tol: float | None = None,
                   policy: Policy | None = None) -> ComparisonReport:
    """Compare PDE values with Monte Carlo costs of the extracted feedback.

    Per point the combined tolerance is ``3 SE + tail_bound + scheme_budget``
    (replaced by ``agreement_tol`` for the two-sided test when given). The
    Monte Carlo side estimates the cost of one admissible policy, so it must
    also satisfy ``v_mc >= v_pde - tolerance``.
    """
    policy = extract_policy(vf) if policy is None else policy
    rows = []
    for x in np.atleast_1d(np.asarray(points, dtype=float)):
        if not bool(contains(problem.domain, x)):
            raise InvalidInputError(f"point {x} lies outside the domain")
        horizon, c = resolve_horizon(problem, policy, float(x), mc)
        pc = path_costs(problem, policy, float(x), horizon, mc.dt, mc.n_paths, mc.seed, workers=mc.workers)
        c = pc.local_time_constant() if c is None else c
        tail = tail_bound(problem, pc.n_steps * mc.dt, c)
        v_pde = float(vf(x))
        v_mc = pc.mean
        tol = 3.0 * pc.std_error + tail + scheme_budget
        two_sided = tol if agreement_tol is None else agreement_tol
        rows.append({
            "x": float(x), "v_pde": v_pde, "v_mc": v_mc, "std_error": pc.std_error,
            "tail_bound": tail, "horizon": float(horizon), "diff": v_mc - v_pde, "tolerance": tol,
            "agree": bool(abs(v_mc - v_pde) <= two_sided),
            "upper_bound_ok": bool(v_mc >= v_pde - tol),
        })
    return ComparisonReport(rows, scheme_budget, agreement_tol, mc.seed, mc.n_paths, mc.dt)


@dataclass
class EquicontinuityReport:
    rows: list
    k_hat: float
    max_ratio: float
    slack_factor: float
    seed: int
    policy: str

    @property
    def passed(self) -> bool:
        return np.isfinite(self.max_ratio) and all(r["within_bound"] for r in self.rows)

    def to_text(self) -> str:
        fields = {"k_hat": self.k_hat, "max_ratio": self.max_ratio, "slack_factor": self.slack_factor,
                  "seed": self.seed, "policy": self.policy}
        cols = ("x", "y", "J_x", "J_y", "ratio", "se_diff", "within_bound")
        return _render("equicontinuity", self.passed, fields, self.rows, cols)


def check_equicontinuity(problem: ControlProblem, pairs, policy: Policy, mc: MCConfig,
                         slack_factor: float = 2.0) -> EquicontinuityReport:
    """Sampled modulus of continuity of ``x -> J(x)`` under common noise.

    ``k_hat`` is the least-squares slope (through the origin) of
    ``|J(x) - J(y)|`` against ``|x - y|``; every pair must satisfy
    ``|J(x) - J(y)| <= slack_factor * k_hat |x - y| + 6 SE_diff`` where
    ``SE_diff`` is the standard error of the paired difference. Pairs closer
    than ``1e-3`` are rejected.
    """
    pairs = [(float(x), float(y)) for x, y in pairs]
    if not pairs:
        raise InvalidInputError("at least one pair is required")
    for x, y in pairs:
        if abs(x - y) < 1e-3:
            raise InvalidInputError(f"pair ({x}, {y}) is closer than 1e-3")
    # One horizon for every point keeps the coupling exact.
    horizon, _ = resolve_horizon(problem, policy, pairs[0][0], mc)
    cache = {}

    def costs(x):
        if x not in cache:
            cache[x] = path_costs(problem, policy, x, horizon, mc.dt, mc.n_paths, mc.seed,
                                  workers=mc.workers).costs
        return cache[x]

    rows = []
    for x, y in pairs:
        cx, cy = costs(x), costs(y)
        n = cx.size
        diff = cx - cy
        se = float(np.std(diff, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        jx, jy = float(np.mean(cx)), float(np.mean(cy))
        rows.append({"x": x, "y": y, "J_x": jx, "J_y": jy, "delta": abs(jx - jy),
                     "dist": abs(x - y), "ratio": abs(jx - jy) / abs(x - y), "se_diff": se})
    d = np.array([r["dist"] for r in rows])
    dj = np.array([r["delta"] for r in rows])
    k_hat = float(np.dot(d, dj) / np.dot(d, d))
    for r in rows:
        r["within_bound"] = bool(r["delta"] <= slack_factor * k_hat * r["dist"] + 6.0 * r["se_diff"])
    return EquicontinuityReport(rows, k_hat, float(np.max(dj / d)), slack_factor, mc.seed, policy.label)
