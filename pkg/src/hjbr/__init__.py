"""Optimal control of reflected diffusions on an interval.

The package couples a projected Euler-Maruyama simulator and Monte Carlo
cost estimator with a monotone finite-difference solver for the HJB
equation with Neumann boundary data, plus numerical checks that tie the
two together.
"""
from .errors import (
    ConfigError,
    ConfigParseError,
    ConfigValidationError,
    HJBRError,
    InvalidInputError,
    InvalidParamsError,
    NoConvergenceError,
    UnknownKeyError,
    UnsupportedDimensionError,
)
from .geometry import DomainSpec, boundary_distance, contains, phi_eval, phi_grad, project_to_domain
from .model import (
    P1,
    ControlProblem,
    ExampleParams,
    ValidationReport,
    build_example1,
    build_example2,
    constant_cost_problem,
    validate_problem,
    with_running_cost,
)
from .simulate import Policy, Trajectory, derive_subseed, euler_reflected_step, simulate_batch, simulate_path
from .estimate import (
    MCConfig,
    MCEstimate,
    estimate_cost,
    estimate_value,
    estimate_with_config,
    path_costs,
    tail_bound,
    truncation_horizon,
)
from .hamiltonian import (
    DerivativeProbe,
    analytic_control_ex1,
    analytic_control_ex2,
    boundary_residual,
    generator_apply,
    hamiltonian_eval,
    hjb_residual,
)
from .pde import Grid, ValueFunction, assemble_fixed_policy, build_grid, extract_policy, policy_iteration
from .verify import check_dpp, check_equicontinuity, check_viscosity_residuals, compare_mc_pde
from .config import RunConfig, parse_config

__version__ = "0.1.0"
