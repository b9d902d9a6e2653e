"""Run configuration: ``[section]`` headers with flat ``key = value`` lines.

Example::

    [run]
    command = solve
    example = 1
    output_dir = out

    [params]
    theta_a = 0.1
    theta_b = 0.5
    ...

Every section except ``[params]`` is optional; missing keys take the
defaults in ``DEFAULTS``. Unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .errors import ConfigParseError, ConfigValidationError, InvalidParamsError, UnknownKeyError
from .model import ExampleParams

__all__ = ["RunConfig", "parse_config", "load_config", "COMMANDS", "DEFAULTS"]

COMMANDS = ("solve", "simulate", "estimate", "verify", "sweep")

PARAM_KEYS = tuple(f.name for f in fields(ExampleParams))

DEFAULTS = {
    "run": {"command": None, "example": "1", "output_dir": "out"},
    "grid": {"n_nodes": "401"},
    "mc": {"n_paths": "10000", "dt": "0.001", "horizon": "", "epsilon": "1e-4", "seed": "0",
           "x0": "0.0", "policy": "extracted"},
    "solver": {"tol": "1e-9", "max_iter": "200", "n_grid_controls": "65"},
    "simulate": {"n_paths": "4", "horizon": "1.0"},
    "verify": {"points": "-0.9, 0.0, 0.9", "dpp_x0": "0.0", "dpp_t": "0.5", "dpp_budget": "0.02",
               "scheme_budget": "0.02", "agreement_tol": "0.05",
               "pairs": "0.0:0.1, 0.5:0.6, 0.8:0.9"},
    "sweep": {"parameter": "theta_e", "values": "0, 0.1, 0.2"},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    example: int
    params: ExampleParams
    n_nodes: int = 401
    mc: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    output_dir: str = "out"

    @property
    def seed(self) -> int:
        return self.mc["seed"]

    def header(self) -> str:
        """One-line audit record of every parameter (stable ordering)."""
        parts = [f"command={self.command}", f"example={self.example}"]
        parts += [f"{k}={getattr(self.params, k)!r}" for k in PARAM_KEYS]
        parts.append(f"n_nodes={self.n_nodes}")
        for name in ("mc", "solver", "simulate", "verify", "sweep"):
            parts += [f"{name}.{k}={v!r}" for k, v in sorted(getattr(self, name).items())]
        return "hjbr " + " ".join(parts)


def _as(section, key, raw, kind, rule=None, check=None):
    try:
        value = kind(raw)
    except (TypeError, ValueError):
        raise ConfigValidationError(f"{section}.{key}: expected {kind.__name__}, got {raw!r}") from None
    if check is not None and not check(value):
        raise ConfigValidationError(f"{section}.{key}: requires {rule}, got {raw!r}")
    return value


def _float_list(section, key, raw):
    try:
        return tuple(float(v) for v in raw.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigValidationError(f"{section}.{key}: expected a comma-separated list of numbers") from None


def _pairs(section, key, raw):
    out = []
    for item in raw.split(","):
        if not item.strip():
            continue
        try:
            a, b = item.split(":")
            out.append((float(a), float(b)))
        except ValueError:
            raise ConfigValidationError(f"{section}.{key}: expected pairs like 0.0:0.1, got {item!r}") from None
    return tuple(out)


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and fully validate a configuration.

    ``command`` (e.g. from the command line) overrides ``[run] command``.
    Raises :class:`ConfigParseError`, :class:`UnknownKeyError` or
    :class:`ConfigValidationError`; messages name the offending key.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   default_section="__no_default__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(f"malformed configuration: {exc}") from None

    known = dict(DEFAULTS, params={k: None for k in PARAM_KEYS})
    for section in cp.sections():
        if section not in known:
            raise UnknownKeyError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in known[section]:
                raise UnknownKeyError(f"unknown key {section}.{key}")

    def get(section, key):
        if cp.has_section(section) and key in cp[section]:
            return cp[section][key].strip()
        return known[section][key]

    cmd = command or get("run", "command")
    if cmd is None:
        raise ConfigValidationError("run.command: required (or pass it on the command line)")
    if cmd not in COMMANDS:
        raise ConfigValidationError(f"run.command: requires one of {', '.join(COMMANDS)}, got {cmd!r}")
    example = _as("run", "example", get("run", "example"), int, "example in {1, 2}", lambda v: v in (1, 2))

    if not cp.has_section("params"):
        raise ConfigValidationError("params: section [params] is required")
    values = {}
    for key in PARAM_KEYS:
        raw = get("params", key)
        if raw is None:
            raise ConfigValidationError(f"params.{key}: required")
        values[key] = _as("params", key, raw, float)
    positive = {"beta": "beta > 0", "sigma_x": "sigma_x > 0", "alpha": "alpha > 0"}
    for key, rule in positive.items():
        if not values[key] > 0:
            raise ConfigValidationError(f"params.{key}: requires {rule}, got {values[key]!r}")
    if not values["u_a"] < values["u_b"]:
        raise ConfigValidationError("params.u_a: requires u_a < u_b")
    if values["theta_b"] == 0:
        raise ConfigValidationError("params.theta_b: requires theta_b != 0")
    if example == 2 and values["u_a"] < 0:
        raise ConfigValidationError("params.u_a: example 2 requires u_a >= 0")
    try:
        params = ExampleParams(**values)
    except InvalidParamsError as exc:
        raise ConfigValidationError(f"params: {exc}") from None

    n_nodes = _as("grid", "n_nodes", get("grid", "n_nodes"), int, "n_nodes >= 3", lambda v: v >= 3)

    mc = {
        "n_paths": _as("mc", "n_paths", get("mc", "n_paths"), int, "n_paths >= 1", lambda v: v >= 1),
        "dt": _as("mc", "dt", get("mc", "dt"), float, "dt > 0", lambda v: v > 0),
        "seed": _as("mc", "seed", get("mc", "seed"), int, "seed >= 0", lambda v: v >= 0),
        "x0": _as("mc", "x0", get("mc", "x0"), float, "|x0| <= alpha", lambda v: abs(v) <= params.alpha),
        "policy": get("mc", "policy"),
    }
    horizon_raw, eps_raw = get("mc", "horizon"), get("mc", "epsilon")
    mc["horizon"] = (_as("mc", "horizon", horizon_raw, float, "horizon > 0", lambda v: v > 0)
                     if horizon_raw else None)
    mc["epsilon"] = (_as("mc", "epsilon", eps_raw, float, "epsilon > 0", lambda v: v > 0)
                     if eps_raw else None)
    if mc["horizon"] is None and mc["epsilon"] is None:
        raise ConfigValidationError("mc.horizon: one of horizon or epsilon is required")
    if mc["horizon"] is not None and mc["dt"] > mc["horizon"]:
        raise ConfigValidationError("mc.dt: requires dt <= horizon")
    if mc["policy"] != "extracted":
        u = _as("mc", "policy", mc["policy"], float, "'extracted' or a control in [u_a, u_b]",
                lambda v: params.u_a <= v <= params.u_b)
        mc["policy"] = u

    solver = {
        "tol": _as("solver", "tol", get("solver", "tol"), float, "tol > 0", lambda v: v > 0),
        "max_iter": _as("solver", "max_iter", get("solver", "max_iter"), int, "max_iter >= 1", lambda v: v >= 1),
        "n_grid_controls": _as("solver", "n_grid_controls", get("solver", "n_grid_controls"), int,
                               "n_grid_controls >= 2", lambda v: v >= 2),
    }
    simulate = {
        "n_paths": _as("simulate", "n_paths", get("simulate", "n_paths"), int, "n_paths >= 1", lambda v: v >= 1),
        "horizon": _as("simulate", "horizon", get("simulate", "horizon"), float,
                       "horizon >= mc.dt", lambda v: v >= mc["dt"]),
    }

    inside = lambda v: abs(v) <= params.alpha  # noqa: E731
    points = _float_list("verify", "points", get("verify", "points"))
    if not points or not all(inside(p) for p in points):
        raise ConfigValidationError("verify.points: requires a non-empty list inside [-alpha, alpha]")
    pairs = _pairs("verify", "pairs", get("verify", "pairs"))
    if not pairs or not all(inside(a) and inside(b) and abs(a - b) >= 1e-3 for a, b in pairs):
        raise ConfigValidationError("verify.pairs: requires pairs inside the domain with |x - y| >= 1e-3")
    verify = {
        "points": points,
        "pairs": pairs,
        "dpp_x0": _as("verify", "dpp_x0", get("verify", "dpp_x0"), float, "|dpp_x0| <= alpha", inside),
        "dpp_t": _as("verify", "dpp_t", get("verify", "dpp_t"), float, "dpp_t >= mc.dt", lambda v: v >= mc["dt"]),
        "dpp_budget": _as("verify", "dpp_budget", get("verify", "dpp_budget"), float, "dpp_budget >= 0",
                          lambda v: v >= 0),
        "scheme_budget": _as("verify", "scheme_budget", get("verify", "scheme_budget"), float,
                             "scheme_budget >= 0", lambda v: v >= 0),
        "agreement_tol": _as("verify", "agreement_tol", get("verify", "agreement_tol"), float,
                             "agreement_tol > 0", lambda v: v > 0),
    }

    parameter = get("sweep", "parameter")
    if parameter not in PARAM_KEYS:
        raise ConfigValidationError(f"sweep.parameter: requires one of {', '.join(PARAM_KEYS)}, got {parameter!r}")
    sweep_values = _float_list("sweep", "values", get("sweep", "values"))
    if not sweep_values:
        raise ConfigValidationError("sweep.values: requires at least one value")
    for v in sweep_values:
        try:
            params.replace(**{parameter: v})
        except InvalidParamsError as exc:
            raise ConfigValidationError(f"sweep.values: {parameter}={v!r} is invalid ({exc})") from None
    sweep = {"parameter": parameter, "values": sweep_values}

    return RunConfig(
        command=cmd, example=example, params=params, n_nodes=n_nodes, mc=mc, solver=solver,
        simulate=simulate, verify=verify, sweep=sweep, output_dir=get("run", "output_dir"),
    )


def load_config(path, command: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read configuration {path}: {exc}") from None
    return parse_config(text, command)
