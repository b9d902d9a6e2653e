"""Command-line driver: ``hjbr <command> --config <path> [--output-dir DIR] [--seed N]``.

Commands
--------
solve     value.csv and convergence.csv from policy iteration.
simulate  trajectory_XXXX.csv for a few reflected paths.
estimate  estimate.txt with the Monte Carlo cost at ``[mc] x0``.
verify    verify_report.txt with the residual, DPP, MC-vs-PDE and
          equicontinuity checks (exit status 1 if any fails).
sweep     sweep_XXX/value.csv per parameter value plus sweep_index.csv.

Every artifact starts with a ``# hjbr ...`` line that records the full
parameter set and seed; identical configurations give identical files.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .config import COMMANDS, RunConfig, load_config
from .errors import HJBRError
from .estimate import MCConfig, estimate_with_config
from .model import build_example1, build_example2
from .pde import build_grid, extract_policy, policy_iteration, write_convergence_log, write_value_csv
from .simulate import Policy, resolve_workers, simulate_batch, write_trajectory_csv
from .verify import check_dpp, check_equicontinuity, check_viscosity_residuals, compare_mc_pde, default_policy_family

__all__ = ["main", "run", "build_problem"]


def build_problem(config: RunConfig, params=None):
    params = config.params if params is None else params
    return (build_example1 if config.example == 1 else build_example2)(params)


def _solve(config: RunConfig, problem):
    grid = build_grid(problem.domain, config.n_nodes)
    s = config.solver
    return policy_iteration(problem, grid, tol=s["tol"], max_iter=s["max_iter"],
                            n_grid_controls=s["n_grid_controls"])


def _mc(config: RunConfig) -> MCConfig:
    m = config.mc
    return MCConfig(n_paths=m["n_paths"], dt=m["dt"], horizon=m["horizon"], epsilon=m["epsilon"],
                    seed=m["seed"])


def _policy(config: RunConfig, problem):
    if config.mc["policy"] == "extracted":
        return extract_policy(_solve(config, problem))
    return Policy.constant(config.mc["policy"])


def _write(path, header, body):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n{body}")


def cmd_solve(config, out, header):
    vf = _solve(config, build_problem(config))
    write_value_csv(vf, os.path.join(out, "value.csv"), header)
    write_convergence_log(vf, os.path.join(out, "convergence.csv"), header)
    return 0


def cmd_simulate(config, out, header):
    problem = build_problem(config)
    policy = _policy(config, problem)
    sim = config.simulate
    trajs = simulate_batch(problem, policy, config.mc["x0"], sim["horizon"], config.mc["dt"],
                           sim["n_paths"], config.seed)
    for i, traj in enumerate(trajs):
        write_trajectory_csv(traj, os.path.join(out, f"trajectory_{i:04d}.csv"), header)
    return 0


def cmd_estimate(config, out, header):
    problem = build_problem(config)
    policy = _policy(config, problem)
    est = estimate_with_config(problem, policy, config.mc["x0"], _mc(config))
    _write(os.path.join(out, "estimate.txt"), header,
           est.to_text(extra={"x0": config.mc["x0"], "policy": policy.label}))
    return 0


def cmd_verify(config, out, header):
    problem = build_problem(config)
    vf = _solve(config, problem)
    mc = _mc(config)
    v = config.verify
    reports = [
        check_viscosity_residuals(problem, vf, n_grid=config.solver["n_grid_controls"]),
        check_dpp(problem, vf, v["dpp_x0"], v["dpp_t"], default_policy_family(problem, vf), mc,
                  budget=v["dpp_budget"]),
        compare_mc_pde(problem, vf, v["points"], mc, scheme_budget=v["scheme_budget"],
                       agreement_tol=v["agreement_tol"]),
        check_equicontinuity(problem, v["pairs"], extract_policy(vf), mc),
    ]
    write_value_csv(vf, os.path.join(out, "value.csv"), header)
    passed = all(r.passed for r in reports)
    body = "\n".join(r.to_text() for r in reports)
    body += f"\n[summary]\nstatus = {'PASS' if passed else 'FAIL'}\n"
    _write(os.path.join(out, "verify_report.txt"), header, body)
    for r in reports:
        print(r.to_text().splitlines()[0], r.to_text().splitlines()[1])
    return 0 if passed else 1


def cmd_sweep(config, out, header):
    name = config.sweep["parameter"]
    values = config.sweep["values"]

    def one(i):
        params = config.params.replace(**{name: values[i]})
        problem = build_problem(config, params)
        vf = _solve(config, problem)
        sub = os.path.join(out, f"sweep_{i:03d}")
        os.makedirs(sub, exist_ok=True)
        write_value_csv(vf, os.path.join(sub, "value.csv"), f"{header} sweep.{name}={values[i]!r}")
        return vf.iterations

    workers = min(resolve_workers(None), len(values))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        iterations = list(pool.map(one, range(len(values))))
    lines = ["index,parameter,value,path,iterations"]
    lines += [f"{i},{name},{v!r},sweep_{i:03d}/value.csv,{it}"
              for i, (v, it) in enumerate(zip(values, iterations))]
    _write(os.path.join(out, "sweep_index.csv"), header, "\n".join(lines) + "\n")
    return 0


HANDLERS = {"solve": cmd_solve, "simulate": cmd_simulate, "estimate": cmd_estimate,
            "verify": cmd_verify, "sweep": cmd_sweep}


def run(config: RunConfig) -> int:
    """Execute a validated configuration; returns the process exit status."""
    os.makedirs(config.output_dir, exist_ok=True)
    return HANDLERS[config.command](config, config.output_dir, config.header())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hjbr", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the configuration file")
    parser.add_argument("--output-dir", help="override [run] output_dir")
    parser.add_argument("--seed", type=int, help="override [mc] seed")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, command=args.command)
        if args.output_dir is not None:
            config = dataclasses.replace(config, output_dir=args.output_dir)
        if args.seed is not None:
            if args.seed < 0:
                raise HJBRError("--seed: requires seed >= 0")
            config = dataclasses.replace(config, mc={**config.mc, "seed": args.seed})
        return run(config)
    except HJBRError as exc:
        print(f"hjbr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
