"""
Delamination Parameter Identification Command Line
File: scripts/delamid.py

Subcommands:

    simulate      run the forward recursion for the configured planted parameters
    identify      staged identification, writes trace/params/summary/report files
    grad-check    compare adjoint subgradients with finite differences
    stationarity  M-stationarity certificate of a parameter point
    oracle-nc     compare the normal-cone formula with the sampling oracle

To run it, open a terminal in the root project folder.
Activate the local project virtual environment.
Choose the correct command for your OS, for example:

py scripts\\delamid.py identify --config config\\desk_scale.json --seed 1
python3 scripts/delamid.py identify --config config/desk_scale.json --seed 1

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

import argparse
import dataclasses
import pathlib
import sys
from typing import List, Optional

import numpy as np
import pandas as pd

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

# Now we can import local modules
from utils.environment import output_root, worker_count  # noqa: E402
from utils.logger import configure_logging, logger  # noqa: E402
from scripts.adhesive_model import Grouping  # noqa: E402
from scripts.adjoint.gradient_check import gradient_check  # noqa: E402
from scripts.adjoint.normal_cone_oracle import compare_with_sampling  # noqa: E402
from scripts.adjoint.stationarity import check_M_stationarity  # noqa: E402
from scripts.cli_io.config import ExperimentConfig, config_from_dict, load_config, parse_phase_numbers  # noqa: E402
from scripts.cli_io.experiment import (  # noqa: E402
    build_experiment,
    build_loading,
    build_operators,
    planted_from_config,
)
from scripts.cli_io.plots import emit_plots  # noqa: E402
from scripts.cli_io.results import emit_results, load_report, write_json, write_trajectory_csv  # noqa: E402
from scripts.errors import DelamidError, NumericalError  # noqa: E402
from scripts.forward_sim import simulate, trajectory_residuals  # noqa: E402
from scripts.identification.objective import tracking_terms  # noqa: E402
from scripts.identification.phases import run_identification  # noqa: E402

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delamid", description="Adhesive-contact delamination identification.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=pathlib.Path, help="experiment JSON (defaults when omitted)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", type=pathlib.Path, help="output folder")
    common.add_argument("--mesh-cache", type=pathlib.Path, help=".npz cache of mesh and condensed operators")
    common.add_argument("--log-level", default=None, help="console log level")
    common.add_argument("--branch", choices=("active", "inactive", "enumerate"), help="overrides the config branch policy")
    common.add_argument("--no-plots", action="store_true", help="skip SVG output")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="forward simulation")
    identify = sub.add_parser("identify", parents=[common], help="staged identification")
    identify.add_argument("--phases", default=None, help="comma-separated phase numbers, e.g. 1,2,3,4")
    grad = sub.add_parser("grad-check", parents=[common], help="subgradient versus finite differences")
    grad.add_argument("--points", type=int, default=1, help="number of random parameter points")
    grad.add_argument("--per-node", action="store_true", help="one parameter triple per contact node")
    stat = sub.add_parser("stationarity", parents=[common], help="M-stationarity certificate")
    stat.add_argument("--report", type=pathlib.Path, help="report.json whose final parameters are checked")
    oracle = sub.add_parser("oracle-nc", parents=[common], help="normal-cone oracle comparison")
    oracle.add_argument("--steps", default="1,2,3", help="comma-separated K values")
    oracle.add_argument("--base-points", type=int, default=50)
    oracle.add_argument("--queries", type=int, default=200)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.branch is not None:
        changes["branch"] = args.branch
    return dataclasses.replace(cfg, **changes) if changes else cfg


def out_folder(args: argparse.Namespace) -> pathlib.Path:
    folder = args.out if args.out is not None else output_root().joinpath(args.command)
    folder.mkdir(parents=True, exist_ok=True)
    return folder


def cmd_simulate(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    out = out_folder(args)
    mesh, partition, stiffness, ops = build_operators(cfg, args.mesh_cache)
    loading = build_loading(cfg, mesh, partition)
    params = planted_from_config(cfg, ops.n_z)
    traj = simulate(params, ops, loading, np.full(ops.n_z, cfg.adhesive["z0"]))
    write_trajectory_csv(traj, out.joinpath("trajectory.csv"))
    residuals = trajectory_residuals(traj, params, ops, stiffness, partition)
    write_json({k: float(v) for k, v in residuals.items()}, out.joinpath("residuals.json"))
    logger.info(f"Simulation residuals: {residuals}")
    if not args.no_plots:
        emit_plots(None, out, mesh, partition, ops.reduced, traj)


def cmd_identify(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    out = out_folder(args)
    experiment = build_experiment(cfg, args.mesh_cache)
    plan = cfg.phase_plan()
    if args.phases:
        plan = plan.select(parse_phase_numbers(args.phases))
    report = run_identification(plan, experiment.problem, cfg.seed, planted=experiment.planted,
                                max_workers=worker_count())
    final = report.final_params()
    traj = simulate(final, experiment.ops, experiment.loading, experiment.z0)
    emit_results(report, out, traj)
    pd.set_option("display.width", 120)
    logger.info(f"Summary:\n{report.summary_table()}")
    if not args.no_plots:
        emit_plots(report, out, experiment.mesh, experiment.partition, experiment.ops.reduced, traj)


def cmd_grad_check(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    out = out_folder(args)
    experiment = build_experiment(cfg, args.mesh_cache)
    problem = experiment.problem
    if args.per_node:
        problem = problem.with_grouping(Grouping.per_node(experiment.ops.n_z))
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    frames = []
    for point in range(args.points):
        x = rng.uniform(0.05, 0.95, size=problem.dim)
        frame = gradient_check(problem, x, h=cfg.tolerances["fd_step"])
        frame.insert(0, "point", point)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(out.joinpath("grad_check.csv"), index=False, float_format="%.17g")


def cmd_stationarity(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    out = out_folder(args)
    experiment = build_experiment(cfg, args.mesh_cache)
    if args.report is not None:
        params = load_report(args.report).final_params()
    elif experiment.planted is not None:
        params = experiment.planted
    else:
        params = experiment.problem.params(np.full(experiment.problem.dim, 0.5))
    traj = simulate(params, experiment.ops, experiment.loading, experiment.z0)
    _, u_star, z_star = tracking_terms(traj, experiment.ops, experiment.objective)
    lo, hi = experiment.problem.bounds.vectors(params.grouping)
    report = check_M_stationarity(params, traj, experiment.ops, u_star, z_star, lo, hi,
                                  tol=cfg.tolerances["stationarity"], budget=cfg.tolerances["branch_budget"])
    write_json(report.certificate(), out.joinpath("stationarity.json"))


def cmd_oracle(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    out = out_folder(args)
    steps = parse_phase_numbers(args.steps)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    frame = compare_with_sampling(rng, steps, args.base_points, args.queries,
                                  cone_tol=cfg.tolerances["cone"])
    frame.to_csv(out.joinpath("oracle_nc.csv"), index=False)
    write_json({"queries": int(len(frame)), "agreement": float(frame["agree"].mean()) if len(frame) else 1.0},
               out.joinpath("oracle_nc.json"))


COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "grad-check": cmd_grad_check,
    "stationarity": cmd_stationarity,
    "oracle-nc": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        configure_logging(args.log_level)
    logger.info(f"STARTING delamid {args.command}")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except DelamidError as e:
        logger.error(f"Configuration or input error: {e}")
        return EXIT_CONFIG
    logger.info(f"FINISHED delamid {args.command}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
