"""
scripts/cli_io/experiment.py

Turns an ExperimentConfig into the objects the subcommands work on: mesh and
condensed operators (optionally cached), the loading program, the desired
trajectories (synthetic or read from CSV) and the identification problem.
"""

import hashlib
import json
import pathlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from scripts.adhesive_model import FIELDS, AdhesiveEnergyConfig, AdhesiveParams, Grouping, assemble_z_quadratic
from scripts.cli_io.config import ExperimentConfig
from scripts.cli_io.results import read_trajectory_csv
from scripts.errors import ConfigValidationError, StaleCacheError
from scripts.fem_core import (
    DofPartition,
    ElasticityTensor,
    GeometrySpec,
    Mesh2D,
    assemble_stiffness,
    build_structured_mesh,
    load_operators,
    partition_dofs,
    save_operators,
    schur_reduce,
)
from scripts.forward_sim import LoadingProgram, SimulationOperators
from scripts.identification.objective import IdentificationProblem, ObjectiveConfig, ParameterBounds
from scripts.identification.synthetic import LoadingSpec, loading_schedule, planted_params, synthetic_data
from utils.logger import logger


@dataclass
class Experiment:
    mesh: Mesh2D
    partition: DofPartition
    ops: SimulationOperators
    loading: LoadingProgram
    z0: np.ndarray
    objective: ObjectiveConfig
    problem: IdentificationProblem
    planted: Optional[AdhesiveParams] = None
    stiffness: Optional[object] = None


def operator_fingerprint(cfg: ExperimentConfig) -> str:
    """Digest of the mesh and material settings the condensed operators depend on."""
    text = json.dumps({"mesh": cfg.mesh, "material": cfg.material}, sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_operators(cfg: ExperimentConfig, mesh_cache: Optional[pathlib.Path] = None):
    """
    Mesh, partition, full stiffness (None when read from the cache) and forward operators.

    A cache built from other mesh or material settings is rebuilt and overwritten.
    """
    fingerprint = operator_fingerprint(cfg)
    cached = None
    if mesh_cache is not None and pathlib.Path(mesh_cache).exists():
        try:
            cached = load_operators(mesh_cache, fingerprint)
        except StaleCacheError as exc:
            logger.warning(f"{exc}; rebuilding it")
    if cached is not None:
        mesh, partition, reduced = cached
        stiffness = None
    else:
        m, mat = cfg.mesh, cfg.material
        geometry = GeometrySpec(width=m["width"], height=m["height"], contact_nodes=m["contact_nodes"],
                                loading_edge=m["loading_edge"])
        mesh = build_structured_mesh(m["nx"], m["ny"], geometry)
        elast = ElasticityTensor(mat["young_modulus"], mat["poisson_ratio"], plane=mat["plane"])
        stiffness = assemble_stiffness(mesh, elast, mat["thickness"])
        partition = partition_dofs(mesh)
        reduced = schur_reduce(stiffness, partition)
        if mesh_cache is not None:
            save_operators(mesh_cache, mesh, partition, reduced, fingerprint)
    a = cfg.adhesive
    surface = assemble_z_quadratic(AdhesiveEnergyConfig(a["a"], a["c"], a["epsilon"], a["mass"]), mesh)
    ops = SimulationOperators(reduced=reduced, surface=surface, normal_indices=partition.normal_indices(),
                              tol=cfg.tolerances["qp"])
    return mesh, partition, stiffness, ops


def build_loading(cfg: ExperimentConfig, mesh: Mesh2D, partition: DofPartition) -> LoadingProgram:
    spec = LoadingSpec(**cfg.loading)
    return loading_schedule(mesh, partition, spec)


def build_bounds(cfg: ExperimentConfig) -> ParameterBounds:
    return ParameterBounds.from_dict(cfg.bounds)


def build_experiment(cfg: ExperimentConfig, mesh_cache: Optional[pathlib.Path] = None) -> Experiment:
    """
    Everything an identification run needs.

    With objective.data set the desired trajectories come from that CSV;
    otherwise planted per-node parameters are simulated.
    """
    mesh, partition, stiffness, ops = build_operators(cfg, mesh_cache)
    loading = build_loading(cfg, mesh, partition)
    z0 = np.full(ops.n_z, cfg.adhesive["z0"])
    o = cfg.objective
    planted = None
    data_path = cfg.data_path()
    if data_path is not None:
        u_d, z_d = read_trajectory_csv(data_path)
        check_desired_shape(u_d, z_d, ops.n_z, loading.steps, data_path)
        objective = ObjectiveConfig(u_desired=u_d, z_desired=z_d, zeta=o["zeta"], tau=loading.tau)
        logger.info(f"Desired trajectories read from {data_path}")
    else:
        planted = planted_from_config(cfg, ops.n_z)
        objective = synthetic_data(ops, loading, z0, planted, zeta=o["zeta"], noise_u=o["noise_u"],
                                   noise_z=o["noise_z"], seed=cfg.seed, track_free=o["track_free"]).objective
    problem = IdentificationProblem(ops, loading, z0, objective, build_bounds(cfg), Grouping.uniform(ops.n_z),
                                    policy=cfg.branch, tikhonov_weight=o["tikhonov_weight"],
                                    enumerate_budget=cfg.tolerances["enumerate_budget"])
    return Experiment(mesh=mesh, partition=partition, ops=ops, loading=loading, z0=z0, objective=objective,
                      problem=problem, planted=planted, stiffness=stiffness)


def planted_from_config(cfg: ExperimentConfig, n_nodes: int) -> AdhesiveParams:
    """Per-node parameters drawn around the configured means."""
    means = [cfg.adhesive["means"][name] for name in FIELDS]
    return planted_params(n_nodes, means, cfg.adhesive["spread"], cfg.adhesive["seed"])


def check_desired_shape(u_desired: np.ndarray, z_desired: np.ndarray, n_nodes: int, steps: int,
                        source: pathlib.Path) -> None:
    """
    Raises:
        ConfigValidationError: if the desired trajectories do not match the mesh or the loading program.
    """
    violations = []
    if z_desired.shape[1] != n_nodes:
        violations.append(f"objective.data: {source} has {z_desired.shape[1]} contact nodes, the mesh has {n_nodes}")
    if z_desired.shape[0] != steps + 1:
        violations.append(f"objective.data: {source} has {z_desired.shape[0]} instants, "
                          f"the loading program needs {steps + 1}")
    if violations:
        raise ConfigValidationError(violations)
