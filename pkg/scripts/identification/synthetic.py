"""
scripts/identification/synthetic.py

Synthetic identification data: planted per-node parameters, a seeded loading
schedule for the loading edge (lift, shear and a small rotation) and the
desired trajectories produced by simulating the planted parameters, with
optional Gaussian noise.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from scripts.adhesive_model import AdhesiveParams, Grouping
from scripts.errors import InvalidParameterError
from scripts.fem_core import DofPartition, Mesh2D
from scripts.forward_sim import LoadingProgram, SimulationOperators, Trajectory, simulate
from scripts.identification.objective import ObjectiveConfig
from utils.logger import logger

SCHEDULES = ("ramp", "random")
DEFAULT_MEANS = (187.5, 1.5e11, 7.5e10)


@dataclass(frozen=True)
class LoadingSpec:
    """
    Loading of the Dirichlet edge: rigid lift (m), shear (m) and rotation (rad)
    about the edge centre, each growing monotonically from 0 to its maximum.
    """
    steps: int = 40
    tau: float = 1.0
    max_lift: float = 2.0e-4
    max_shear: float = 5.0e-5
    max_rotation: float = 1.0e-3
    schedule: str = "random"
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidParameterError(f"Loading needs at least one step, got {self.steps}.")
        if self.schedule not in SCHEDULES:
            raise InvalidParameterError(f"Schedule must be one of {SCHEDULES}, got '{self.schedule}'.")


def monotone_profile(rng: np.random.Generator, steps: int, schedule: str) -> np.ndarray:
    """Values 0 = p_0 <= p_1 <= ... <= p_K = 1."""
    if schedule == "ramp":
        return np.linspace(0.0, 1.0, steps + 1)
    increments = 0.5 + rng.uniform(size=steps)
    return np.concatenate([[0.0], np.cumsum(increments) / increments.sum()])


def loading_schedule(mesh: Mesh2D, partition: DofPartition, spec: LoadingSpec) -> LoadingProgram:
    """
    Dirichlet values for k = 0..K on the loading edge.

    A node at offset (dx, dy) from the edge centre moves by
    (shear - theta dy, lift + theta dx).
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lift = spec.max_lift * monotone_profile(rng, spec.steps, spec.schedule)
    shear = spec.max_shear * monotone_profile(rng, spec.steps, spec.schedule)
    theta = spec.max_rotation * monotone_profile(rng, spec.steps, spec.schedule)

    nodes = partition.dirichlet[0::2] // 2
    coords = mesh.nodes[nodes]
    offset = coords - coords.mean(axis=0)
    w = np.zeros((spec.steps + 1, partition.n_dirichlet))
    w[:, 0::2] = shear[:, None] - theta[:, None] * offset[None, :, 1]
    w[:, 1::2] = lift[:, None] + theta[:, None] * offset[None, :, 0]
    return LoadingProgram(w=w, tau=spec.tau)


def planted_params(n_nodes: int, means: Sequence[float] = DEFAULT_MEANS, spread: float = 0.1,
                   seed: int = 0) -> AdhesiveParams:
    """Per-node parameters drawn uniformly within +/- spread around the field means."""
    if not 0 <= spread < 1:
        raise InvalidParameterError(f"Spread must lie in [0, 1), got {spread}.")
    rng = np.random.Generator(np.random.PCG64(seed))
    fields = [m * (1.0 + spread * rng.uniform(-1.0, 1.0, size=n_nodes)) for m in means]
    return AdhesiveParams(*fields, grouping=Grouping.per_node(n_nodes))


@dataclass(frozen=True)
class SyntheticData:
    planted: AdhesiveParams
    trajectory: Trajectory
    objective: ObjectiveConfig


def synthetic_data(ops: SimulationOperators, loading: LoadingProgram, z0: np.ndarray,
                   planted: AdhesiveParams, zeta: float = 1.0e10, noise_u: float = 0.0,
                   noise_z: float = 0.0, seed: int = 0, track_free: bool = True,
                   trajectory: Optional[Trajectory] = None) -> SyntheticData:
    """
    Desired trajectories from a planted parameter set.

    Parameters:
        ops (SimulationOperators): forward operators.
        loading (LoadingProgram): Dirichlet loading.
        z0 (np.ndarray): initial delamination.
        planted (AdhesiveParams): parameters to recover.
        zeta (float): weight of the displacement terms.
        noise_u, noise_z (float): standard deviations of additive Gaussian noise.
        seed (int): noise seed.
        track_free (bool): also track the reconstructed free displacement.
        trajectory (Trajectory, optional): reuse an existing simulation of `planted`.
    """
    traj = simulate(planted, ops, loading, z0) if trajectory is None else trajectory
    rng = np.random.Generator(np.random.PCG64(seed))
    u_d = traj.u.copy()
    z_d = traj.z.copy()
    uf_d = traj.reconstruct_free(ops.reduced) if track_free else None
    if noise_u > 0:
        u_d += rng.normal(0.0, noise_u, size=u_d.shape)
        if uf_d is not None:
            uf_d = uf_d + rng.normal(0.0, noise_u, size=uf_d.shape)
    if noise_z > 0:
        z_d += rng.normal(0.0, noise_z, size=z_d.shape)
    delaminated = int(np.sum(traj.z[-1] <= 1e-8))
    logger.info(f"Synthetic data: {traj.steps} steps, {delaminated} of {ops.n_z} nodes fully delaminated at the end")
    cfg = ObjectiveConfig(u_desired=u_d, z_desired=z_d, uf_desired=uf_d, zeta=zeta, tau=loading.tau)
    return SyntheticData(planted=planted, trajectory=traj, objective=cfg)
