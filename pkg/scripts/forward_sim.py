"""
scripts/forward_sim.py

Semi-implicit time stepping of the adhesive contact problem. Each step solves

    u^k = argmin 1/2 u^T (A_alpha + A~(pi, z^{k-1})) u + (A_beta w^k)^T u   s.t. u_N >= 0
    z^k = argmin 1/2 z^T B z + b(pi, u^k)^T z                            s.t. 0 <= z <= z^{k-1}

and records both QP solutions so the adjoint sweep can reuse the activity
information without re-solving.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from scripts.adhesive_model import (
    AdhesiveParams,
    SurfaceOperators,
    assemble_contact_coupling,
    compute_b,
)
from scripts.errors import DomainError, InvalidParameterError, NumericalError, SimulationError
from scripts.fem_core import DofPartition, ReducedOperators, free_block_residual
from scripts.qp_solver import (
    DEFAULT_TOL,
    BoxQP,
    ContactQP,
    QPSolution,
    kkt_residual,
    solve_box_qp,
    solve_contact_qp,
)
from utils.environment import worker_count
from utils.logger import logger


@dataclass(frozen=True)
class LoadingProgram:
    """
    Dirichlet values per time instant.

    `w` has shape (K + 1, N_D); row 0 is the initial load used for u^0, rows
    1..K drive the K steps. `tau` is the step length in seconds and only enters
    reports, the recursion itself is rate independent.
    """
    w: np.ndarray
    tau: float = 1.0

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        object.__setattr__(self, "w", w)
        if w.shape[0] < 2:
            raise InvalidParameterError(f"A loading program needs K >= 1 steps, got {w.shape[0] - 1}.")
        if not self.tau > 0:
            raise InvalidParameterError(f"Time step tau must be positive, got {self.tau}.")

    @property
    def steps(self) -> int:
        return self.w.shape[0] - 1

    def magnitude(self) -> np.ndarray:
        """Euclidean norm of the Dirichlet values per time instant."""
        return np.linalg.norm(self.w, axis=1)


@dataclass(frozen=True)
class SimulationOperators:
    """Everything a forward run needs besides the parameters and the loading."""
    reduced: ReducedOperators
    surface: SurfaceOperators
    normal_indices: np.ndarray
    tol: float = DEFAULT_TOL

    @property
    def n_contact(self) -> int:
        return self.reduced.a_alpha.shape[0]

    @property
    def n_z(self) -> int:
        return self.surface.n_nodes


@dataclass(frozen=True)
class Trajectory:
    """States u^0..u^K and z^0..z^K with the per-step QP records (index k-1 for step k)."""
    u: np.ndarray
    z: np.ndarray
    contact_solutions: List[QPSolution]
    z_solutions: List[QPSolution]
    loading: LoadingProgram

    @property
    def steps(self) -> int:
        return self.u.shape[0] - 1

    def reconstruct_free(self, operators: ReducedOperators) -> np.ndarray:
        """u_F^k for k = 0..K, shape (K + 1, N_F)."""
        return self.u @ operators.a_gamma.T + self.loading.w @ operators.a_delta.T

    def contact_multipliers(self) -> np.ndarray:
        return np.array([s.multipliers for s in self.contact_solutions])

    def z_multipliers(self) -> np.ndarray:
        return np.array([s.multipliers for s in self.z_solutions])

    def biactive_steps(self) -> List[int]:
        """Steps (1-based) where any contact or z coordinate is biactive."""
        flagged = []
        for k, (cs, zs) in enumerate(zip(self.contact_solutions, self.z_solutions), start=1):
            if np.any(cs.biactive) or np.any(zs.biactive):
                flagged.append(k)
        return flagged


def contact_problem(params: AdhesiveParams, ops: SimulationOperators, z_prev: np.ndarray,
                    w: np.ndarray) -> ContactQP:
    H = ops.reduced.a_alpha + assemble_contact_coupling(params, z_prev, ops.surface.measures)
    return ContactQP(H=H, c=ops.reduced.a_beta @ w, constrained=ops.normal_indices)


def delamination_problem(params: AdhesiveParams, ops: SimulationOperators, u: np.ndarray,
                         z_prev: np.ndarray) -> BoxQP:
    return BoxQP(H=ops.surface.B, c=compute_b(params, u, ops.surface),
                 lo=np.zeros_like(z_prev), hi=np.maximum(z_prev, 0.0))


def step(k: int, params: AdhesiveParams, u_prev: np.ndarray, z_prev: np.ndarray,
         ops: SimulationOperators, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, QPSolution, QPSolution]:
    """
    One semi-implicit step: contact QP with z frozen at z_prev, then the
    delamination QP on [0, z_prev] with the new displacement.

    Parameters:
        k (int): step index, used in error messages.
        params (AdhesiveParams): adhesive parameters.
        u_prev (np.ndarray): previous contact displacement, used as warm start.
        z_prev (np.ndarray): previous delamination vector in [0, 1].
        ops (SimulationOperators): condensed and surface operators.
        w (np.ndarray): Dirichlet values of this step.

    Returns:
        tuple: (u^k, z^k, contact solution, delamination solution).

    Raises:
        SimulationError: if either QP fails; carries k and the parameter vector.
    """
    try:
        contact = solve_contact_qp(contact_problem(params, ops, z_prev, w), tol=ops.tol, x0=u_prev)
        u = contact.x
        delam = solve_box_qp(delamination_problem(params, ops, u, z_prev), tol=ops.tol, x0=z_prev)
    except (NumericalError, DomainError) as e:
        raise SimulationError(str(e), step=k, params=params.as_vector()) from e
    z = np.clip(delam.x, 0.0, z_prev)
    return u, z, contact, delam


def simulate(params: AdhesiveParams, ops: SimulationOperators, loading: LoadingProgram,
             z0: np.ndarray, u0: Optional[np.ndarray] = None) -> Trajectory:
    """
    Run the K-step recursion from (u^0, z^0).

    u^0 defaults to the contact solution at the initial load with z frozen at z^0.
    The result is deterministic for fixed inputs.
    """
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (ops.n_z,) or np.any(z0 < 0.0) or np.any(z0 > 1.0):
        raise DomainError(f"z0 must lie in [0, 1]^{ops.n_z}, got shape {z0.shape}.")
    if loading.w.shape[1] != ops.reduced.a_beta.shape[1]:
        raise InvalidParameterError(
            f"Loading has {loading.w.shape[1]} Dirichlet values per step, operators expect "
            f"{ops.reduced.a_beta.shape[1]}.")

    if u0 is None:
        try:
            u0 = solve_contact_qp(contact_problem(params, ops, z0, loading.w[0]), tol=ops.tol).x
        except (NumericalError, DomainError) as e:
            raise SimulationError(str(e), step=0, params=params.as_vector()) from e

    us, zs = [np.asarray(u0, dtype=float)], [z0]
    contact_records, z_records = [], []
    for k in range(1, loading.steps + 1):
        u, z, contact, delam = step(k, params, us[-1], zs[-1], ops, loading.w[k])
        us.append(u)
        zs.append(z)
        contact_records.append(contact)
        z_records.append(delam)
        logger.trace(f"step {k}: min z {z.min():.4f}, max contact multiplier "
                     f"{np.max(contact.multipliers, initial=0.0):.3e}")
    return Trajectory(u=np.array(us), z=np.array(zs), contact_solutions=contact_records,
                      z_solutions=z_records, loading=loading)


def simulate_many(param_list: Sequence[AdhesiveParams], ops: SimulationOperators, loading: LoadingProgram,
                  z0: np.ndarray, max_workers: Optional[int] = None) -> List[Trajectory]:
    """Independent simulations on a thread pool; results keep the input order."""
    workers = worker_count() if max_workers is None else max_workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: simulate(p, ops, loading, z0), param_list))


def trajectory_residuals(traj: Trajectory, params: AdhesiveParams, ops: SimulationOperators,
                         stiffness=None, partition: Optional[DofPartition] = None) -> Dict[str, float]:
    """
    Invariant checks of a trajectory.

    Returns:
        dict: max_kkt (largest per-step relative KKT residual of both QPs),
        monotonicity (largest increase of any z entry), z_range (largest
        distance outside [0, 1]), min_normal (smallest normal displacement) and,
        when the full stiffness and partition are given, schur (largest relative
        free-block equilibrium residual of the reconstruction).
    """
    kkt = 0.0
    for k in range(1, traj.steps + 1):
        cp = contact_problem(params, ops, traj.z[k - 1], traj.loading.w[k]).as_box()
        zp = delamination_problem(params, ops, traj.u[k], traj.z[k - 1])
        kkt = max(kkt, kkt_residual(cp, traj.u[k]), kkt_residual(zp, traj.z[k]))
    report = {
        "max_kkt": kkt,
        "monotonicity": float(np.max(np.diff(traj.z, axis=0), initial=0.0)),
        "z_range": float(max(np.max(-traj.z, initial=0.0), np.max(traj.z - 1.0, initial=0.0))),
        "min_normal": float(np.min(traj.u[:, ops.normal_indices])),
    }
    if stiffness is not None and partition is not None:
        report["schur"] = max(
            free_block_residual(stiffness, partition, ops.reduced, traj.u[k], traj.loading.w[k])
            for k in range(traj.steps + 1))
    return report


def difference_quotients(params: AdhesiveParams, ops: SimulationOperators, loading: LoadingProgram,
                         z0: np.ndarray, direction: np.ndarray,
                         scales: Sequence[float] = (1e-3, 1e-4, 1e-5)) -> np.ndarray:
    """
    Difference quotients of the solution map along one direction.

    Each parameter is scaled by (1 + s d_i) with d the unit direction, and the
    quotient is ||S(pi') - S(pi)|| / s over the stacked states (u, z). Near a
    regular point the quotients stay bounded as s shrinks.

    Returns:
        np.ndarray: one quotient per entry of `scales`.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (params.size,) or not np.linalg.norm(d) > 0:
        raise InvalidParameterError(f"Direction must be a non-zero vector of length {params.size}.")
    d = d / np.linalg.norm(d)
    base = simulate(params, ops, loading, z0)
    state = np.concatenate([base.u.ravel(), base.z.ravel()])
    quotients = []
    for s in scales:
        moved = AdhesiveParams.from_vector(params.as_vector() * (1.0 + s * d), params.grouping)
        traj = simulate(moved, ops, loading, z0)
        quotients.append(np.linalg.norm(np.concatenate([traj.u.ravel(), traj.z.ravel()]) - state) / s)
    return np.array(quotients)
