"""
scripts/identification/objective.py

Tracking objective of the identification problem and its evaluation with a
subgradient from the adjoint sweep.

    J(pi) = tau * sum_{k=1..K} [ zeta/2 |u_C^k - u_d,C^k|^2
                                 + zeta/2 |A_gamma u_C^k + A_delta w^k - u_d,F^k|^2
                                 + 1/2 |z^k - z_d^k|^2 ]  +  H(pi)

H is an optional Tikhonov term (weight 0 by default). Optimizers see the
parameters in normalized coordinates x = (pi - lo) / (hi - lo) in [0, 1]^L.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from scripts.adhesive_model import FIELDS, AdhesiveParams, Grouping
from scripts.adjoint.adjoint_sensitivity import (
    biactive_sites,
    enumerate_overrides,
    solve_adjoint,
    subgradient,
)
from scripts.errors import InvalidParameterError
from scripts.forward_sim import LoadingProgram, SimulationOperators, Trajectory, simulate
from utils.logger import logger

DEFAULT_BOUNDS = {
    "alpha_f": (100.0, 500.0),
    "kappa_n": (1.0e10, 1.0e12),
    "kappa_t": (1.0e10, 1.0e12),
}


@dataclass(frozen=True)
class ObjectiveConfig:
    """
    Desired trajectories and weights. Arrays hold rows k = 0..K; row 0 is not
    tracked. `uf_desired` may be None to drop the free-part term.
    """
    u_desired: np.ndarray
    z_desired: np.ndarray
    uf_desired: Optional[np.ndarray] = None
    zeta: float = 1.0e10
    tau: float = 1.0

    def __post_init__(self):
        if self.zeta < 0:
            raise InvalidParameterError(f"zeta must be non-negative, got {self.zeta}.")
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}.")
        if self.u_desired.shape[0] != self.z_desired.shape[0]:
            raise InvalidParameterError(
                f"Desired u and z cover {self.u_desired.shape[0]} and {self.z_desired.shape[0]} instants.")

    @property
    def steps(self) -> int:
        return self.u_desired.shape[0] - 1


@dataclass(frozen=True)
class ParameterBounds:
    """Box Pi: per-field (lower, upper) bounds shared by all slots."""
    lower: Tuple[float, float, float] = tuple(DEFAULT_BOUNDS[f][0] for f in FIELDS)
    upper: Tuple[float, float, float] = tuple(DEFAULT_BOUNDS[f][1] for f in FIELDS)

    def __post_init__(self):
        for name, lo, hi in zip(FIELDS, self.lower, self.upper):
            if not (0 < lo < hi):
                raise InvalidParameterError(f"Bounds for {name} must satisfy 0 < lower < upper, got [{lo}, {hi}].")

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence[float]]) -> "ParameterBounds":
        return cls(tuple(float(data[f][0]) for f in FIELDS), tuple(float(data[f][1]) for f in FIELDS))

    def vectors(self, grouping: Grouping) -> Tuple[np.ndarray, np.ndarray]:
        n = grouping.n_slots
        return np.repeat(np.asarray(self.lower, dtype=float), n), np.repeat(np.asarray(self.upper, dtype=float), n)

    def to_physical(self, x: np.ndarray, grouping: Grouping) -> AdhesiveParams:
        lo, hi = self.vectors(grouping)
        return AdhesiveParams.from_vector(lo + np.asarray(x, dtype=float) * (hi - lo), grouping)

    def to_normalized(self, params: AdhesiveParams) -> np.ndarray:
        lo, hi = self.vectors(params.grouping)
        return (params.as_vector() - lo) / (hi - lo)

    def contains(self, params: AdhesiveParams, slack: float = 1e-12) -> bool:
        x = self.to_normalized(params)
        return bool(np.all(x >= -slack) and np.all(x <= 1.0 + slack))


@dataclass(frozen=True)
class Evaluation:
    """Objective value, gradient in normalized coordinates and nonsmoothness diagnostics."""
    value: float
    gradient: np.ndarray
    biactive: int = 0
    disagreements: int = 0
    branch_gradients: List[np.ndarray] = field(default_factory=list)


def tracking_terms(traj: Trajectory, ops: SimulationOperators,
                   cfg: ObjectiveConfig) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Objective value and its partial gradients u*^k, z*^k for k = 1..K.

    Returns:
        tuple: (value, u_star of shape (K, N_C), z_star of shape (K, M)).
    """
    K = traj.steps
    if cfg.steps != K:
        raise InvalidParameterError(f"Desired data covers {cfg.steps} steps, trajectory has {K}.")
    du = traj.u[1:] - cfg.u_desired[1:]
    dz = traj.z[1:] - cfg.z_desired[1:]
    value = 0.5 * cfg.zeta * np.sum(du ** 2) + 0.5 * np.sum(dz ** 2)
    u_star = cfg.zeta * du
    if cfg.uf_desired is not None:
        duf = traj.reconstruct_free(ops.reduced)[1:] - cfg.uf_desired[1:]
        value += 0.5 * cfg.zeta * np.sum(duf ** 2)
        u_star = u_star + cfg.zeta * duf @ ops.reduced.a_gamma
    return float(cfg.tau * value), cfg.tau * u_star, cfg.tau * dz


def objective(params: AdhesiveParams, ops: SimulationOperators, loading: LoadingProgram,
              z0: np.ndarray, cfg: ObjectiveConfig) -> float:
    """Reduced objective J(pi) without a regularizer."""
    return tracking_terms(simulate(params, ops, loading, z0), ops, cfg)[0]


class IdentificationProblem:
    """
    The reduced objective over one parameter grouping, in normalized coordinates.

    Instances hold only immutable data and can be evaluated from several
    threads at once.
    """

    def __init__(self, ops: SimulationOperators, loading: LoadingProgram, z0: np.ndarray,
                 cfg: ObjectiveConfig, bounds: ParameterBounds, grouping: Grouping,
                 policy: str = "active", tikhonov_weight: float = 0.0,
                 reference: Optional[np.ndarray] = None, enumerate_budget: int = 64):
        if policy not in ("active", "inactive", "enumerate"):
            raise InvalidParameterError(f"Unknown branch policy '{policy}'.")
        if tikhonov_weight < 0:
            raise InvalidParameterError(f"Tikhonov weight must be non-negative, got {tikhonov_weight}.")
        self.ops = ops
        self.loading = loading
        self.z0 = np.asarray(z0, dtype=float)
        self.cfg = cfg
        self.bounds = bounds
        self.grouping = grouping
        self.policy = policy
        self.tikhonov_weight = tikhonov_weight
        lo, hi = bounds.vectors(grouping)
        self.scale = hi - lo
        # reference given as per-field values, normalized and repeated per slot
        if reference is None:
            self.x_reference = np.full(3 * grouping.n_slots, 0.5)
        else:
            ref = AdhesiveParams.from_vector(np.repeat(np.asarray(reference, dtype=float), grouping.n_slots), grouping)
            self.x_reference = bounds.to_normalized(ref)
        self.enumerate_budget = enumerate_budget

    @property
    def dim(self) -> int:
        return 3 * self.grouping.n_slots

    def with_grouping(self, grouping: Grouping) -> "IdentificationProblem":
        clone = IdentificationProblem.__new__(IdentificationProblem)
        clone.__dict__.update(self.__dict__)
        lo, hi = self.bounds.vectors(grouping)
        clone.grouping = grouping
        clone.scale = hi - lo
        clone.x_reference = np.repeat(self.x_reference.reshape(3, -1)[:, 0], grouping.n_slots)
        return clone

    def params(self, x: np.ndarray) -> AdhesiveParams:
        return self.bounds.to_physical(x, self.grouping)

    def regularizer(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        diff = np.asarray(x, dtype=float) - self.x_reference
        return 0.5 * self.tikhonov_weight * float(diff @ diff), self.tikhonov_weight * diff

    def simulate(self, x: np.ndarray) -> Trajectory:
        return simulate(self.params(x), self.ops, self.loading, self.z0)

    def value(self, x: np.ndarray) -> float:
        traj = self.simulate(x)
        return tracking_terms(traj, self.ops, self.cfg)[0] + self.regularizer(x)[0]

    def evaluate(self, x: np.ndarray) -> Evaluation:
        """
        Value and subgradient at x. With the "enumerate" policy every branch
        combination at biactive sites (up to the budget) is evaluated and the
        number of branches whose gradient differs from the default one is reported.
        """
        params = self.params(x)
        traj = simulate(params, self.ops, self.loading, self.z0)
        value, u_star, z_star = tracking_terms(traj, self.ops, self.cfg)
        reg_value, reg_grad = self.regularizer(x)
        default_policy = "active" if self.policy == "enumerate" else self.policy

        def gradient(overrides=None) -> np.ndarray:
            bundle = solve_adjoint(traj, params, self.ops, u_star, z_star, default_policy, overrides)
            return subgradient(params, traj, bundle, self.ops) * self.scale + reg_grad

        g = gradient()
        sites = biactive_sites(traj, params, self.ops)
        branch_gradients, disagreements = [], 0
        if self.policy == "enumerate" and sites:
            for overrides in enumerate_overrides(sites, self.enumerate_budget):
                other = gradient(overrides)
                branch_gradients.append(other)
                if np.linalg.norm(other - g) > 1e-8 * (1.0 + np.linalg.norm(g)):
                    disagreements += 1
            if disagreements:
                logger.debug(f"{disagreements} of {len(branch_gradients)} branches disagree at "
                             f"{len(sites)} biactive sites")
        return Evaluation(value=value + reg_value, gradient=g, biactive=len(sites),
                          disagreements=disagreements, branch_gradients=branch_gradients)
