"""
scripts/adjoint/stationarity.py

M-stationarity test for the identification problem:

    0 in grad_pi J - sum_k (d_pi p^k)^T beta^k - sum_k (d_pi q^k)^T delta^k + N_Pi(pi)

The multipliers come from the adjoint sweep. Branches are enumerated only over
biactive sites, up to a budget, and the smallest distance to the normal cone
of the box is reported together with the branch that produced it.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from scripts.adhesive_model import AdhesiveParams
from scripts.adjoint.adjoint_sensitivity import (
    Site,
    biactive_sites,
    enumerate_overrides,
    solve_adjoint,
    subgradient,
)
from scripts.forward_sim import SimulationOperators, Trajectory
from utils.logger import logger

DEFAULT_BRANCH_BUDGET = 2 ** 12
STATIONARY, NOT_VERIFIED = "stationary", "not verified"


def box_normal_residual(g: np.ndarray, x: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                        bound_tol: float = 1e-10) -> float:
    """
    Euclidean distance from -g to the normal cone of the box [lo, hi] at x.

    Interior coordinates need g_i = 0, a coordinate at its lower bound accepts
    g_i >= 0, one at its upper bound accepts g_i <= 0, a fixed one accepts anything.
    """
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), g.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), g.shape)
    width = np.maximum(hi - lo, 1.0)
    at_lo = x - lo <= bound_tol * width
    at_hi = hi - x <= bound_tol * width
    r = np.abs(g)
    r = np.where(at_lo & ~at_hi, np.maximum(-g, 0.0), r)
    r = np.where(at_hi & ~at_lo, np.maximum(g, 0.0), r)
    r = np.where(at_lo & at_hi, 0.0, r)
    return float(np.linalg.norm(r))


@dataclass
class StationarityReport:
    status: str
    residual: float
    gradient: np.ndarray
    overrides: Dict[Site, str] = field(default_factory=dict)
    sites: List[Site] = field(default_factory=list)
    branches_tried: int = 0
    truncated: bool = False

    @property
    def stationary(self) -> bool:
        return self.status == STATIONARY

    def certificate(self) -> dict:
        """JSON-ready description of the witnessing branch."""
        return {
            "status": self.status,
            "residual": float(self.residual),
            "gradient": [float(v) for v in self.gradient],
            "branches_tried": self.branches_tried,
            "truncated": self.truncated,
            "biactive_sites": [{"kind": kind, "step": k, "coordinate": j} for kind, k, j in self.sites],
            "branch": [{"kind": kind, "step": k, "coordinate": j, "rule": rule}
                       for (kind, k, j), rule in sorted(self.overrides.items())],
        }


def check_M_stationarity(params: AdhesiveParams, traj: Trajectory, ops: SimulationOperators,
                         u_star: np.ndarray, z_star: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                         tol: float = 1e-6, budget: int = DEFAULT_BRANCH_BUDGET,
                         explicit_gradient: Optional[np.ndarray] = None) -> StationarityReport:
    """
    Search the biactive branches for multipliers certifying M-stationarity.

    Parameters:
        params (AdhesiveParams): the candidate point pi.
        traj (Trajectory): S(pi).
        ops (SimulationOperators): operators the trajectory was computed with.
        u_star, z_star (np.ndarray): objective gradients in the states, (K, N_C) and (K, M).
        lo, hi (np.ndarray): bounds of the parameter slots.
        tol (float): accepted residual, measured in coordinates scaled to [0, 1].
        budget (int): cap on the number of branch combinations.
        explicit_gradient (np.ndarray, optional): grad_pi J of a regularizer, zero when omitted.

    Returns:
        StationarityReport: best residual found; "not verified" when no branch
        within the budget gets below tol.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    scale = hi - lo
    x = (params.as_vector() - lo) / scale
    explicit = np.zeros(params.size) if explicit_gradient is None else np.asarray(explicit_gradient, dtype=float)

    sites = biactive_sites(traj, params, ops)
    n_combos = 2 ** len(sites)
    truncated = n_combos > budget
    if truncated:
        logger.warning(f"{len(sites)} biactive sites give {n_combos} branches, checking the first {budget}.")

    best: Optional[StationarityReport] = None
    tried = 0
    for overrides in enumerate_overrides(sites, budget):
        tried += 1
        bundle = solve_adjoint(traj, params, ops, u_star, z_star, "active", overrides)
        g = explicit + subgradient(params, traj, bundle, ops)
        residual = box_normal_residual(g * scale, x, 0.0, 1.0)
        if best is None or residual < best.residual:
            best = StationarityReport(NOT_VERIFIED, residual, g, overrides, sites)
        if residual <= tol:
            break

    best.branches_tried = tried
    best.truncated = truncated
    if best.residual <= tol:
        best.status = STATIONARY
    logger.info(f"M-stationarity: {best.status}, residual {best.residual:.3e} after {tried} branch(es)")
    return best
