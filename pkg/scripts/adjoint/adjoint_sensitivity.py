"""
scripts/adjoint/adjoint_sensitivity.py

Backward adjoint sweep through the recorded trajectory and assembly of a
subgradient of the reduced tracking objective.

For k = K, ..., 1 the sweep solves

    -u*^k = alpha^k - (d_u p^k)^T beta^k - (d_u q^k)^T delta^k
    -z*^k = gamma^k - (d_z q^k)^T delta^k - (d_z~ p^{k+1})^T beta^{k+1}

with beta^{K+1} = delta^{K+1} = 0, where (alpha, beta) is taken from the graph
normal cone of the contact constraint and (gamma, delta) from the normal cone
to the graph of the delamination step map along a selected branch. The
subgradient is then

    g = -sum_k (d_pi p^k)^T beta^k - sum_k (d_pi q^k)^T delta^k.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from scripts.adhesive_model import AdhesiveParams, compute_b
from scripts.adjoint.piece_cones import (
    biactive_positions,
    branch_word,
    classify_piece,
    virtual_start,
)
from scripts.adjoint.residual_maps import ResidualMaps
from scripts.errors import AdjointError, InvalidBranchError
from scripts.forward_sim import SimulationOperators, Trajectory
from scripts.qp_solver import BIACTIVE_FACTOR, INACTIVE
from utils.logger import logger

Site = Tuple[str, int, int]  # ("contact" | "z", step k (1-based), coordinate)


@dataclass(frozen=True)
class AdjointBundle:
    """
    Adjoint multipliers for k = 1..K (row k-1) and the branch they were taken from.

    mu and mu_tilde split gamma^k = mu^k + mu_tilde^k, where mu_tilde^k is the
    z_prev component contributed by step k + 1 (zero for k = K).
    """
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    mu: np.ndarray
    mu_tilde: np.ndarray
    z_branches: np.ndarray
    contact_free: np.ndarray
    overrides: Dict[Site, str] = field(default_factory=dict)

    def sign_products(self) -> np.ndarray:
        """alpha^k . beta^k per step; never positive on an admissible branch."""
        return np.einsum("ki,ki->k", self.alpha, self.beta)

    def is_zero(self) -> bool:
        return all(not np.any(getattr(self, name)) for name in ("alpha", "beta", "gamma", "delta"))


# ---------------------------------------------------------------------------
# Branch bookkeeping
# ---------------------------------------------------------------------------

def step_tolerances(traj: Trajectory, params: AdhesiveParams, ops: SimulationOperators, k: int) -> Tuple[float, float]:
    """(z tolerance, v tolerance) used to classify step k, matching the QP's activity thresholds."""
    b = compute_b(params, traj.u[k], ops.surface)
    z_tol = BIACTIVE_FACTOR * ops.tol * (np.max(np.abs(traj.z[k]), initial=0.0) + 1.0)
    v_tol = BIACTIVE_FACTOR * ops.tol * (np.max(np.abs(b), initial=0.0) + 1.0)
    return z_tol, v_tol


def trajectory_piece_words(traj: Trajectory, params: AdhesiveParams, ops: SimulationOperators) -> np.ndarray:
    """Piece index per step and z coordinate, shape (K, M)."""
    K, M = traj.steps, ops.n_z
    words = np.zeros((K, M), dtype=int)
    for k in range(1, K + 1):
        z_tol, v_tol = step_tolerances(traj, params, ops, k)
        v = -traj.z_solutions[k - 1].multipliers
        for j in range(M):
            words[k - 1, j] = classify_piece(traj.z[k - 1, j], traj.z[k, j], v[j], z_tol, v_tol)
    return words


def start_tolerance(ops: SimulationOperators) -> float:
    return BIACTIVE_FACTOR * ops.tol


def z_branches(traj: Trajectory, params: AdhesiveParams, ops: SimulationOperators, policy: str = "active",
               overrides: Optional[Dict[Site, str]] = None) -> np.ndarray:
    """Selected branch per step and z coordinate, shape (K, M)."""
    overrides = overrides or {}
    words = trajectory_piece_words(traj, params, ops)
    branches = np.zeros_like(words)
    for j in range(ops.n_z):
        choices = {k - 1: rule for (kind, k, coord), rule in overrides.items() if kind == "z" and coord == j}
        start = virtual_start(traj.z[0, j], start_tolerance(ops))
        branches[:, j] = branch_word(tuple(words[:, j]), start, policy, choices)
    return branches


def contact_free_sets(traj: Trajectory, ops: SimulationOperators, policy: str = "active",
                      overrides: Optional[Dict[Site, str]] = None) -> np.ndarray:
    """
    Boolean (K, N_C) mask of contact coordinates on which beta is solved for
    (alpha = 0 there); elsewhere beta = 0 and alpha absorbs the residual.
    """
    if policy not in ("active", "inactive"):
        raise InvalidBranchError(f"Branch policy must be 'active' or 'inactive', got '{policy}'.")
    overrides = overrides or {}
    K = traj.steps
    free = np.ones((K, ops.n_contact), dtype=bool)
    for k in range(1, K + 1):
        sol = traj.contact_solutions[k - 1]
        for d in ops.normal_indices:
            if sol.biactive[d]:
                rule = overrides.get(("contact", k, int(d)), policy)
                free[k - 1, d] = rule == "inactive"
            else:
                free[k - 1, d] = sol.activity[d] == INACTIVE
    return free


def biactive_sites(traj: Trajectory, params: AdhesiveParams, ops: SimulationOperators) -> List[Site]:
    """Every contact or z coordinate where the branch policy makes a difference."""
    sites: List[Site] = []
    for k in range(1, traj.steps + 1):
        sol = traj.contact_solutions[k - 1]
        sites.extend(("contact", k, int(d)) for d in ops.normal_indices if sol.biactive[d])
    words = trajectory_piece_words(traj, params, ops)
    for j in range(ops.n_z):
        sites.extend(("z", k + 1, j) for k in biactive_positions(words[:, j]))
    return sites


def enumerate_overrides(sites: List[Site], budget: int) -> Iterator[Dict[Site, str]]:
    """All active / inactive assignments of the given sites, at most `budget` of them."""
    combos = itertools.product(("active", "inactive"), repeat=len(sites))
    for rules in itertools.islice(combos, budget):
        yield dict(zip(sites, rules))


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

def _solve_block(matrix: np.ndarray, rhs: np.ndarray, mask: np.ndarray, what: str, k: int) -> np.ndarray:
    out = np.zeros_like(rhs)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return out
    try:
        out[idx] = cho_solve(cho_factor(matrix[np.ix_(idx, idx)]), rhs[idx])
    except (LinAlgError, ValueError) as e:
        raise AdjointError(f"{what} system at step {k} is singular: {e}")
    return out


def solve_adjoint(traj: Trajectory, params: AdhesiveParams, ops: SimulationOperators,
                  u_star: np.ndarray, z_star: np.ndarray, policy: str = "active",
                  overrides: Optional[Dict[Site, str]] = None) -> AdjointBundle:
    """
    Backward sweep k = K..1.

    Parameters:
        traj (Trajectory): forward solution with its QP records.
        params (AdhesiveParams): parameters the trajectory was computed with.
        ops (SimulationOperators): operators used for the trajectory.
        u_star (np.ndarray): objective gradients in u^k, shape (K, N_C).
        z_star (np.ndarray): objective gradients in z^k, shape (K, M).
        policy (str): "active" or "inactive" choice at biactive coordinates.
        overrides (dict, optional): per-site policy, keyed by ("contact"|"z", k, coordinate).

    Returns:
        AdjointBundle: multipliers for k = 1..K.

    Raises:
        AdjointError: if a restricted system cannot be factorized.
    """
    K, M, N = traj.steps, ops.n_z, ops.n_contact
    maps = ResidualMaps(params, ops, traj)
    branches = z_branches(traj, params, ops, policy, overrides)
    contact_free = contact_free_sets(traj, ops, policy, overrides)
    B = ops.surface.B

    alpha, beta = np.zeros((K, N)), np.zeros((K, N))
    gamma, delta = np.zeros((K, M)), np.zeros((K, M))
    mu, mu_tilde = np.zeros((K, M)), np.zeros((K, M))

    beta_next = np.zeros(N)
    mu_tilde_next = np.zeros(M)
    for k in range(K, 0, -1):
        s = branches[k - 1]
        free_z = s == 3
        upper_z = s == 1
        r = maps.p_ztilde_T(k + 1, beta_next) if k < K else np.zeros(M)

        rhs_z = z_star[k - 1] + mu_tilde_next - r
        d = _solve_block(B, rhs_z, free_z, "delamination adjoint", k)
        m = np.where(free_z, 0.0, B @ d - z_star[k - 1] - mu_tilde_next + r)

        H = maps.hessian_u(k)
        rhs_u = u_star[k - 1] - maps.q_u_T(k, d)
        b_k = _solve_block(H, rhs_u, contact_free[k - 1], "contact adjoint", k)
        a_k = np.where(contact_free[k - 1], 0.0, H @ b_k - rhs_u)

        alpha[k - 1], beta[k - 1] = a_k, b_k
        delta[k - 1], mu[k - 1], mu_tilde[k - 1] = d, m, mu_tilde_next
        gamma[k - 1] = m + mu_tilde_next

        beta_next = b_k
        mu_tilde_next = np.where(upper_z, -m, 0.0)

    logger.trace(f"adjoint sweep over {K} steps done, |beta|max {np.max(np.abs(beta), initial=0.0):.3e}")
    return AdjointBundle(alpha=alpha, beta=beta, gamma=gamma, delta=delta, mu=mu, mu_tilde=mu_tilde,
                         z_branches=branches, contact_free=contact_free, overrides=dict(overrides or {}))


def subgradient(params: AdhesiveParams, traj: Trajectory, bundle: AdjointBundle,
                ops: SimulationOperators) -> np.ndarray:
    """
    g = -sum_k (d_pi p^k)^T beta^k - sum_k (d_pi q^k)^T delta^k, pulled back to
    the parameter slots. The tracking objective has no explicit pi term.
    """
    maps = ResidualMaps(params, ops, traj)
    nodes = np.zeros((3, ops.n_z))
    for k in range(1, traj.steps + 1):
        nodes -= maps.p_pi_T(k, bundle.beta[k - 1])
        nodes -= maps.q_pi_T(k, bundle.delta[k - 1])
    return params.pull_back(nodes)


def adjoint_residuals(bundle: AdjointBundle, traj: Trajectory, params: AdhesiveParams,
                      ops: SimulationOperators, u_star: np.ndarray, z_star: np.ndarray) -> Dict[str, float]:
    """
    Residuals of both adjoint equations and of the branch structure:
    u_equation, z_equation, sign (largest alpha^k . beta^k), contact_complementarity
    (largest |alpha * beta| entry).
    """
    maps = ResidualMaps(params, ops, traj)
    K = traj.steps
    worst_u, worst_z = 0.0, 0.0
    for k in range(1, K + 1):
        lhs_u = bundle.alpha[k - 1] - maps.p_u_T(k, bundle.beta[k - 1]) - maps.q_u_T(k, bundle.delta[k - 1])
        coupling = maps.p_ztilde_T(k + 1, bundle.beta[k]) if k < K else 0.0
        lhs_z = bundle.gamma[k - 1] - maps.q_z_T(bundle.delta[k - 1]) - coupling
        scale_u = np.max(np.abs(u_star[k - 1]), initial=0.0) + 1.0
        scale_z = np.max(np.abs(z_star[k - 1]), initial=0.0) + 1.0
        worst_u = max(worst_u, float(np.max(np.abs(lhs_u + u_star[k - 1]))) / scale_u)
        worst_z = max(worst_z, float(np.max(np.abs(lhs_z + z_star[k - 1]))) / scale_z)
    return {
        "u_equation": worst_u,
        "z_equation": worst_z,
        "sign": float(np.max(bundle.sign_products(), initial=0.0)),
        "contact_complementarity": float(np.max(np.abs(bundle.alpha * bundle.beta), initial=0.0)),
    }
