"""
scripts/adjoint/residual_maps.py

Residual maps of the two step inclusions along a computed trajectory,

    p^k = (A_alpha + A~(pi, z^{k-1})) u^k + A_beta w^k
    q^k = B z^k + b(pi, u^k)

together with the transposed partial derivatives the adjoint sweep needs.
p^k does not depend on u^{k-1}, and q^k depends neither on u^{k-1} nor on
z^{k-1}, so those couplings are absent.
"""

from typing import Dict

import numpy as np

from scripts.adhesive_model import (
    AdhesiveParams,
    assemble_contact_coupling,
    b_jacobian,
    b_parameter_terms,
    compute_b,
    coupling_parameter_terms,
    coupling_z_terms,
)
from scripts.forward_sim import SimulationOperators, Trajectory


class ResidualMaps:
    """p^k, q^k and their transposed derivative actions for one trajectory."""

    def __init__(self, params: AdhesiveParams, ops: SimulationOperators, traj: Trajectory):
        self.params = params
        self.ops = ops
        self.traj = traj

    @property
    def steps(self) -> int:
        return self.traj.steps

    def hessian_u(self, k: int) -> np.ndarray:
        """d p^k / d u = A_alpha + A~(pi, z^{k-1})."""
        return self.ops.reduced.a_alpha + assemble_contact_coupling(
            self.params, self.traj.z[k - 1], self.ops.surface.measures)

    def p(self, k: int) -> np.ndarray:
        return self.hessian_u(k) @ self.traj.u[k] + self.ops.reduced.a_beta @ self.traj.loading.w[k]

    def q(self, k: int) -> np.ndarray:
        return self.ops.surface.B @ self.traj.z[k] + compute_b(self.params, self.traj.u[k], self.ops.surface)

    def p_u_T(self, k: int, beta: np.ndarray) -> np.ndarray:
        return self.hessian_u(k).T @ beta

    def p_ztilde_T(self, k: int, beta: np.ndarray) -> np.ndarray:
        """(d p^k / d z^{k-1})^T beta."""
        return coupling_z_terms(self.params, self.traj.u[k], beta, self.ops.surface)

    def p_pi_T(self, k: int, beta: np.ndarray) -> np.ndarray:
        """(d p^k / d pi)^T beta per node, shape (3, M)."""
        return coupling_parameter_terms(self.params, self.traj.z[k - 1], self.traj.u[k], beta,
                                        self.ops.surface)

    def q_z_T(self, delta: np.ndarray) -> np.ndarray:
        return self.ops.surface.B.T @ delta

    def q_u_jacobian(self, k: int) -> np.ndarray:
        return b_jacobian(self.params, self.traj.u[k], self.ops.surface)

    def q_u_T(self, k: int, delta: np.ndarray) -> np.ndarray:
        return self.q_u_jacobian(k).T @ delta

    def q_pi_T(self, k: int, delta: np.ndarray) -> np.ndarray:
        """(d q^k / d pi)^T delta per node, shape (3, M)."""
        return b_parameter_terms(self.traj.u[k], delta, self.ops.surface)

    def consistency(self) -> Dict[str, float]:
        """
        Largest relative gap between the residual maps and the stored QP
        multipliers: at a solution p^k equals the contact multiplier and q^k
        the delamination multiplier.
        """
        worst_p, worst_q = 0.0, 0.0
        for k in range(1, self.steps + 1):
            cs, zs = self.traj.contact_solutions[k - 1], self.traj.z_solutions[k - 1]
            c_scale = np.max(np.abs(self.ops.reduced.a_beta @ self.traj.loading.w[k]), initial=0.0) + 1.0
            b_scale = np.max(np.abs(compute_b(self.params, self.traj.u[k], self.ops.surface)), initial=0.0) + 1.0
            worst_p = max(worst_p, float(np.max(np.abs(self.p(k) - cs.multipliers), initial=0.0)) / c_scale)
            worst_q = max(worst_q, float(np.max(np.abs(self.q(k) - zs.multipliers), initial=0.0)) / b_scale)
        return {"p": worst_p, "q": worst_q}
