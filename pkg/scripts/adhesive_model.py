"""
scripts/adhesive_model.py

Adhesive-surface quantities on the contact boundary:

- Grouping: which contact nodes share a parameter slot.
- AdhesiveParams: the (alpha_F, kappa_N, kappa_T) slot values.
- the z-weighted elastic coupling A~(pi, z) on the contact DOFs,
- the z-quadratic matrix B (cohesive energy plus surface-gradient term),
- the z-linear coefficient b(pi, u) and its Jacobian in u.

All lengths are in meters; alpha_F and the h coefficients in J/m^2,
kappa_N and kappa_T in Pa/m, epsilon in J.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from scripts.errors import (
    DomainError,
    IncompatibleGroupingError,
    InvalidParameterError,
)
from scripts.fem_core import Mesh2D

FIELDS = ("alpha_f", "kappa_n", "kappa_t")
Z_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Parameter grouping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grouping:
    """
    Assignment of each contact node to a parameter slot.

    `labels[i]` is the slot of contact node i; slots are numbered 0..n_slots-1
    in order of first appearance along the boundary.
    """
    labels: Tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise InvalidParameterError("A grouping needs at least one contact node.")
        slots = sorted(set(self.labels))
        if slots != list(range(len(slots))):
            raise InvalidParameterError(f"Slot labels must be 0..n-1 without gaps, got {slots}.")

    @classmethod
    def uniform(cls, n_nodes: int) -> "Grouping":
        return cls(tuple([0] * n_nodes))

    @classmethod
    def per_node(cls, n_nodes: int) -> "Grouping":
        return cls(tuple(range(n_nodes)))

    @classmethod
    def blocks(cls, n_nodes: int, size: int) -> "Grouping":
        """Consecutive nodes in groups of `size` (the last group may be shorter)."""
        if size < 1:
            raise InvalidParameterError(f"Block size must be at least 1, got {size}.")
        return cls(tuple(i // size for i in range(n_nodes)))

    @classmethod
    def from_spec(cls, spec, n_nodes: int) -> "Grouping":
        """Build from a config value: "uniform", "per_node" or a positive block size."""
        if spec == "uniform":
            return cls.uniform(n_nodes)
        if spec == "per_node":
            return cls.per_node(n_nodes)
        if isinstance(spec, int) and not isinstance(spec, bool):
            return cls.blocks(n_nodes, spec)
        raise InvalidParameterError(
            f"Grouping must be 'uniform', 'per_node' or a block size, got {spec!r}.")

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def n_slots(self) -> int:
        return max(self.labels) + 1

    def prolongation(self) -> np.ndarray:
        """(n_nodes x n_slots) 0/1 matrix mapping slot values to node values."""
        P = np.zeros((self.n_nodes, self.n_slots))
        P[np.arange(self.n_nodes), self.labels] = 1.0
        return P

    def is_refined_by(self, other: "Grouping") -> bool:
        """True if every slot of `other` lies inside a single slot of this grouping."""
        if other.n_nodes != self.n_nodes:
            return False
        parent = {}
        for coarse, fine in zip(self.labels, other.labels):
            if parent.setdefault(fine, coarse) != coarse:
                return False
        return True

    def coarse_slot_of(self, fine: "Grouping") -> np.ndarray:
        """For each slot of the finer grouping, the slot of this grouping containing it."""
        if not self.is_refined_by(fine):
            raise IncompatibleGroupingError(
                f"Grouping with {fine.n_slots} slots does not refine the one with {self.n_slots} slots.")
        mapping = np.zeros(fine.n_slots, dtype=int)
        for coarse, slot in zip(self.labels, fine.labels):
            mapping[slot] = coarse
        return mapping


@dataclass(frozen=True)
class AdhesiveParams:
    """
    Adhesive parameters per slot. The parameter vector pi stacks the three
    fields: pi = (alpha_F[slots], kappa_N[slots], kappa_T[slots]), so L = 3 * n_slots.
    """
    alpha_f: np.ndarray
    kappa_n: np.ndarray
    kappa_t: np.ndarray
    grouping: Grouping

    def __post_init__(self):
        for name in FIELDS:
            values = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, values)
            if values.shape != (self.grouping.n_slots,):
                raise InvalidParameterError(
                    f"{name} must have {self.grouping.n_slots} entries, got shape {values.shape}.")
            if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
                raise InvalidParameterError(f"{name} must be finite and strictly positive, got {values}.")

    @classmethod
    def from_vector(cls, vector: Sequence[float], grouping: Grouping) -> "AdhesiveParams":
        vector = np.asarray(vector, dtype=float)
        n = grouping.n_slots
        if vector.shape != (3 * n,):
            raise InvalidParameterError(f"Parameter vector must have length {3 * n}, got {vector.shape}.")
        return cls(vector[:n], vector[n:2 * n], vector[2 * n:], grouping)

    @classmethod
    def uniform(cls, alpha_f: float, kappa_n: float, kappa_t: float, n_nodes: int) -> "AdhesiveParams":
        return cls(np.array([alpha_f]), np.array([kappa_n]), np.array([kappa_t]), Grouping.uniform(n_nodes))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.alpha_f, self.kappa_n, self.kappa_t])

    @property
    def size(self) -> int:
        return 3 * self.grouping.n_slots

    def per_node(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(alpha_F, kappa_N, kappa_T) expanded to one value per contact node."""
        P = self.grouping.prolongation()
        return P @ self.alpha_f, P @ self.kappa_n, P @ self.kappa_t

    def pull_back(self, node_gradient: np.ndarray) -> np.ndarray:
        """
        Map a gradient with respect to per-node values, shape (3, n_nodes) in
        FIELDS order, to a gradient with respect to the slot vector.
        """
        P = self.grouping.prolongation()
        return np.concatenate([P.T @ np.asarray(node_gradient[f]) for f in range(3)])


def lift_params(params: AdhesiveParams, fine: Grouping) -> AdhesiveParams:
    """Piecewise-constant lift of slot values onto a finer grouping."""
    mapping = params.grouping.coarse_slot_of(fine)
    return AdhesiveParams(params.alpha_f[mapping], params.kappa_n[mapping],
                          params.kappa_t[mapping], fine)


# ---------------------------------------------------------------------------
# Surface quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdhesiveEnergyConfig:
    """
    Cohesive energy h(z) = a/2 z^2 + c z and surface-gradient weight epsilon.

    `mass` selects the surface mass used for the a-term of B: "lumped" (default)
    or "consistent".
    """
    a: float = 1.0
    c: float = -1.0
    epsilon: float = 1.0
    mass: str = "lumped"

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidParameterError(f"h coefficient a must be positive, got {self.a}.")
        if self.epsilon < 0:
            raise InvalidParameterError(f"epsilon must be non-negative, got {self.epsilon}.")
        if self.mass not in ("lumped", "consistent"):
            raise InvalidParameterError(f"mass must be 'lumped' or 'consistent', got '{self.mass}'.")


@dataclass(frozen=True)
class SurfaceOperators:
    """B, the lumped node measures s_i and the contact edge lengths."""
    B: np.ndarray
    measures: np.ndarray
    edge_lengths: np.ndarray
    h_linear: float

    @property
    def n_nodes(self) -> int:
        return self.measures.size


def contact_edge_lengths(mesh: Mesh2D) -> np.ndarray:
    """Lengths of the edges between consecutive contact nodes."""
    pts = mesh.nodes[mesh.contact_nodes]
    return np.linalg.norm(np.diff(pts, axis=0), axis=1)


def surface_measures(edge_lengths: np.ndarray) -> np.ndarray:
    """s_i: half the length of each contact edge adjacent to node i."""
    s = np.zeros(edge_lengths.size + 1)
    s[:-1] += 0.5 * edge_lengths
    s[1:] += 0.5 * edge_lengths
    return s


def assemble_contact_coupling(params: AdhesiveParams, z: np.ndarray, measures: np.ndarray) -> np.ndarray:
    """
    A~(pi, z) on the contact block in (u_N, u_T) node order.

    Parameters:
        params (AdhesiveParams): adhesive parameters.
        z (np.ndarray): delamination values per contact node, in [0, 1].
        measures (np.ndarray): lumped surface measures s_i.

    Returns:
        np.ndarray: diagonal matrix with (z_i kN_i s_i, z_i kT_i s_i) per node.

    Raises:
        DomainError: if any z entry is negative.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < -Z_TOLERANCE):
        raise DomainError(f"Delamination values must be non-negative, min is {z.min():.3e}.")
    _, kn, kt = params.per_node()
    diag = np.empty(2 * z.size)
    diag[0::2] = z * kn * measures
    diag[1::2] = z * kt * measures
    return np.diag(diag)


def assemble_z_quadratic(cfg: AdhesiveEnergyConfig, mesh: Mesh2D) -> SurfaceOperators:
    """
    B = a * (surface mass) + epsilon * (1D P1 stiffness along the contact boundary).

    The surface mass is diag(s) for lumped mass or the P1 consistent matrix
    l/6 [[2, 1], [1, 2]] per edge.
    """
    lengths = contact_edge_lengths(mesh)
    if lengths.size == 0:
        raise DomainError("The contact boundary needs at least one edge.")
    measures = surface_measures(lengths)
    m = measures.size
    mass = np.zeros((m, m))
    stiff = np.zeros((m, m))
    for e, ell in enumerate(lengths):
        idx = np.ix_([e, e + 1], [e, e + 1])
        stiff[idx] += (1.0 / ell) * np.array([[1.0, -1.0], [-1.0, 1.0]])
        if cfg.mass == "consistent":
            mass[idx] += ell / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    if cfg.mass == "lumped":
        mass = np.diag(measures)
    B = cfg.a * mass + cfg.epsilon * stiff
    return SurfaceOperators(B=0.5 * (B + B.T), measures=measures, edge_lengths=lengths, h_linear=cfg.c)


def split_contact(u_contact: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(u_N, u_T) node arrays from the interleaved contact vector."""
    u_contact = np.asarray(u_contact, dtype=float)
    return u_contact[0::2], u_contact[1::2]


def compute_b(params: AdhesiveParams, u_contact: np.ndarray, surface: SurfaceOperators) -> np.ndarray:
    """b_i = s_i (kN_i u_N,i^2 / 2 + kT_i u_T,i^2 / 2 - alpha_F,i + c)."""
    af, kn, kt = params.per_node()
    un, ut = split_contact(u_contact)
    return surface.measures * (0.5 * kn * un ** 2 + 0.5 * kt * ut ** 2 - af + surface.h_linear)


def b_jacobian(params: AdhesiveParams, u_contact: np.ndarray, surface: SurfaceOperators) -> np.ndarray:
    """d b / d u_C as an (M x N_C) matrix."""
    _, kn, kt = params.per_node()
    un, ut = split_contact(u_contact)
    m = un.size
    J = np.zeros((m, 2 * m))
    rows = np.arange(m)
    J[rows, 2 * rows] = surface.measures * kn * un
    J[rows, 2 * rows + 1] = surface.measures * kt * ut
    return J


def coupling_parameter_terms(params: AdhesiveParams, z: np.ndarray, u_contact: np.ndarray,
                             weights: np.ndarray, surface: SurfaceOperators) -> np.ndarray:
    """
    (d/d pi of A~(pi, z) u)^T w per node, shape (3, M) in FIELDS order.
    Only the kappa rows are non-zero.
    """
    un, ut = split_contact(u_contact)
    wn, wt = split_contact(weights)
    out = np.zeros((3, un.size))
    out[1] = surface.measures * z * un * wn
    out[2] = surface.measures * z * ut * wt
    return out


def b_parameter_terms(u_contact: np.ndarray, weights: np.ndarray, surface: SurfaceOperators) -> np.ndarray:
    """(d b / d pi)^T w per node, shape (3, M) in FIELDS order."""
    un, ut = split_contact(u_contact)
    s = surface.measures
    w = np.asarray(weights, dtype=float)
    return np.vstack([-s * w, 0.5 * s * un ** 2 * w, 0.5 * s * ut ** 2 * w])


def coupling_z_terms(params: AdhesiveParams, u_contact: np.ndarray, weights: np.ndarray,
                     surface: SurfaceOperators) -> np.ndarray:
    """(d/d z of A~(pi, z) u)^T w, one entry per contact node."""
    _, kn, kt = params.per_node()
    un, ut = split_contact(u_contact)
    wn, wt = split_contact(weights)
    return surface.measures * (kn * un * wn + kt * ut * wt)


def describe_params(params: AdhesiveParams) -> List[str]:
    """Human-readable one-liners of the slot means, used in log banners."""
    return [f"{name}: mean {np.mean(getattr(params, name)):.6g}" for name in FIELDS]
