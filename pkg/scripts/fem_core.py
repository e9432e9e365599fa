r"""
scripts/fem_core.py

Finite-element core for the elastic body: a structured P1 triangle mesh of a
rectangle, the plane-strain (or plane-stress) stiffness matrix, the split of
the displacement DOFs into contact / free / Dirichlet blocks, and the static
condensation onto the contact boundary.

Typical use:

    mesh = build_structured_mesh(14, 20, GeometrySpec(width=0.13, height=0.19, contact_nodes=12))
    stiffness = assemble_stiffness(mesh, ElasticityTensor(70e9, 0.35))
    partition = partition_dofs(mesh)
    operators = schur_reduce(stiffness, partition)

The contact block is stored node by node in the local frame (u_N, u_T), where
u_N = -u.n is the gap opening for the outward normal n, so u_N >= 0 is the
non-penetration constraint.
"""

import pathlib
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from scripts.errors import (
    FactorizationError,
    InconsistentLabelingError,
    InvalidGeometryError,
    InvalidMaterialError,
    StaleCacheError,
)
from utils.logger import logger

LOADING_EDGES = ("top", "right", "left")
BOUNDARY_LABELS = ("contact", "dirichlet", "free")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometrySpec:
    """
    Rectangle [0, width] x [0, height] glued along part of its bottom edge.

    Parameters:
        width (float): extent along x in meters.
        height (float): extent along y in meters.
        contact_nodes (int, optional): number of bottom nodes, counted from the
            left corner, that form the contact boundary. None means the whole bottom edge.
        loading_edge (str, optional): "top", "right", "left" or None (no Dirichlet part).
    """
    width: float = 1.0
    height: float = 1.0
    contact_nodes: Optional[int] = None
    loading_edge: Optional[str] = "top"


@dataclass(frozen=True)
class Mesh2D:
    """Nodes, triangles and labelled boundary of a structured rectangle mesh."""
    nodes: np.ndarray                   # (n_nodes, 2) coordinates in meters
    triangles: np.ndarray               # (n_triangles, 3) counter-clockwise node indices
    boundary_edges: Dict[str, np.ndarray]  # label -> (n_edges, 2) node index pairs
    contact_nodes: np.ndarray           # node indices on the contact boundary, sorted by x
    contact_normals: np.ndarray         # (n_contact, 2) outward unit normals
    dirichlet_nodes: np.ndarray         # node indices on the loading edge
    nx: int
    ny: int

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_contact(self) -> int:
        return self.contact_nodes.size

    def signed_areas(self) -> np.ndarray:
        """Signed area of every triangle (positive for counter-clockwise ordering)."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True)
class ElasticityTensor:
    """Isotropic elasticity tensor from Young modulus E (Pa) and Poisson ratio nu."""
    young_modulus: float
    poisson_ratio: float
    plane: str = "strain"

    def __post_init__(self):
        if not self.young_modulus > 0:
            raise InvalidMaterialError(f"Young modulus must be positive, got {self.young_modulus}.")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise InvalidMaterialError(
                f"Poisson ratio must lie in (-1, 0.5), got {self.poisson_ratio}.")
        if self.plane not in ("strain", "stress"):
            raise InvalidMaterialError(f"plane must be 'strain' or 'stress', got '{self.plane}'.")

    def voigt_matrix(self) -> np.ndarray:
        """3x3 matrix mapping (e_xx, e_yy, 2 e_xy) to (s_xx, s_yy, s_xy)."""
        E, nu = self.young_modulus, self.poisson_ratio
        if self.plane == "stress":
            return E / (1.0 - nu ** 2) * np.array([[1.0, nu, 0.0],
                                                   [nu, 1.0, 0.0],
                                                   [0.0, 0.0, 0.5 * (1.0 - nu)]])
        lam = nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = E / (2.0 * (1.0 + nu))
        return np.array([[lam + 2.0 * mu, lam, 0.0],
                         [lam, lam + 2.0 * mu, 0.0],
                         [0.0, 0.0, mu]])


@dataclass(frozen=True)
class DofPartition:
    """
    Contact / free / Dirichlet split of the global displacement DOFs.

    Global DOF numbering is 2*node + component. `contact` lists the global DOFs of
    the contact nodes as (x, y) pairs; `rotation` maps those global components to
    the local (u_N, u_T) frame, node by node. A missing rotation means identity.
    """
    contact: np.ndarray
    free: np.ndarray
    dirichlet: np.ndarray
    rotation: Optional[np.ndarray] = None

    @property
    def n_contact(self) -> int:
        return self.contact.size

    @property
    def n_free(self) -> int:
        return self.free.size

    @property
    def n_dirichlet(self) -> int:
        return self.dirichlet.size

    @property
    def n_total(self) -> int:
        return self.n_contact + self.n_free + self.n_dirichlet

    def contact_rotation(self) -> np.ndarray:
        if self.rotation is None:
            return np.eye(self.n_contact)
        return self.rotation

    def normal_indices(self) -> np.ndarray:
        """Positions of the normal components inside the contact block."""
        return np.arange(0, self.n_contact, 2)


@dataclass(frozen=True)
class ReducedOperators:
    """
    Condensed operators on the contact block (local frame):

        A_alpha = A_CC - A_CF A_FF^-1 A_FC      A_gamma = -A_FF^-1 A_FC
        A_beta  = A_CD - A_CF A_FF^-1 A_FD      A_delta = -A_FF^-1 A_FD
    """
    a_alpha: np.ndarray
    a_beta: np.ndarray
    a_gamma: np.ndarray
    a_delta: np.ndarray
    metadata: Dict[str, float] = field(default_factory=dict)

    def reconstruct_free(self, u_contact: np.ndarray, w_dirichlet: np.ndarray) -> np.ndarray:
        """Free-block displacement u_F = A_gamma u_C + A_delta w_D."""
        return self.a_gamma @ u_contact + self.a_delta @ w_dirichlet


# ---------------------------------------------------------------------------
# Mesh
# ---------------------------------------------------------------------------

def build_structured_mesh(nx: int, ny: int, geometry: GeometrySpec) -> Mesh2D:
    """
    Build a conforming triangulation of the rectangle with nx x ny nodes.

    Each grid cell is split along its rising diagonal into two counter-clockwise
    triangles. Contact nodes are the first `contact_nodes` bottom nodes with
    outward normal (0, -1); Dirichlet nodes are those on the loading edge.

    Parameters:
        nx (int): number of nodes along x (>= 2).
        ny (int): number of nodes along y (>= 2).
        geometry (GeometrySpec): extents and boundary specification.

    Returns:
        Mesh2D: the labelled mesh.

    Raises:
        InvalidGeometryError: zero or negative extent, too few nodes, or a contact
            span longer than the bottom edge.
    """
    if nx < 2 or ny < 2:
        raise InvalidGeometryError(f"Need at least 2x2 nodes, got {nx}x{ny}.")
    if not (geometry.width > 0 and geometry.height > 0):
        raise InvalidGeometryError(
            f"Rectangle extents must be positive, got {geometry.width} x {geometry.height}.")
    n_contact = nx if geometry.contact_nodes is None else int(geometry.contact_nodes)
    if n_contact < 2 or n_contact > nx:
        raise InvalidGeometryError(
            f"Contact boundary needs between 2 and {nx} bottom nodes, got {n_contact}.")
    if geometry.loading_edge is not None and geometry.loading_edge not in LOADING_EDGES:
        raise InvalidGeometryError(
            f"Unknown loading edge '{geometry.loading_edge}', expected one of {LOADING_EDGES}.")

    xs = np.linspace(0.0, geometry.width, nx)
    ys = np.linspace(0.0, geometry.height, ny)
    X, Y = np.meshgrid(xs, ys)  # row j, column i -> node j*nx + i
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def node(i: int, j: int) -> int:
        return j * nx + i

    triangles = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            n0, n1, n2, n3 = node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)
            triangles.append((n0, n1, n3))
            triangles.append((n0, n3, n2))
    triangles = np.asarray(triangles, dtype=int)

    bottom = [(node(i, 0), node(i + 1, 0)) for i in range(nx - 1)]
    right = [(node(nx - 1, j), node(nx - 1, j + 1)) for j in range(ny - 1)]
    top = [(node(i + 1, ny - 1), node(i, ny - 1)) for i in range(nx - 1)]
    left = [(node(0, j + 1), node(0, j)) for j in range(ny - 1)]
    sides = {"bottom": bottom, "right": right, "top": top, "left": left}

    contact_edges = bottom[: n_contact - 1]
    dirichlet_edges = [] if geometry.loading_edge is None else sides[geometry.loading_edge]
    labelled = set(contact_edges) | set(dirichlet_edges)
    free_edges = [e for side in sides.values() for e in side if e not in labelled]

    contact_nodes = np.array([node(i, 0) for i in range(n_contact)], dtype=int)
    contact_normals = np.tile(np.array([0.0, -1.0]), (n_contact, 1))
    if dirichlet_edges:
        dirichlet_nodes = np.unique(np.asarray(dirichlet_edges, dtype=int).ravel())
    else:
        dirichlet_nodes = np.zeros(0, dtype=int)

    def as_array(edges) -> np.ndarray:
        return np.asarray(edges, dtype=int).reshape(-1, 2)

    mesh = Mesh2D(
        nodes=nodes,
        triangles=triangles,
        boundary_edges={"contact": as_array(contact_edges),
                        "dirichlet": as_array(dirichlet_edges),
                        "free": as_array(free_edges)},
        contact_nodes=contact_nodes,
        contact_normals=contact_normals,
        dirichlet_nodes=dirichlet_nodes,
        nx=nx,
        ny=ny,
    )
    logger.debug(f"Built {nx}x{ny} mesh: {mesh.n_nodes} nodes, {len(triangles)} triangles, "
                 f"{n_contact} contact nodes, {dirichlet_nodes.size} Dirichlet nodes")
    return mesh


# ---------------------------------------------------------------------------
# Stiffness
# ---------------------------------------------------------------------------

def element_stiffness(coords: np.ndarray, elast: ElasticityTensor, thickness: float = 1.0) -> np.ndarray:
    """
    Exact 6x6 stiffness of a linear triangle.

    Parameters:
        coords (np.ndarray): (3, 2) vertex coordinates, counter-clockwise.
        elast (ElasticityTensor): material.
        thickness (float): out-of-plane thickness.

    Returns:
        np.ndarray: element matrix in DOF order (u1x, u1y, u2x, u2y, u3x, u3y).
    """
    (x1, y1), (x2, y2), (x3, y3) = coords
    two_area = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    b = np.array([y2 - y3, y3 - y1, y1 - y2]) / two_area   # dN/dx
    c = np.array([x3 - x2, x1 - x3, x2 - x1]) / two_area   # dN/dy
    B = np.zeros((3, 6))
    B[0, 0::2] = b
    B[1, 1::2] = c
    B[2, 0::2] = c
    B[2, 1::2] = b
    return thickness * 0.5 * two_area * (B.T @ elast.voigt_matrix() @ B)


def assemble_stiffness(mesh: Mesh2D, elast: ElasticityTensor, thickness: float = 1.0) -> sp.csr_matrix:
    """
    Assemble the global stiffness matrix over all 2*n_nodes displacement DOFs.

    Returns:
        sp.csr_matrix: symmetric positive semidefinite matrix whose kernel on the
        unconstrained body is spanned by the three rigid-body modes.
    """
    n_dof = 2 * mesh.n_nodes
    rows, cols, vals = [], [], []
    for tri in mesh.triangles:
        ke = element_stiffness(mesh.nodes[tri], elast, thickness)
        dofs = np.column_stack([2 * tri, 2 * tri + 1]).ravel()
        rows.append(np.repeat(dofs, 6))
        cols.append(np.tile(dofs, 6))
        vals.append(ke.ravel())
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_dof, n_dof)).tocsr()
    # round-off in the element products can leave asymmetry at the last bit
    K = 0.5 * (K + K.T)
    return K.tocsr()


# ---------------------------------------------------------------------------
# Partition and condensation
# ---------------------------------------------------------------------------

def contact_frame(normal: np.ndarray) -> np.ndarray:
    """2x2 orthogonal map from global (u_x, u_y) to local (u_N, u_T) for an outward normal."""
    n = np.asarray(normal, dtype=float)
    t = np.array([-n[1], n[0]])
    return np.vstack([-n, t])


def partition_dofs(mesh: Mesh2D) -> DofPartition:
    """
    Split the displacement DOFs into contact, free and Dirichlet blocks.

    Raises:
        InconsistentLabelingError: no Dirichlet nodes, or a node that is both a
            contact node and a Dirichlet node.
    """
    if mesh.dirichlet_nodes.size == 0:
        raise InconsistentLabelingError(
            "The Dirichlet boundary is empty; the free block would not be positive definite.")
    shared = np.intersect1d(mesh.contact_nodes, mesh.dirichlet_nodes)
    if shared.size:
        raise InconsistentLabelingError(
            f"Nodes {shared.tolist()} lie on both the contact and the Dirichlet boundary.")

    contact = np.column_stack([2 * mesh.contact_nodes, 2 * mesh.contact_nodes + 1]).ravel()
    dirichlet = np.column_stack([2 * mesh.dirichlet_nodes, 2 * mesh.dirichlet_nodes + 1]).ravel()
    taken = np.zeros(2 * mesh.n_nodes, dtype=bool)
    taken[contact] = True
    taken[dirichlet] = True
    free = np.flatnonzero(~taken)

    rotation = np.zeros((contact.size, contact.size))
    for i, normal in enumerate(mesh.contact_normals):
        rotation[2 * i:2 * i + 2, 2 * i:2 * i + 2] = contact_frame(normal)
    return DofPartition(contact=contact, free=free, dirichlet=dirichlet, rotation=rotation)


def schur_reduce(stiffness, partition: DofPartition) -> ReducedOperators:
    """
    Condense the stiffness matrix onto the contact block.

    The free block is factorized once (sparse LU) and reused for both
    right-hand-side blocks.

    Parameters:
        stiffness: full symmetric stiffness (dense array or scipy sparse).
        partition (DofPartition): DOF split.

    Returns:
        ReducedOperators: A_alpha, A_beta, A_gamma, A_delta in the local contact frame.

    Raises:
        FactorizationError: if the free block is singular.
    """
    K = sp.csc_matrix(stiffness)
    C, F, D = partition.contact, partition.free, partition.dirichlet
    T = partition.contact_rotation()

    K_cc = T @ K[C][:, C].toarray() @ T.T
    K_cf = T @ K[C][:, F].toarray()
    K_cd = T @ K[C][:, D].toarray()
    K_fc = K[F][:, C].toarray() @ T.T
    K_fd = K[F][:, D].toarray()
    K_ff = K[F][:, F].tocsc()

    if partition.n_free:
        try:
            lu = spla.splu(K_ff)
        except RuntimeError as e:
            raise FactorizationError(f"Free block of size {partition.n_free} is singular: {e}")
        a_gamma = -lu.solve(K_fc) if K_fc.size else np.zeros_like(K_fc)
        a_delta = -lu.solve(K_fd) if K_fd.size else np.zeros_like(K_fd)
        if not (np.all(np.isfinite(a_gamma)) and np.all(np.isfinite(a_delta))):
            raise FactorizationError("Free block solve produced non-finite values.")
    else:
        a_gamma = np.zeros((0, C.size))
        a_delta = np.zeros((0, D.size))

    a_alpha = K_cc + K_cf @ a_gamma
    a_beta = K_cd + K_cf @ a_delta
    a_alpha = 0.5 * (a_alpha + a_alpha.T)
    logger.debug(f"Schur reduction: N_C={C.size}, N_F={F.size}, N_D={D.size}")
    return ReducedOperators(a_alpha=a_alpha, a_beta=a_beta, a_gamma=a_gamma, a_delta=a_delta,
                            metadata={"n_contact": C.size, "n_free": F.size, "n_dirichlet": D.size})


def reconstruct_displacement(mesh: Mesh2D, partition: DofPartition, operators: ReducedOperators,
                             u_contact: np.ndarray, w_dirichlet: np.ndarray) -> np.ndarray:
    """
    Full nodal displacement field (n_nodes, 2) from the contact block (local frame)
    and the Dirichlet values.
    """
    u = np.zeros(2 * mesh.n_nodes)
    u[partition.contact] = partition.contact_rotation().T @ u_contact
    u[partition.dirichlet] = w_dirichlet
    u[partition.free] = operators.reconstruct_free(u_contact, w_dirichlet)
    return u.reshape(-1, 2)


def free_block_residual(stiffness, partition: DofPartition, operators: ReducedOperators,
                        u_contact: np.ndarray, w_dirichlet: np.ndarray) -> float:
    """Relative F-block equilibrium residual of the reconstructed displacement."""
    K = sp.csr_matrix(stiffness)
    u = np.zeros(partition.n_total)
    u[partition.contact] = partition.contact_rotation().T @ u_contact
    u[partition.dirichlet] = w_dirichlet
    u[partition.free] = operators.reconstruct_free(u_contact, w_dirichlet)
    residual = (K @ u)[partition.free]
    scale = abs(K).dot(np.abs(u))[partition.free]
    return float(np.linalg.norm(residual) / max(np.linalg.norm(scale), np.finfo(float).tiny))


# ---------------------------------------------------------------------------
# Cache container
# ---------------------------------------------------------------------------
# The .npz container stores: nodes, triangles, edges_<label>, contact_nodes,
# contact_normals, dirichlet_nodes, grid (nx, ny), part_contact, part_free,
# part_dirichlet, part_rotation, a_alpha, a_beta, a_gamma, a_delta and the
# fingerprint of the settings it was built from (empty when none was given).

def save_operators(path: pathlib.Path, mesh: Mesh2D, partition: DofPartition,
                   operators: ReducedOperators, fingerprint: str = "") -> pathlib.Path:
    """Write mesh, partition and condensed operators to a compressed .npz file."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        "nodes": mesh.nodes,
        "triangles": mesh.triangles,
        "contact_nodes": mesh.contact_nodes,
        "contact_normals": mesh.contact_normals,
        "dirichlet_nodes": mesh.dirichlet_nodes,
        "grid": np.array([mesh.nx, mesh.ny]),
        "part_contact": partition.contact,
        "part_free": partition.free,
        "part_dirichlet": partition.dirichlet,
        "part_rotation": partition.contact_rotation(),
        "a_alpha": operators.a_alpha,
        "a_beta": operators.a_beta,
        "a_gamma": operators.a_gamma,
        "a_delta": operators.a_delta,
        "fingerprint": np.array(fingerprint),
    }
    for label in BOUNDARY_LABELS:
        arrays[f"edges_{label}"] = mesh.boundary_edges[label]
    with open(path, "wb") as handle:
        np.savez_compressed(handle, **arrays)
    logger.info(f"Cached mesh and operators to {path}")
    return path


def load_operators(path: pathlib.Path,
                   fingerprint: Optional[str] = None) -> Tuple[Mesh2D, DofPartition, ReducedOperators]:
    """
    Read a container written by save_operators.

    Raises:
        StaleCacheError: if fingerprint is given and differs from the stored one.
    """
    with np.load(pathlib.Path(path)) as data:
        stored = str(data["fingerprint"]) if "fingerprint" in data.files else ""
        if fingerprint is not None and stored != fingerprint:
            raise StaleCacheError(f"Operator cache {path} was built for other mesh or material settings")
        nx, ny = (int(v) for v in data["grid"])
        mesh = Mesh2D(
            nodes=data["nodes"],
            triangles=data["triangles"],
            boundary_edges={label: data[f"edges_{label}"] for label in BOUNDARY_LABELS},
            contact_nodes=data["contact_nodes"],
            contact_normals=data["contact_normals"],
            dirichlet_nodes=data["dirichlet_nodes"],
            nx=nx,
            ny=ny,
        )
        partition = DofPartition(contact=data["part_contact"], free=data["part_free"],
                                 dirichlet=data["part_dirichlet"], rotation=data["part_rotation"])
        operators = ReducedOperators(a_alpha=data["a_alpha"], a_beta=data["a_beta"],
                                     a_gamma=data["a_gamma"], a_delta=data["a_delta"])
    logger.info(f"Loaded cached mesh and operators from {path}")
    return mesh, partition, operators
