"""
scripts/adjoint/piece_cones.py

The graph of the delamination step map, one contact coordinate at a time.

Each step relates the triple (z_prev, z, v) with v = -q, and the admissible
triples form the union of eight relatively open convex pieces:

    1: z = z_prev > 0, v > 0       5: z_prev > 0, z = 0, v < 0
    2: z = z_prev > 0, v = 0       6: z_prev = z = 0, v < 0
    3: 0 < z < z_prev, v = 0       7: z_prev = z = v = 0
    4: z_prev > 0, z = v = 0       8: z_prev = z = 0, v > 0

Their closures are polyhedral cones written as lists of constraints a.x = 0
or a.x <= 0 on x = (z_prev, z, v). Normal cones are kept as generator pairs
(rays, lineality) and membership is decided by non-negative least squares.
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import nnls

from scripts.errors import ClassificationError, InvalidBranchError

PIECES = tuple(range(1, 9))
EQ, INEQ = "eq", "ineq"

CLOSED_PIECES: Dict[int, Tuple[Tuple[Tuple[float, float, float], str], ...]] = {
    1: (((-1.0, 1.0, 0.0), EQ), ((-1.0, 0.0, 0.0), INEQ), ((0.0, 0.0, -1.0), INEQ)),
    2: (((-1.0, 1.0, 0.0), EQ), ((-1.0, 0.0, 0.0), INEQ), ((0.0, 0.0, 1.0), EQ)),
    3: (((0.0, -1.0, 0.0), INEQ), ((-1.0, 1.0, 0.0), INEQ), ((0.0, 0.0, 1.0), EQ)),
    4: (((-1.0, 0.0, 0.0), INEQ), ((0.0, 1.0, 0.0), EQ), ((0.0, 0.0, 1.0), EQ)),
    5: (((-1.0, 0.0, 0.0), INEQ), ((0.0, 1.0, 0.0), EQ), ((0.0, 0.0, 1.0), INEQ)),
    6: (((1.0, 0.0, 0.0), EQ), ((0.0, 1.0, 0.0), EQ), ((0.0, 0.0, 1.0), INEQ)),
    7: (((1.0, 0.0, 0.0), EQ), ((0.0, 1.0, 0.0), EQ), ((0.0, 0.0, 1.0), EQ)),
    8: (((1.0, 0.0, 0.0), EQ), ((0.0, 1.0, 0.0), EQ), ((0.0, 0.0, -1.0), INEQ)),
}

# one point in the relative interior of every piece
REPRESENTATIVES: Dict[int, Tuple[float, float, float]] = {
    1: (1.0, 1.0, 1.0),
    2: (1.0, 1.0, 0.0),
    3: (1.0, 0.5, 0.0),
    4: (1.0, 0.0, 0.0),
    5: (1.0, 0.0, -1.0),
    6: (0.0, 0.0, -1.0),
    7: (0.0, 0.0, 0.0),
    8: (0.0, 0.0, 1.0),
}

# pieces whose closure contains the stratum s
NEIGHBOURS: Dict[int, FrozenSet[int]] = {
    1: frozenset({1}),
    2: frozenset({1, 2, 3}),
    3: frozenset({3}),
    4: frozenset({3, 4, 5}),
    5: frozenset({5}),
    6: frozenset({5, 6}),
    7: frozenset(PIECES),
    8: frozenset({1, 8}),
}

BONDED_PIECES = frozenset({1, 2, 3})


def theta_allows(previous: int, current: int) -> bool:
    """Transition rule: after a piece with z > 0 come pieces 1-5, otherwise 6-8."""
    if previous in BONDED_PIECES:
        return current in (1, 2, 3, 4, 5)
    return current in (6, 7, 8)


def virtual_start(z0: float, tol: float) -> int:
    """Piece standing in for step 0: 1 for a bonded initial value, 7 for a delaminated one."""
    return 1 if z0 > tol else 7


def is_theta_word(word: Sequence[int], start: int) -> bool:
    previous = start
    for piece in word:
        if not theta_allows(previous, piece):
            return False
        previous = piece
    return True


# ---------------------------------------------------------------------------
# Polyhedral cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """Cone {R a + L b : a >= 0} given by ray columns R and lineality columns L."""
    rays: np.ndarray
    lineality: np.ndarray

    @property
    def dim(self) -> int:
        return self.rays.shape[0]

    def generators(self) -> np.ndarray:
        return np.hstack([self.rays, self.lineality, -self.lineality])

    def contains(self, y: np.ndarray, tol: float = 1e-9) -> bool:
        return cone_membership(self.generators(), y, tol)[0]

    def equivalent(self, other: "PolyhedralCone") -> bool:
        """Same set of vectors, whatever the generators."""
        if other.dim != self.dim:
            return False
        mine, theirs = self.generators(), other.generators()
        return all(other.contains(g) for g in mine.T) and all(self.contains(g) for g in theirs.T)


def cone_membership(generators: np.ndarray, y: np.ndarray, tol: float = 1e-9) -> Tuple[bool, np.ndarray, float]:
    """
    Decide y in cone(generators) by non-negative least squares.

    Returns:
        tuple: (member, coefficients, residual), member when the residual is at
        most tol * (1 + ||y||).
    """
    y = np.asarray(y, dtype=float)
    if generators.shape[1] == 0:
        residual = float(np.linalg.norm(y))
        return residual <= tol * (1.0 + residual), np.zeros(0), residual
    coefficients, residual = nnls(generators, y)
    return residual <= tol * (1.0 + np.linalg.norm(y)), coefficients, float(residual)


def normal_cone_at(piece: int, point: Sequence[float], tol: float = 1e-12) -> PolyhedralCone:
    """Normal cone of cl Q_piece at `point` from its active constraints."""
    x = np.asarray(point, dtype=float)
    rays, lineality = [], []
    for a, kind in CLOSED_PIECES[piece]:
        a = np.asarray(a)
        if kind == EQ:
            lineality.append(a)
        elif abs(a @ x) <= tol:
            rays.append(a)
    return PolyhedralCone(rays=np.array(rays, dtype=float).reshape(-1, 3).T,
                          lineality=np.array(lineality, dtype=float).reshape(-1, 3).T)


def contains_point(piece: int, point: Sequence[float], tol: float = 1e-12) -> bool:
    """True if `point` satisfies every constraint of cl Q_piece within tol."""
    x = np.asarray(point, dtype=float)
    for a, kind in CLOSED_PIECES[piece]:
        value = np.asarray(a) @ x
        if kind == EQ and abs(value) > tol:
            return False
        if kind == INEQ and value > tol:
            return False
    return True


def _build_table() -> Dict[Tuple[int, int], PolyhedralCone]:
    return {(i, s): normal_cone_at(i, REPRESENTATIVES[s])
            for s in PIECES for i in NEIGHBOURS[s]}


CONE_TABLE = _build_table()


def piece_normal_cone(i: int, s: int) -> PolyhedralCone:
    """
    Normal cone of cl Q_i at the points of the stratum Q_s.

    Raises:
        InvalidBranchError: if cl Q_i does not contain Q_s.
    """
    if s not in NEIGHBOURS or i not in NEIGHBOURS[s]:
        raise InvalidBranchError(f"Piece {i} is not admissible on stratum {s}.")
    return CONE_TABLE[(i, s)]


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def classify_piece(z_prev: float, z: float, v: float, tol: float = 1e-10,
                   v_tol: Optional[float] = None) -> int:
    """
    Piece index of one step triple.

    Values within tol of a stratum boundary snap to the lower-dimensional
    stratum. `v_tol` applies to v and defaults to tol.

    Raises:
        ClassificationError: if the triple is off the graph by more than tol.
    """
    v_tol = tol if v_tol is None else v_tol
    if z_prev < -tol or z < -tol or z > z_prev + tol:
        raise ClassificationError(f"({z_prev}, {z}, {v}) violates 0 <= z <= z_prev.")
    v_sign = 1 if v > v_tol else (-1 if v < -v_tol else 0)
    pinched = z_prev <= tol
    at_zero = z <= tol
    at_top = abs(z - z_prev) <= tol

    if pinched:
        return {1: 8, -1: 6, 0: 7}[v_sign]
    if at_zero and v_sign <= 0:
        return 5 if v_sign < 0 else 4
    if at_top:
        if v_sign > 0:
            return 1
        if v_sign == 0:
            return 2
    elif not at_zero and v_sign == 0:
        return 3
    raise ClassificationError(
        f"({z_prev}, {z}, {v}) is off the graph: v must vanish strictly inside the box "
        f"and point towards the active bound.")


def piece_word(z_path: Sequence[float], v_path: Sequence[float], tol: float = 1e-10,
               v_tol: Optional[float] = None) -> Tuple[int, ...]:
    """Pieces of steps 1..K for one coordinate; z_path holds z^0..z^K, v_path v^1..v^K."""
    z_path = np.asarray(z_path, dtype=float)
    return tuple(classify_piece(z_path[k - 1], z_path[k], v_path[k - 1], tol, v_tol)
                 for k in range(1, z_path.size))


def branch_word(word: Sequence[int], start: int, policy: str = "active",
                choices: Optional[Dict[int, str]] = None) -> Tuple[int, ...]:
    """
    Select a branch s with I(s) = {s} among the strata next to `word`.

    Strongly active and strongly inactive steps keep their piece; biactive
    pieces (2, 4, 7) follow `policy` ("active" keeps the bound, "inactive"
    releases it), optionally overridden per step by `choices` (0-based step
    index to policy). Pieces that follow a released step are mapped to the
    matching bonded piece so the branch stays admissible.
    """
    if policy not in ("active", "inactive"):
        raise InvalidBranchError(f"Branch policy must be 'active' or 'inactive', got '{policy}'.")
    choices = choices or {}
    branch: List[int] = []
    previous = start
    for k, piece in enumerate(word):
        rule = choices.get(k, policy)
        after_bonded = previous in BONDED_PIECES
        if piece in (1, 3, 5):
            chosen = piece
        elif piece == 2:
            chosen = 1 if rule == "active" else 3
        elif piece == 4:
            chosen = 5 if rule == "active" else 3
        elif piece == 6:
            chosen = 5 if after_bonded else 6
        elif piece == 8:
            chosen = 1 if after_bonded else 8
        else:
            if after_bonded:
                chosen = 5 if rule == "active" else 1
            else:
                chosen = 6 if rule == "active" else 8
        branch.append(chosen)
        previous = chosen
    return tuple(branch)


def biactive_positions(word: Sequence[int]) -> List[int]:
    """0-based steps whose piece leaves a choice to the branch policy."""
    return [k for k, piece in enumerate(word) if piece in (2, 4, 7)]
