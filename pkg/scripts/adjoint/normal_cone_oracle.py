"""
scripts/adjoint/normal_cone_oracle.py

Limiting normal cone to the graph of the delamination step map for a single
z coordinate over K steps, in the space of (gamma^1..gamma^K, delta^1..delta^K).

`limiting_normal_gphQ` uses the stratified formula: a union over nearby
strata s of the intersection, over all admissible piece words i around s, of
the normal cones N_{cl Q_i}(Q_s). `sampling_limiting_normal` is an independent
check: it builds graph points near the base point, computes the Frechet normal
cone at each one numerically (intersection of the normal cones of every
closed piece word containing the point) and takes the union.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from scripts.adjoint.piece_cones import (
    NEIGHBOURS,
    PIECES,
    PolyhedralCone,
    cone_membership,
    contains_point,
    normal_cone_at,
    piece_normal_cone,
    piece_word,
    theta_allows,
    virtual_start,
)
from utils.logger import logger

DEFAULT_WORD_CAP = 4096


@dataclass(frozen=True)
class ConeDecision:
    """
    Membership decision with its certificate: the witnessing branch and the
    per-step triples (mu_tilde^{k-1}, mu^k, nu^k), shape (K, 3).
    """
    member: bool
    branch: Optional[Tuple[int, ...]] = None
    decomposition: Optional[np.ndarray] = None
    residual: float = np.inf
    truncated: bool = False


def _theta_words(options: Sequence[Sequence[int]], start: int, cap: int) -> Iterator[Tuple[int, ...]]:
    """Words with the k-th letter from options[k] that respect the transition rule."""
    count = 0

    def extend(prefix: List[int], previous: int) -> Iterator[Tuple[int, ...]]:
        nonlocal count
        if count >= cap:
            return
        k = len(prefix)
        if k == len(options):
            count += 1
            yield tuple(prefix)
            return
        for piece in sorted(options[k]):
            if theta_allows(previous, piece):
                yield from extend(prefix + [piece], piece)

    yield from extend([], start)


def _lift_generators(step_cones: Sequence[PolyhedralCone]) -> Tuple[np.ndarray, List[Tuple[int, np.ndarray]]]:
    """
    Stack per-step cone generators into the (gamma, delta) space of size 2K.

    The z_prev component of step k goes to gamma^{k-1} (dropped for k = 1, z^0
    is data), the z component to gamma^k and the v component to delta^k.
    Returns the generator matrix and, per column, (step, triple generator).
    """
    K = len(step_cones)
    columns, owners = [], []
    for k, cone in enumerate(step_cones, start=1):
        for g in cone.generators().T:
            col = np.zeros(2 * K)
            if k > 1:
                col[k - 2] += g[0]
            col[k - 1] += g[1]
            col[K + k - 1] += g[2]
            columns.append(col)
            owners.append((k, g))
    matrix = np.array(columns).T if columns else np.zeros((2 * K, 0))
    return matrix, owners


def _decomposition(owners: List[Tuple[int, np.ndarray]], coefficients: np.ndarray, K: int) -> np.ndarray:
    triples = np.zeros((K, 3))
    for (k, g), coef in zip(owners, coefficients):
        triples[k - 1] += coef * g
    return triples


def split_query(gamma: Sequence[float], delta: Sequence[float]) -> np.ndarray:
    return np.concatenate([np.asarray(gamma, dtype=float), np.asarray(delta, dtype=float)])


def limiting_normal_gphQ(z_path: Sequence[float], v_path: Sequence[float], gamma: Sequence[float],
                         delta: Sequence[float], tol: float = 1e-10, cone_tol: float = 1e-9,
                         word_cap: int = DEFAULT_WORD_CAP) -> ConeDecision:
    """
    Decide whether (gamma, delta) lies in the limiting normal cone at (z, v).

    Parameters:
        z_path (Sequence[float]): z^0..z^K of one coordinate.
        v_path (Sequence[float]): v^1..v^K of the same coordinate.
        gamma, delta (Sequence[float]): the query, K entries each.
        tol (float): snapping tolerance of the stratum classification.
        cone_tol (float): relative residual accepted by the membership test.
        word_cap (int): cap on enumerated words per search level.

    Returns:
        ConeDecision: member flag with witnessing branch and decomposition.
    """
    word = piece_word(z_path, v_path, tol)
    K = len(word)
    start = virtual_start(float(z_path[0]), tol)
    query = split_query(gamma, delta)
    best_residual, truncated = np.inf, False

    branches = list(_theta_words([NEIGHBOURS[s] for s in word], start, word_cap))
    truncated |= len(branches) >= word_cap
    for s in branches:
        certificate, inside = None, True
        for i in _theta_words([NEIGHBOURS[sk] for sk in s], start, word_cap):
            matrix, owners = _lift_generators([piece_normal_cone(ik, sk) for ik, sk in zip(i, s)])
            member, coefficients, residual = cone_membership(matrix, query, cone_tol)
            if not member:
                best_residual = min(best_residual, residual)
                inside = False
                break
            if certificate is None:
                certificate = _decomposition(owners, coefficients, K)
        if inside and certificate is not None:
            return ConeDecision(True, s, certificate, 0.0, truncated)
    if truncated:
        logger.warning(f"Normal-cone search truncated at {word_cap} words (K={K}).")
    return ConeDecision(False, None, None, float(best_residual), truncated)


# ---------------------------------------------------------------------------
# Sampling oracle
# ---------------------------------------------------------------------------

def sampling_radius(z_path: Sequence[float], v_path: Sequence[float], tol: float = 1e-10) -> float:
    """A quarter of the smallest non-zero gap between graph coordinates, at most 0.1."""
    z = np.asarray(z_path, dtype=float)
    values = np.concatenate([z, np.diff(z), np.asarray(v_path, dtype=float)])
    gaps = np.abs(values[np.abs(values) > tol])
    return float(min(0.1, 0.25 * gaps.min())) if gaps.size else 0.1


def _step_options(z_tilde: float, base_z: float, base_v: float, base_piece: int, r: float,
                  tol: float) -> List[Tuple[float, float]]:
    """Graph points (z, v) near the base step, given the sampled z_prev."""
    if z_tilde <= tol:
        return [(0.0, base_v)] if base_piece in (6, 8) else [(0.0, 0.0), (0.0, r), (0.0, -r)]
    options: Dict[int, List[Tuple[float, float]]] = {
        1: [(z_tilde, base_v)],
        2: [(z_tilde, 0.0), (z_tilde, r), (z_tilde - 0.5 * r, 0.0)],
        3: [(base_z, 0.0)],
        4: [(0.0, 0.0), (0.0, -r), (min(0.5 * r, 0.5 * z_tilde), 0.0)],
        5: [(0.0, base_v)],
        6: [(0.0, base_v)],
        7: [(z_tilde, 0.0), (z_tilde, r), (0.0, 0.0), (0.0, -r), (min(0.5 * r, 0.5 * z_tilde), 0.0)],
        8: [(z_tilde, base_v)],
    }
    return options[base_piece]


def sample_graph_points(z_path: Sequence[float], v_path: Sequence[float], tol: float = 1e-10,
                        radius: Optional[float] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Graph points around (z, v): the base point and its neighbours on every nearby stratum."""
    z_path = np.asarray(z_path, dtype=float)
    v_path = np.asarray(v_path, dtype=float)
    word = piece_word(z_path, v_path, tol)
    r = sampling_radius(z_path, v_path, tol) if radius is None else radius
    samples = [(z_path.copy(), v_path.copy())]

    def extend(zs: List[float], vs: List[float]) -> None:
        k = len(vs) + 1
        if k > len(word):
            samples.append((np.array(zs), np.array(vs)))
            return
        for z, v in _step_options(zs[-1], z_path[k], v_path[k - 1], word[k - 1], r, tol):
            extend(zs + [z], vs + [v])

    extend([float(z_path[0])], [])
    return samples


def frechet_normal_contains(z_path: np.ndarray, v_path: np.ndarray, query: np.ndarray,
                            cone_tol: float = 1e-9, point_tol: float = 1e-12) -> bool:
    """
    Query in the Frechet normal cone at a graph point: the intersection of the
    normal cones of every admissible closed piece word containing the point.
    """
    K = v_path.size
    triples = [(z_path[k - 1], z_path[k], v_path[k - 1]) for k in range(1, K + 1)]
    containing = [[i for i in PIECES if contains_point(i, t, point_tol)] for t in triples]
    start = virtual_start(float(z_path[0]), point_tol)
    found = False
    for word in _theta_words(containing, start, DEFAULT_WORD_CAP):
        found = True
        cones = [normal_cone_at(i, t, point_tol) for i, t in zip(word, triples)]
        matrix, _ = _lift_generators(cones)
        if not cone_membership(matrix, query, cone_tol)[0]:
            return False
    return found


def sampling_limiting_normal(z_path: Sequence[float], v_path: Sequence[float], gamma: Sequence[float],
                             delta: Sequence[float], tol: float = 1e-10, cone_tol: float = 1e-9) -> bool:
    """Union of Frechet normal cones at sampled nearby graph points."""
    query = split_query(gamma, delta)
    return any(frechet_normal_contains(zs, vs, query, cone_tol)
               for zs, vs in sample_graph_points(z_path, v_path, tol))


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------

def random_graph_point(rng: np.random.Generator, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random on-graph base point (z^0..z^K, v^1..v^K) whose steps visit all pieces,
    with values on a coarse grid so several steps land on stratum boundaries.
    """
    z = [float(rng.choice([0.0, 1.0], p=[0.15, 0.85]))]
    v = []
    for _ in range(K):
        z_prev = z[-1]
        if z_prev == 0.0:
            choice = rng.integers(3)
            z.append(0.0)
            v.append([-1.0, 0.0, 1.0][choice] * float(rng.integers(1, 3)))
            continue
        piece = int(rng.integers(1, 6))
        magnitude = float(rng.integers(1, 3))
        if piece in (1, 2):
            z_next, v_next = z_prev, (magnitude if piece == 1 else 0.0)
        elif piece == 3:
            z_next, v_next = z_prev * float(rng.choice([0.25, 0.5, 0.75])), 0.0
        else:
            z_next, v_next = 0.0, (0.0 if piece == 4 else -magnitude)
        z.append(z_next)
        v.append(v_next)
    return np.array(z), np.array(v)


def random_query(rng: np.random.Generator, K: int, scaled: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Ternary query in {-1, 0, 1}^(2K), optionally times random magnitudes."""
    q = rng.integers(-1, 2, size=2 * K).astype(float)
    if scaled:
        q *= rng.uniform(0.5, 2.0, size=2 * K)
    return q[:K], q[K:]


def compare_with_sampling(rng: np.random.Generator, steps: Sequence[int] = (1, 2, 3), base_points: int = 50,
                          queries: int = 200, tol: float = 1e-10,
                          cone_tol: float = 1e-9) -> pd.DataFrame:
    """
    Run both membership tests on random base points and queries.

    `tol` snaps the stratum classification, `cone_tol` bounds the relative
    residual of the generator membership tests.

    Returns:
        pd.DataFrame: one row per query with columns K, base, query, formula,
        sampling, agree.
    """
    rows = []
    for K in steps:
        for b in range(base_points):
            z, v = random_graph_point(rng, K)
            for q in range(queries):
                gamma, delta = random_query(rng, K, scaled=bool(q % 2))
                formula = limiting_normal_gphQ(z, v, gamma, delta, tol, cone_tol).member
                sampled = sampling_limiting_normal(z, v, gamma, delta, tol, cone_tol)
                rows.append({"K": K, "base": b, "query": q, "formula": formula,
                             "sampling": sampled, "agree": formula == sampled})
    frame = pd.DataFrame(rows, columns=["K", "base", "query", "formula", "sampling", "agree"])
    if len(frame):
        logger.info(f"Normal-cone oracle agreement: {frame['agree'].mean():.4f} over {len(frame)} queries")
    return frame
