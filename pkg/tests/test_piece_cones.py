r"""
tests/test_piece_cones.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_piece_cones.py
    python3 tests\test_piece_cones.py

Checks the eight-piece description of the delamination step graph: stratum
classification, the neighbour table, normal cones and branch selection.
"""

import pathlib
import sys
import unittest

import numpy as np

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.adjoint.normal_cone_oracle import random_graph_point  # noqa: E402
from scripts.adjoint.piece_cones import (  # noqa: E402
    NEIGHBOURS,
    PIECES,
    REPRESENTATIVES,
    PolyhedralCone,
    biactive_positions,
    branch_word,
    classify_piece,
    cone_membership,
    contains_point,
    is_theta_word,
    normal_cone_at,
    piece_normal_cone,
    piece_word,
    virtual_start,
)
from scripts.errors import ClassificationError, InvalidBranchError  # noqa: E402


class TestClassification(unittest.TestCase):

    def test_representatives(self):
        for piece, point in REPRESENTATIVES.items():
            self.assertEqual(classify_piece(*point), piece, f"representative of piece {piece}")

    def test_snapping(self):
        self.assertEqual(classify_piece(1.0, 1.0 - 1e-13, 1e-13), 2)
        self.assertEqual(classify_piece(1e-13, 0.0, 0.0), 7)

    def test_off_graph(self):
        for triple in [(1.0, 1.2, 0.0), (1.0, 0.5, 1.0), (1.0, 0.0, 1.0), (-1.0, 0.0, 0.0), (1.0, 1.0, -1.0)]:
            with self.assertRaises(ClassificationError, msg=f"{triple}"):
                classify_piece(*triple)

    def test_piece_word(self):
        word = piece_word([1.0, 1.0, 0.5, 0.0, 0.0], [1.0, 0.0, 0.0, -2.0])
        self.assertEqual(word, (1, 3, 4, 6))
        self.assertEqual(virtual_start(1.0, 1e-10), 1)
        self.assertEqual(virtual_start(0.0, 1e-10), 7)


class TestCones(unittest.TestCase):

    def test_neighbour_table_matches_closures(self):
        for s in PIECES:
            containing = {i for i in PIECES if contains_point(i, REPRESENTATIVES[s])}
            self.assertEqual(containing, set(NEIGHBOURS[s]), f"stratum {s}")

    def test_normal_cone_on_own_piece_is_orthogonal_complement(self):
        cone = piece_normal_cone(3, 3)
        self.assertTrue(cone.contains(np.array([0.0, 0.0, -4.0])))
        self.assertFalse(cone.contains(np.array([1.0, 0.0, 0.0])))
        cone = piece_normal_cone(7, 7)
        self.assertTrue(cone.contains(np.array([3.0, -2.0, 1.0])), "a point stratum has the full space as normal cone")

    def test_cone_at_biactive_stratum(self):
        # piece 1 seen from stratum 2: z = z_prev free direction, v >= 0 adds the ray -e_v
        cone = piece_normal_cone(1, 2)
        self.assertTrue(cone.contains(np.array([-1.0, 1.0, -2.0])))
        self.assertFalse(cone.contains(np.array([0.0, 0.0, 1.0])))

    def test_inadmissible_pair(self):
        with self.assertRaises(InvalidBranchError):
            piece_normal_cone(8, 3)

    def test_membership_and_equivalence(self):
        generators = np.array([[1.0, 0.0], [0.0, 1.0]])
        self.assertTrue(cone_membership(generators, np.array([2.0, 3.0]))[0])
        self.assertFalse(cone_membership(generators, np.array([-1.0, 3.0]))[0])
        quadrant = PolyhedralCone(rays=generators, lineality=np.zeros((2, 0)))
        same = PolyhedralCone(rays=np.array([[2.0, 0.0, 1.0], [0.0, 3.0, 1.0]]), lineality=np.zeros((2, 0)))
        self.assertTrue(quadrant.equivalent(same))
        half_plane = PolyhedralCone(rays=np.array([[1.0], [0.0]]), lineality=np.array([[0.0], [1.0]]))
        self.assertFalse(quadrant.equivalent(half_plane))

    def test_normal_cone_at_uses_active_constraints(self):
        interior = normal_cone_at(3, (1.0, 0.5, 0.0))
        corner = normal_cone_at(3, (1.0, 0.0, 0.0))
        self.assertEqual(interior.rays.shape[1], 0)
        self.assertEqual(corner.rays.shape[1], 1)


class TestBranchSelection(unittest.TestCase):

    def test_biactive_policies(self):
        self.assertEqual(branch_word((2,), 1, "active"), (1,))
        self.assertEqual(branch_word((2,), 1, "inactive"), (3,))
        self.assertEqual(branch_word((4, 7), 1, "active"), (5, 6))
        self.assertEqual(branch_word((4, 7), 1, "inactive"), (3, 1))

    def test_choices_override_policy(self):
        self.assertEqual(branch_word((2, 2), 1, "active", choices={1: "inactive"}), (1, 3))

    def test_branches_are_admissible(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            K = int(rng.integers(1, 6))
            z, v = random_graph_point(rng, K)
            word = piece_word(z, v)
            start = virtual_start(z[0], 1e-10)
            for policy in ("active", "inactive"):
                branch = branch_word(word, start, policy)
                self.assertTrue(is_theta_word(branch, start), f"{word} -> {branch}")
                self.assertTrue(all(p in (1, 3, 5, 6, 8) for p in branch), "branch pieces must be full-dimensional")
                self.assertTrue(all(b in NEIGHBOURS[s] for b, s in zip(branch, word)))

    def test_biactive_positions(self):
        self.assertEqual(biactive_positions((1, 2, 3, 4, 7, 8)), [1, 3, 4])

    def test_invalid_policy(self):
        with self.assertRaises(InvalidBranchError):
            branch_word((1,), 1, "both")


if __name__ == "__main__":
    unittest.main(verbosity=2)
