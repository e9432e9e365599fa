r"""
tests/test_normal_cone_oracle.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_normal_cone_oracle.py
    python3 tests\test_normal_cone_oracle.py

Compares the stratified normal-cone formula with the sampling oracle on hand
picked and random graph points.
"""

import pathlib
import sys
import unittest

import numpy as np

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.adjoint.normal_cone_oracle import (  # noqa: E402
    compare_with_sampling,
    limiting_normal_gphQ,
    random_graph_point,
    sample_graph_points,
    sampling_limiting_normal,
    sampling_radius,
)


class TestSingleStep(unittest.TestCase):
    """One step sitting on stratum 2 (z stays at z_prev with v = 0)."""

    def setUp(self):
        self.z = [1.0, 1.0]
        self.v = [0.0]

    def test_union_of_branch_cones(self):
        cases = {
            (1.0, -1.0): True,    # both bounds active branch
            (-1.0, 0.0): True,    # bonded branch, v free of multiplier
            (0.0, 3.0): True,     # released branch
            (-1.0, 1.0): False,
            (1.0, 1.0): False,
        }
        for (gamma, delta), expected in cases.items():
            decision = limiting_normal_gphQ(self.z, self.v, [gamma], [delta])
            self.assertEqual(decision.member, expected, f"gamma={gamma}, delta={delta}")
            self.assertEqual(sampling_limiting_normal(self.z, self.v, [gamma], [delta]), expected)

    def test_certificate(self):
        decision = limiting_normal_gphQ(self.z, self.v, [2.0], [0.0])
        self.assertTrue(decision.member)
        self.assertEqual(decision.decomposition.shape, (1, 3))
        self.assertIn(decision.branch, [(1,), (2,)])

    def test_samples_cover_neighbouring_strata(self):
        samples = sample_graph_points(self.z, self.v)
        self.assertEqual(len(samples), 4, "base point plus three neighbouring graph points")
        self.assertAlmostEqual(sampling_radius(self.z, self.v), 0.1)


class TestRandomAgreement(unittest.TestCase):

    def test_formula_matches_sampling(self):
        rng = np.random.Generator(np.random.PCG64(0))
        frame = compare_with_sampling(rng, steps=(1, 2, 3), base_points=12, queries=25)
        self.assertEqual(len(frame), 3 * 12 * 25)
        disagreements = frame.loc[~frame["agree"]]
        self.assertTrue(disagreements.empty, f"disagreements:\n{disagreements.head()}")

    def test_random_points_are_on_graph(self):
        rng = np.random.Generator(np.random.PCG64(4))
        for _ in range(50):
            z, v = random_graph_point(rng, 4)
            self.assertTrue(np.all(np.diff(z) <= 0.0))
            self.assertTrue(np.all((z >= 0.0) & (z <= 1.0)))
            self.assertEqual(v.size, 4)


if __name__ == "__main__":
    unittest.main(verbosity=2)
