r"""
tests/test_stationarity.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_stationarity.py
    python3 tests\test_stationarity.py

Checks the box normal-cone residual and the M-stationarity certificate.
"""

import json
import pathlib
import sys
import unittest

import numpy as np

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.adhesive_model import Grouping  # noqa: E402
from scripts.adjoint.stationarity import (  # noqa: E402
    NOT_VERIFIED,
    STATIONARY,
    box_normal_residual,
    check_M_stationarity,
)
from scripts.forward_sim import simulate  # noqa: E402
from scripts.identification.objective import tracking_terms  # noqa: E402
from tests.small_problem import small_experiment  # noqa: E402


class TestBoxResidual(unittest.TestCase):

    def test_interior(self):
        self.assertAlmostEqual(box_normal_residual([3.0, -4.0], [0.5, 0.5], 0.0, 1.0), 5.0)

    def test_bounds(self):
        # pushing outward at a bound is fine, pulling inward is not
        self.assertEqual(box_normal_residual([2.0], [0.0], 0.0, 1.0), 0.0)
        self.assertEqual(box_normal_residual([-2.0], [0.0], 0.0, 1.0), 2.0)
        self.assertEqual(box_normal_residual([-2.0], [1.0], 0.0, 1.0), 0.0)
        self.assertEqual(box_normal_residual([2.0], [1.0], 0.0, 1.0), 2.0)

    def test_fixed_coordinate(self):
        self.assertEqual(box_normal_residual([7.0], [0.3], 0.3, 0.3), 0.0)


class TestMStationarity(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.experiment = small_experiment()
        cls.ops = cls.experiment.ops
        cls.lo, cls.hi = cls.experiment.problem.bounds.vectors(Grouping.per_node(cls.ops.n_z))

    def check(self, params):
        traj = simulate(params, self.ops, self.experiment.loading, self.experiment.z0)
        _, u_star, z_star = tracking_terms(traj, self.ops, self.experiment.objective)
        return check_M_stationarity(params, traj, self.ops, u_star, z_star, self.lo, self.hi, tol=1e-6)

    def test_planted_parameters_are_stationary(self):
        report = self.check(self.experiment.planted)
        self.assertEqual(report.status, STATIONARY)
        self.assertTrue(report.stationary)
        self.assertLessEqual(report.residual, 1e-6)
        self.assertGreaterEqual(report.branches_tried, 1)

    def test_certificate_is_json_ready(self):
        report = self.check(self.experiment.planted)
        certificate = json.loads(json.dumps(report.certificate()))
        self.assertEqual(certificate["status"], STATIONARY)
        self.assertEqual(len(certificate["gradient"]), self.experiment.planted.size)

    def test_far_point_reports_residual(self):
        problem = self.experiment.problem.with_grouping(Grouping.per_node(self.ops.n_z))
        params = problem.params(np.full(problem.dim, 0.9))
        report = self.check(params)
        self.assertIn(report.status, (STATIONARY, NOT_VERIFIED))
        self.assertGreaterEqual(report.residual, 0.0)
        self.assertFalse(report.truncated)


if __name__ == "__main__":
    unittest.main(verbosity=2)
