r"""
tests/test_objective.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_objective.py
    python3 tests\test_objective.py

Checks parameter bounds and normalization, the tracking objective and the
IdentificationProblem wrapper the optimizers work on.
"""

import dataclasses
import pathlib
import sys
import unittest

import numpy as np

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.adhesive_model import AdhesiveParams, Grouping  # noqa: E402
from scripts.errors import InvalidParameterError  # noqa: E402
from scripts.forward_sim import simulate  # noqa: E402
from scripts.identification.objective import (  # noqa: E402
    IdentificationProblem,
    ObjectiveConfig,
    ParameterBounds,
    objective,
    tracking_terms,
)
from tests.small_problem import small_experiment  # noqa: E402


class TestParameterBounds(unittest.TestCase):

    def setUp(self):
        self.bounds = ParameterBounds()
        self.grouping = Grouping.blocks(4, 2)

    def test_normalization_round_trip(self):
        x = np.array([0.0, 1.0, 0.25, 0.5, 0.75, 0.1])
        params = self.bounds.to_physical(x, self.grouping)
        np.testing.assert_allclose(params.alpha_f, [100.0, 500.0])
        np.testing.assert_allclose(self.bounds.to_normalized(params), x, atol=1e-12)
        self.assertTrue(self.bounds.contains(params))

    def test_outside(self):
        params = AdhesiveParams.uniform(600.0, 1e11, 1e11, 4)
        self.assertFalse(self.bounds.contains(params))

    def test_from_dict(self):
        bounds = ParameterBounds.from_dict({"alpha_f": [1, 2], "kappa_n": [3, 4], "kappa_t": [5, 6]})
        lo, hi = bounds.vectors(Grouping.per_node(2))
        np.testing.assert_allclose(lo, [1, 1, 3, 3, 5, 5])
        np.testing.assert_allclose(hi, [2, 2, 4, 4, 6, 6])

    def test_invalid(self):
        with self.assertRaises(InvalidParameterError):
            ParameterBounds(lower=(5.0, 1.0, 1.0), upper=(4.0, 2.0, 2.0))
        with self.assertRaises(InvalidParameterError):
            ParameterBounds(lower=(0.0, 1.0, 1.0), upper=(4.0, 2.0, 2.0))


class TestTrackingObjective(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.experiment = small_experiment()
        cls.ops = cls.experiment.ops
        cls.cfg = cls.experiment.objective

    def test_planted_parameters_give_zero(self):
        value = objective(self.experiment.planted, self.ops, self.experiment.loading, self.experiment.z0, self.cfg)
        self.assertEqual(value, 0.0)

    def test_gradients_in_states(self):
        params = AdhesiveParams.uniform(300.0, 5e11, 5e11, self.ops.n_z)
        traj = simulate(params, self.ops, self.experiment.loading, self.experiment.z0)
        value, u_star, z_star = tracking_terms(traj, self.ops, self.cfg)
        self.assertGreater(value, 0.0)
        self.assertEqual(u_star.shape, (traj.steps, self.ops.n_contact))
        np.testing.assert_allclose(z_star, traj.z[1:] - self.cfg.z_desired[1:])

    def test_tau_scales_everything(self):
        params = AdhesiveParams.uniform(300.0, 5e11, 5e11, self.ops.n_z)
        traj = simulate(params, self.ops, self.experiment.loading, self.experiment.z0)
        base = tracking_terms(traj, self.ops, self.cfg)
        doubled = tracking_terms(traj, self.ops, dataclasses.replace(self.cfg, tau=2.0))
        self.assertAlmostEqual(doubled[0], 2.0 * base[0], delta=1e-12 * abs(base[0]))
        np.testing.assert_allclose(doubled[1], 2.0 * base[1])

    def test_free_part_term(self):
        params = AdhesiveParams.uniform(300.0, 5e11, 5e11, self.ops.n_z)
        traj = simulate(params, self.ops, self.experiment.loading, self.experiment.z0)
        with_free = tracking_terms(traj, self.ops, self.cfg)[0]
        without = tracking_terms(traj, self.ops, dataclasses.replace(self.cfg, uf_desired=None))[0]
        self.assertGreaterEqual(with_free, without)

    def test_invalid_config(self):
        with self.assertRaises(InvalidParameterError):
            dataclasses.replace(self.cfg, zeta=-1.0)
        with self.assertRaises(InvalidParameterError):
            dataclasses.replace(self.cfg, tau=0.0)
        with self.assertRaises(InvalidParameterError):
            ObjectiveConfig(u_desired=np.zeros((3, 6)), z_desired=np.zeros((4, 3)))

    def test_step_mismatch(self):
        short = ObjectiveConfig(u_desired=self.cfg.u_desired[:-1], z_desired=self.cfg.z_desired[:-1])
        traj = simulate(self.experiment.planted, self.ops, self.experiment.loading, self.experiment.z0)
        with self.assertRaises(InvalidParameterError):
            tracking_terms(traj, self.ops, short)


class TestIdentificationProblem(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.experiment = small_experiment()
        cls.problem = cls.experiment.problem

    def test_dimension_and_grouping(self):
        self.assertEqual(self.problem.dim, 3)
        finer = self.problem.with_grouping(Grouping.per_node(self.experiment.ops.n_z))
        self.assertEqual(finer.dim, 9)
        self.assertEqual(self.problem.dim, 3, "cloning must not touch the original")

    def test_value_matches_evaluate(self):
        x = np.array([0.3, 0.6, 0.45])
        evaluation = self.problem.evaluate(x)
        self.assertAlmostEqual(evaluation.value, self.problem.value(x), delta=1e-12 * (1.0 + evaluation.value))
        self.assertEqual(evaluation.gradient.shape, (3,))

    def test_regularizer(self):
        e = self.experiment
        problem = IdentificationProblem(e.ops, e.loading, e.z0, e.objective, e.problem.bounds,
                                        e.problem.grouping, tikhonov_weight=2.0)
        x = np.array([0.6, 0.6, 0.6])
        value, gradient = problem.regularizer(x)
        self.assertAlmostEqual(value, 0.5 * 2.0 * 3 * 0.01)
        np.testing.assert_allclose(gradient, 0.2)
        plain = self.problem.evaluate(x)
        regularized = problem.evaluate(x)
        np.testing.assert_allclose(regularized.gradient - plain.gradient, 0.2, rtol=1e-9, atol=1e-9)

    def test_enumerate_policy(self):
        e = self.experiment
        problem = IdentificationProblem(e.ops, e.loading, e.z0, e.objective, e.problem.bounds,
                                        e.problem.grouping, policy="enumerate", enumerate_budget=4)
        evaluation = problem.evaluate(np.full(3, 0.5))
        self.assertLessEqual(len(evaluation.branch_gradients), 4)
        self.assertLessEqual(evaluation.disagreements, len(evaluation.branch_gradients))
        if evaluation.biactive == 0:
            self.assertEqual(evaluation.branch_gradients, [])

    def test_invalid_arguments(self):
        e = self.experiment
        with self.assertRaises(InvalidParameterError):
            IdentificationProblem(e.ops, e.loading, e.z0, e.objective, e.problem.bounds, e.problem.grouping,
                                  policy="random")
        with self.assertRaises(InvalidParameterError):
            IdentificationProblem(e.ops, e.loading, e.z0, e.objective, e.problem.bounds, e.problem.grouping,
                                  tikhonov_weight=-1.0)


if __name__ == "__main__":
    unittest.main(verbosity=2)
