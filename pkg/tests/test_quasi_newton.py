r"""
tests/test_quasi_newton.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_quasi_newton.py
    python3 tests\test_quasi_newton.py

Checks the box-constrained BFGS phase and its helpers on quadratic and
piecewise-linear functions.
"""

import pathlib
import sys
import unittest
from types import SimpleNamespace

import numpy as np

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.errors import InvalidParameterError  # noqa: E402
from scripts.identification.quasi_newton import (  # noqa: E402
    frozen_coordinates,
    min_norm_combination,
    phase_quasinewton,
    projected_gradient,
)


def quadratic(center, weights=(1.0, 1.0)):
    center, weights = np.asarray(center, dtype=float), np.asarray(weights, dtype=float)

    def evaluate(x):
        d = x - center
        return SimpleNamespace(value=0.5 * float(np.sum(weights * d * d)), gradient=weights * d)
    return evaluate


def absolute(x):
    d = x - np.array([0.4, 0.6])
    return SimpleNamespace(value=float(np.abs(d).sum()), gradient=np.sign(d))


class TestPhaseQuasiNewton(unittest.TestCase):

    def test_interior_minimum(self):
        result = phase_quasinewton(quadratic([0.3, 0.6], [1.0, 10.0]), np.array([0.9, 0.1]), budget=100)
        self.assertEqual(result.stop_reason, "converged")
        np.testing.assert_allclose(result.x, [0.3, 0.6], atol=1e-7)
        self.assertFalse(result.warning)

    def test_minimum_on_the_box_corner(self):
        result = phase_quasinewton(quadratic([-0.5, 1.5]), np.array([0.5, 0.5]), budget=20)
        np.testing.assert_allclose(result.x, [0.0, 1.0])
        self.assertAlmostEqual(result.value, 0.25)
        self.assertEqual(result.stop_reason, "converged")
        self.assertEqual(result.iterations, 1)

    def test_zero_budget_returns_start(self):
        result = phase_quasinewton(quadratic([0.3, 0.6]), np.array([1.5, 0.2]), budget=0)
        np.testing.assert_array_equal(result.x, [1.0, 0.2])
        self.assertEqual(result.iterations, 0)
        self.assertEqual(result.stop_reason, "budget")

    def test_nonsmooth_objective_decreases(self):
        result = phase_quasinewton(absolute, np.array([0.9, 0.1]), budget=50)
        self.assertLess(result.value, result.history[0])
        self.assertEqual(result.value, result.history[-1])
        self.assertLessEqual(result.iterations, 50)

    def test_threshold_stops_early(self):
        evaluate = quadratic([0.3, 0.6], [1.0, 10.0])
        result = phase_quasinewton(evaluate, np.array([0.9, 0.1]), budget=100, threshold=1.0)
        self.assertEqual(result.stop_reason, "threshold")
        self.assertLessEqual(result.value, 1.0)
        self.assertTrue(all(f > 1.0 for f in result.history[:-1]))
        full = phase_quasinewton(evaluate, np.array([0.9, 0.1]), budget=100)
        self.assertLess(result.iterations, full.iterations)

    def test_start_below_threshold(self):
        result = phase_quasinewton(quadratic([0.3, 0.6]), np.array([0.9, 0.1]), budget=10, threshold=1.0)
        self.assertEqual((result.stop_reason, result.iterations, result.evaluations), ("threshold", 0, 1))

    def test_negative_budget(self):
        with self.assertRaises(InvalidParameterError):
            phase_quasinewton(quadratic([0.3, 0.6]), np.zeros(2), budget=-1)


class TestHelpers(unittest.TestCase):

    def test_projected_gradient(self):
        x = np.array([0.0, 0.5, 1.0])
        g = np.array([1.0, 1.0, -1.0])
        np.testing.assert_allclose(projected_gradient(x, g), [0.0, 0.5, 0.0])
        np.testing.assert_array_equal(frozen_coordinates(x, g), [True, False, True])

    def test_min_norm_combination(self):
        np.testing.assert_allclose(min_norm_combination(np.array([[1.0, 0.0], [0.0, 1.0]])), [0.5, 0.5], atol=1e-6)
        np.testing.assert_allclose(min_norm_combination(np.array([[1.0, 1.0], [2.0, 2.0]])), [1.0, 1.0], atol=1e-6)
        np.testing.assert_allclose(min_norm_combination(np.array([[1.0, 0.0], [-1.0, 0.0]])), [0.0, 0.0], atol=1e-6)


if __name__ == "__main__":
    unittest.main(verbosity=2)
