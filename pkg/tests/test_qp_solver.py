r"""
tests/test_qp_solver.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_qp_solver.py
    python3 tests\test_qp_solver.py

Compares the active-set box QP solver with brute-force pattern enumeration
and checks multiplier signs, biactivity flags and failure modes.
"""

import pathlib
import sys
import unittest

import numpy as np

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.errors import DomainError, NotPositiveDefiniteError, QPConvergenceError  # noqa: E402
from scripts.qp_solver import (  # noqa: E402
    INACTIVE,
    LOWER,
    UPPER,
    BoxQP,
    ContactQP,
    kkt_residual,
    random_box_qp,
    solve_box_qp,
    solve_box_qp_by_enumeration,
    solve_contact_qp,
)


class TestBoxQP(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_matches_enumeration(self):
        for trial in range(25):
            problem = random_box_qp(self.rng, 4)
            fast = solve_box_qp(problem)
            reference = solve_box_qp_by_enumeration(problem)
            np.testing.assert_allclose(fast.x, reference.x, atol=1e-8, err_msg=f"trial {trial}")
            np.testing.assert_allclose(fast.multipliers, reference.multipliers, atol=1e-7, err_msg=f"trial {trial}")
            self.assertLess(kkt_residual(problem, fast.x), 1e-9)

    def test_warm_start_gives_same_minimizer(self):
        problem = random_box_qp(self.rng, 6)
        cold = solve_box_qp(problem)
        warm = solve_box_qp(problem, x0=self.rng.uniform(-2.0, 2.0, 6))
        np.testing.assert_allclose(cold.x, warm.x, atol=1e-9)

    def test_multiplier_signs(self):
        for _ in range(10):
            solution = solve_box_qp(random_box_qp(self.rng, 5))
            self.assertTrue(np.all(solution.multipliers[solution.activity == LOWER] >= -1e-9))
            self.assertTrue(np.all(solution.multipliers[solution.activity == UPPER] <= 1e-9))
            self.assertTrue(np.all(solution.multipliers[solution.activity == INACTIVE] == 0.0))

    def test_unconstrained_minimizer_inside_box(self):
        H = np.array([[2.0, 0.5], [0.5, 1.0]])
        c = np.array([-0.1, 0.05])
        solution = solve_box_qp(BoxQP(H, c, [-10.0, -10.0], [10.0, 10.0]))
        np.testing.assert_allclose(solution.x, np.linalg.solve(H, -c), atol=1e-12)
        self.assertFalse(solution.active().any())

    def test_biactive_flag(self):
        solution = solve_box_qp(BoxQP(np.eye(2), [0.0, -1.0], [0.0, 0.0], [1.0, 2.0]))
        self.assertEqual(solution.activity[0], LOWER)
        self.assertTrue(solution.biactive[0], "zero multiplier at an active bound is biactive")
        self.assertFalse(solution.biactive[1])
        self.assertAlmostEqual(solution.x[1], 1.0, places=12)

    def test_pinched_coordinate_is_not_biactive(self):
        solution = solve_box_qp(BoxQP(np.eye(2), [0.0, 0.5], [0.5, -1.0], [0.5, 1.0]))
        self.assertAlmostEqual(solution.x[0], 0.5)
        self.assertFalse(solution.biactive[0])
        self.assertEqual(solution.activity[1], INACTIVE)

    def test_invalid_box(self):
        with self.assertRaises(DomainError):
            BoxQP(np.eye(2), [0.0, 0.0], [1.0, 0.0], [0.0, 1.0])

    def test_indefinite_hessian(self):
        problem = BoxQP(np.diag([-1.0, 1.0]), [0.0, 0.0], -np.inf, np.inf)
        with self.assertRaises(NotPositiveDefiniteError):
            solve_box_qp(problem)

    def test_iteration_cap(self):
        problem = BoxQP(np.eye(1), [-5.0], [0.0], [1.0])
        with self.assertRaises(QPConvergenceError):
            solve_box_qp(problem, max_iter=1)


class TestContactQP(unittest.TestCase):

    def test_normal_coordinates_stay_non_negative(self):
        rng = np.random.default_rng(5)
        base = random_box_qp(rng, 6)
        problem = ContactQP(H=base.H, c=base.c, constrained=np.array([0, 2, 4]))
        solution = solve_contact_qp(problem)
        self.assertTrue(np.all(solution.x[[0, 2, 4]] >= 0.0))
        self.assertTrue(np.all(solution.multipliers >= -1e-9))
        np.testing.assert_array_equal(solution.multipliers[[1, 3, 5]], 0.0)
        reference = solve_box_qp_by_enumeration(problem.as_box())
        np.testing.assert_allclose(solution.x, reference.x, atol=1e-8)

    def test_pressing_load_closes_gap(self):
        problem = ContactQP(H=np.eye(2), c=np.array([3.0, -1.0]), constrained=np.array([0]))
        solution = solve_contact_qp(problem)
        np.testing.assert_allclose(solution.x, [0.0, 1.0], atol=1e-12)
        self.assertAlmostEqual(solution.multipliers[0], 3.0)


if __name__ == "__main__":
    unittest.main(verbosity=2)
