r"""
tests/test_phases.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_phases.py
    python3 tests\test_phases.py

Checks phase plans, grouping lifts and a short staged identification run on
the small test body.
"""

import pathlib
import sys
import unittest

import numpy as np

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.adhesive_model import AdhesiveParams, Grouping  # noqa: E402
from scripts.errors import IncompatibleGroupingError, InvalidParameterError  # noqa: E402
from scripts.identification.objective import IdentificationProblem  # noqa: E402
from scripts.identification.phases import PhasePlan, PhaseSpec, lift_grouping, run_identification  # noqa: E402
from scripts.identification.synthetic import synthetic_data  # noqa: E402
from tests.small_problem import small_experiment  # noqa: E402


class TestPhasePlan(unittest.TestCase):

    def test_default_plan(self):
        plan = PhasePlan.default()
        self.assertEqual([p.algorithm for p in plan.phases], ["global", "quasi-newton", "quasi-newton", "quasi-newton"])
        self.assertEqual([p.budget for p in plan.phases], [60, 100, 200, 300])
        slots = [g.n_slots for g in plan.groupings(12)]
        self.assertEqual(slots, [1, 1, 6, 12])

    def test_incompatible_groupings(self):
        plan = PhasePlan((PhaseSpec(2, "quasi-newton", 5), PhaseSpec(3, "quasi-newton", 5)))
        with self.assertRaises(IncompatibleGroupingError):
            plan.groupings(6)

    def test_select(self):
        plan = PhasePlan.default()
        picked = plan.select([4, 2])
        self.assertEqual([p.budget for p in picked.phases], [100, 300])
        for numbers in ([], [0], [5]):
            with self.assertRaises(InvalidParameterError, msg=f"{numbers}"):
                plan.select(numbers)

    def test_invalid_phase(self):
        with self.assertRaises(InvalidParameterError):
            PhaseSpec("uniform", "newton", 5)
        with self.assertRaises(InvalidParameterError):
            PhaseSpec("uniform", "global", 0)


class TestLiftGrouping(unittest.TestCase):

    def test_piecewise_constant(self):
        values = np.array([1.0, 2.0, 10.0, 20.0, 100.0, 200.0])
        lifted = lift_grouping(values, Grouping.blocks(4, 2), Grouping.per_node(4))
        np.testing.assert_array_equal(lifted, [1, 1, 2, 2, 10, 10, 20, 20, 100, 100, 200, 200])

    def test_errors(self):
        with self.assertRaises(InvalidParameterError):
            lift_grouping(np.zeros(4), Grouping.blocks(4, 2), Grouping.per_node(4))
        with self.assertRaises(IncompatibleGroupingError):
            lift_grouping(np.zeros(6), Grouping.blocks(4, 2), Grouping((0, 1, 1, 2)))


class TestRunIdentification(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.experiment = small_experiment()
        cls.plan = PhasePlan((
            PhaseSpec("uniform", "global", budget=3, population=6),
            PhaseSpec("uniform", "quasi-newton", budget=5),
            PhaseSpec("per_node", "quasi-newton", budget=5),
        ))
        cls.report = run_identification(cls.plan, cls.experiment.problem, seed=2, planted=cls.experiment.planted)

    def test_one_result_per_phase(self):
        self.assertEqual([p.index for p in self.report.phases], [1, 2, 3])
        self.assertEqual(len(self.report.phases[-1].params), 3 * self.experiment.ops.n_z)
        self.assertEqual(self.report.final_params().size, 3 * self.experiment.ops.n_z)

    def test_objective_does_not_grow(self):
        self.assertLessEqual(self.report.phases[0].value, self.report.initial_value)
        self.assertLessEqual(self.report.final_value, self.report.phases[0].value * (1.0 + 1e-9))

    def test_objective_drops_across_phase_boundaries(self):
        phases = self.report.phases
        self.assertEqual(phases[0].start_value, self.report.initial_value)
        for earlier, later in zip(phases, phases[1:]):
            self.assertEqual(later.start_value, earlier.value, "lifting keeps the objective")
        for phase in phases:
            self.assertLessEqual(phase.value, phase.start_value, f"phase {phase.index}")
        boundaries = [row["objective"] for row in self.report.trace if row["event"] == "phase_boundary"]
        self.assertEqual(boundaries, sorted(boundaries, reverse=True))

    def test_trace(self):
        boundaries = [row for row in self.report.trace if row["event"] == "phase_boundary"]
        self.assertEqual([row["phase"] for row in boundaries], [1, 2, 3])
        iterations = [row["iteration"] for row in self.report.trace if row["event"] == "iterate"]
        self.assertEqual(iterations, list(range(1, len(iterations) + 1)))

    def test_summary_table(self):
        table = self.report.summary_table()
        self.assertEqual(list(table["stage"]), ["starting", "phase 1", "phase 2", "phase 3", "desired"])
        self.assertEqual(list(table.columns), ["stage", "alpha_f", "kappa_n", "kappa_t", "objective"])
        self.assertEqual(table["objective"].iloc[-1], 0.0)

    def test_initial_too_fine(self):
        with self.assertRaises(IncompatibleGroupingError):
            run_identification(self.plan, self.experiment.problem, seed=0, initial=self.experiment.planted)

    def test_quasi_newton_phase_honours_threshold(self):
        plan = PhasePlan((PhaseSpec("uniform", "quasi-newton", budget=5, threshold=1.0e300),))
        report = run_identification(plan, self.experiment.problem, seed=0)
        self.assertEqual(report.phases[0].stop_reason, "threshold")
        self.assertEqual(report.phases[0].iterations, 0)
        self.assertEqual(report.final_value, report.initial_value)

    def test_coarse_initial_is_lifted(self):
        initial = AdhesiveParams.uniform(200.0, 1e11, 1e11, self.experiment.ops.n_z)
        plan = PhasePlan((PhaseSpec("per_node", "quasi-newton", budget=1),))
        report = run_identification(plan, self.experiment.problem, seed=0, initial=initial)
        np.testing.assert_allclose(report.initial_params[:self.experiment.ops.n_z], 200.0)



class TestPlantedRecovery(unittest.TestCase):

    def test_uniform_parameters_are_approached(self):
        e = small_experiment()
        planted = AdhesiveParams.uniform(250.0, 3.0e11, 2.0e11, e.ops.n_z)
        data = synthetic_data(e.ops, e.loading, e.z0, planted)
        problem = IdentificationProblem(e.ops, e.loading, e.z0, data.objective, e.problem.bounds,
                                        Grouping.uniform(e.ops.n_z))
        plan = PhasePlan((
            PhaseSpec("uniform", "global", budget=4, population=8),
            PhaseSpec("uniform", "quasi-newton", budget=20),
        ))
        report = run_identification(plan, problem, seed=3, planted=planted)
        self.assertLess(report.final_value, 0.1 * report.initial_value)
        target = problem.bounds.to_normalized(planted)
        start = problem.bounds.to_normalized(AdhesiveParams.from_vector(report.initial_params, planted.grouping))
        self.assertLess(np.linalg.norm(report.phases[-1].x - target), np.linalg.norm(start - target))

if __name__ == "__main__":
    unittest.main(verbosity=2)
