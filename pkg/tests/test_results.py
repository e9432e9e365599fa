r"""
tests/test_results.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_results.py
    python3 tests\test_results.py

Checks the CSV, JSON and SVG outputs of a run.
"""

import json
import pathlib
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.cli_io.plots import emit_plots  # noqa: E402
from scripts.cli_io.results import (  # noqa: E402
    PARAM_COLUMNS,
    TRACE_COLUMNS,
    emit_results,
    load_report,
    read_trajectory_csv,
    report_from_dict,
    report_to_dict,
    write_trajectory_csv,
)
from scripts.errors import ConfigParseError  # noqa: E402
from scripts.forward_sim import simulate  # noqa: E402
from scripts.identification.phases import IdentificationReport, PhaseResult  # noqa: E402
from tests.small_problem import small_experiment  # noqa: E402


def sample_report(with_phase: bool = True) -> IdentificationReport:
    report = IdentificationReport(
        seed=3,
        initial_params=np.array([300.0, 5e11, 5e11]),
        initial_grouping=(0, 0, 0),
        initial_value=4.0,
        trace=[{"iteration": 0, "phase": 1, "objective": 4.0, "event": "phase_boundary"}],
        planted=np.array([180.0, 190.0, 200.0, 1.4e11, 1.5e11, 1.6e11, 7e10, 7.5e10, 8e10]),
        planted_grouping=(0, 1, 2),
    )
    if with_phase:
        report.trace += [{"iteration": 1, "phase": 1, "objective": 4.0, "event": "iterate"},
                         {"iteration": 2, "phase": 1, "objective": 0.5, "event": "iterate"}]
        report.phases.append(PhaseResult(
            index=1, algorithm="quasi-newton", grouping=(0, 0, 1), x=np.array([0.2, 0.3, 0.4, 0.5, 0.6, 0.7]),
            params=np.array([185.0, 200.0, 1.5e11, 1.6e11, 7.5e10, 8e10]), start_value=4.0, value=0.5,
            evaluations=9, iterations=2, seconds=0.25, stop_reason="converged"))
    return report


class TestReportFiles(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self.folder.name)

    def tearDown(self):
        self.folder.cleanup()

    def test_emit_results(self):
        written = emit_results(sample_report(), self.root)
        self.assertEqual(set(written), {"trace.csv", "summary.csv", "params_phase1.csv", "report.json"})
        trace = pd.read_csv(written["trace.csv"])
        self.assertEqual(list(trace.columns), TRACE_COLUMNS)
        self.assertEqual(len(trace), 3)
        params = pd.read_csv(written["params_phase1.csv"])
        self.assertEqual(list(params.columns), PARAM_COLUMNS)
        np.testing.assert_allclose(params["alpha_f"], [185.0, 185.0, 200.0])
        summary = pd.read_csv(written["summary.csv"])
        self.assertEqual(list(summary["stage"]), ["starting", "phase 1", "desired"])
        self.assertAlmostEqual(summary.loc[2, "alpha_f"], 190.0)

    def test_no_phases(self):
        written = emit_results(sample_report(with_phase=False), self.root)
        params = pd.read_csv(written["params_phase1.csv"])
        self.assertEqual(list(params.columns), PARAM_COLUMNS)
        self.assertTrue(params.empty)

    def test_report_round_trip(self):
        report = sample_report()
        path = emit_results(report, self.root)["report.json"]
        loaded = load_report(path)
        self.assertEqual(loaded.final_value, 0.5)
        np.testing.assert_array_equal(loaded.final_params().as_vector(), report.final_params().as_vector())
        self.assertEqual(loaded.trace, report.trace)
        again = report_from_dict(json.loads(json.dumps(report_to_dict(loaded))))
        self.assertEqual(again.phases[0].stop_reason, "converged")

    def test_invalid_report(self):
        path = self.root.joinpath("report.json")
        path.write_text("{", encoding="utf-8")
        with self.assertRaises(ConfigParseError):
            load_report(path)


class TestTrajectoryFiles(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        e = small_experiment()
        cls.experiment = e
        cls.traj = simulate(e.planted, e.ops, e.loading, e.z0)

    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self.folder.name)

    def tearDown(self):
        self.folder.cleanup()

    def test_trajectory_round_trip(self):
        path = write_trajectory_csv(self.traj, self.root.joinpath("trajectory.csv"))
        u, z = read_trajectory_csv(path)
        np.testing.assert_array_equal(u, self.traj.u)
        np.testing.assert_array_equal(z, self.traj.z)

    def test_missing_columns(self):
        path = self.root.joinpath("broken.csv")
        pd.DataFrame({"step": [0, 1], "z_0": [1.0, 1.0], "uN_0": [0.0, 0.0]}).to_csv(path, index=False)
        with self.assertRaises(ConfigParseError):
            read_trajectory_csv(path)

    def test_plots(self):
        e = self.experiment
        written = emit_plots(sample_report(), self.root, e.mesh, e.partition, e.ops.reduced, self.traj)
        names = {p.name for p in written}
        self.assertIn("objective.svg", names)
        self.assertIn("params.svg", names)
        self.assertIn("frame_000.svg", names)
        self.assertEqual(len(written), 2 + self.traj.steps + 1)
        self.assertTrue(all(p.exists() for p in written))


if __name__ == "__main__":
    unittest.main(verbosity=2)
