r"""
tests/test_config.py

To run, open a terminal in the root project folder.
Activate your virtual environment if needed, and run one of the following commands:

    py tests\test_config.py
    python3 tests\test_config.py

Checks loading, validation and saving of experiment configurations.
"""

import pathlib
import sys
import tempfile
import unittest

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.cli_io.config import (  # noqa: E402
    config_from_dict,
    load_config,
    parse_phase_numbers,
    save_config,
)
from scripts.errors import ConfigParseError, ConfigValidationError  # noqa: E402


class TestValidation(unittest.TestCase):

    def test_defaults(self):
        cfg = config_from_dict({})
        self.assertEqual((cfg.mesh["nx"], cfg.mesh["ny"], cfg.mesh["contact_nodes"]), (14, 20, 12))
        self.assertEqual(cfg.material["young_modulus"], 70.0e9)
        self.assertEqual(cfg.objective["zeta"], 1.0e10)
        self.assertEqual(cfg.loading["steps"], 40)
        self.assertEqual(cfg.branch, "active")
        self.assertEqual(len(cfg.phase_plan().phases), 4)
        self.assertIsNone(cfg.data_path())

    def test_partial_section_keeps_other_defaults(self):
        cfg = config_from_dict({"mesh": {"nx": 6}, "seed": 5})
        self.assertEqual(cfg.mesh["nx"], 6)
        self.assertEqual(cfg.mesh["ny"], 20)
        self.assertEqual(cfg.mesh["contact_nodes"], 6)
        self.assertEqual(cfg.seed, 5)

    def test_explicit_contact_nodes_are_not_clamped(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            config_from_dict({"mesh": {"nx": 6, "contact_nodes": 8}})
        self.assertEqual(len(ctx.exception.violations), 1, ctx.exception.violations)

    def test_integers_accepted_for_floats(self):
        cfg = config_from_dict({"objective": {"zeta": 1}})
        self.assertIsInstance(cfg.objective["zeta"], float)

    def test_unknown_key(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            config_from_dict({"mesh": {"nz": 3}})
        self.assertEqual(ctx.exception.violations, ["mesh.nz: unknown key"])

    def test_all_violations_are_listed(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            config_from_dict({"mesh": {"nx": "many"}, "colour": "red", "branch": None})
        self.assertEqual(len(ctx.exception.violations), 3, ctx.exception.violations)

    def test_range_violations(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            config_from_dict({"material": {"poisson_ratio": 0.6}, "loading": {"steps": 0}, "branch": "random"})
        self.assertEqual(len(ctx.exception.violations), 3, ctx.exception.violations)

    def test_phase_violations(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            config_from_dict({"phases": [{"grouping": 2}, {"grouping": "uniform"}]})
        self.assertIn("phases[2].grouping: does not refine phase 1", ctx.exception.violations)
        with self.assertRaises(ConfigValidationError) as ctx:
            config_from_dict({"phases": [{"grouping": "pairs", "budget": "ten"}]})
        self.assertEqual(len(ctx.exception.violations), 2, ctx.exception.violations)
        with self.assertRaises(ConfigValidationError):
            config_from_dict({"phases": []})

    def test_not_an_object(self):
        with self.assertRaises(ConfigValidationError):
            config_from_dict([1, 2])


class TestFiles(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self.folder.name)

    def tearDown(self):
        self.folder.cleanup()

    def write(self, name, text):
        path = self.root.joinpath(name)
        path.write_text(text, encoding="utf-8")
        return path

    def test_parse_error_has_location(self):
        path = self.write("bad.json", '{\n  "mesh": {,\n}')
        with self.assertRaises(ConfigParseError) as ctx:
            load_config(path)
        self.assertEqual((ctx.exception.line, ctx.exception.column), (2, 12))

    def test_empty_file(self):
        path = self.write("empty.json", "  \n")
        with self.assertRaises(ConfigParseError) as ctx:
            load_config(path)
        self.assertEqual(ctx.exception.line, 1)

    def test_missing_file(self):
        with self.assertRaises(ConfigParseError):
            load_config(self.root.joinpath("nowhere.json"))

    def test_save_and_load(self):
        cfg = config_from_dict({"mesh": {"nx": 5, "ny": 4, "contact_nodes": 3}, "seed": 7})
        path = save_config(cfg, self.root.joinpath("nested", "saved.json"))
        loaded = load_config(path)
        self.assertEqual(loaded, cfg)
        self.assertEqual(loaded.source, str(path))

    def test_data_path_is_relative_to_config(self):
        self.write("measured.csv", "step,z_0,uN_0,uT_0\n0,1,0,0\n")
        path = self.write("run.json", '{"objective": {"data": "measured.csv"}}')
        cfg = load_config(path)
        self.assertEqual(cfg.data_path(), self.root.joinpath("measured.csv"))

    def test_missing_data_file(self):
        path = self.write("run.json", '{"objective": {"data": "missing.csv"}}')
        with self.assertRaises(ConfigValidationError):
            load_config(path)

    def test_bundled_configs(self):
        for name in ("full_scale.json", "desk_scale.json"):
            cfg = load_config(PROJECT_ROOT.joinpath("config", name))
            self.assertEqual(len(cfg.phase_plan().groupings(cfg.n_contact())), len(cfg.phases), name)


class TestPhaseNumbers(unittest.TestCase):

    def test_parse(self):
        self.assertEqual(parse_phase_numbers("1,2"), (1, 2))
        self.assertEqual(parse_phase_numbers(" 3 "), (3,))

    def test_errors(self):
        for text in ("", "1,x", ","):
            with self.assertRaises(ConfigParseError, msg=text):
                parse_phase_numbers(text)


if __name__ == "__main__":
    unittest.main(verbosity=2)
