"""
tests/small_problem.py

Shared small instance for the test modules: a 4 x 3 node body with three
contact nodes and a few load steps, built through the same config path the
command line uses.
"""

import pathlib
import sys

# For local imports, temporarily add project root to Python sys.path
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))

from scripts.cli_io.config import ExperimentConfig, config_from_dict  # noqa: E402
from scripts.cli_io.experiment import Experiment, build_experiment  # noqa: E402

SMALL_CONFIG = {
    "mesh": {"nx": 4, "ny": 3, "contact_nodes": 3},
    "loading": {"steps": 4, "schedule": "ramp"},
    "phases": [
        {"grouping": "uniform", "algorithm": "global", "budget": 3, "population": 6},
        {"grouping": "uniform", "algorithm": "quasi-newton", "budget": 5},
        {"grouping": "per_node", "algorithm": "quasi-newton", "budget": 5},
    ],
}


def small_config(**sections) -> ExperimentConfig:
    """SMALL_CONFIG with whole sections replaced by keyword."""
    data = {**SMALL_CONFIG, **sections}
    return config_from_dict(data)


def small_experiment(**sections) -> Experiment:
    return build_experiment(small_config(**sections))
