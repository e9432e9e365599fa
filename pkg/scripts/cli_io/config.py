"""
scripts/cli_io/config.py

Experiment configuration: a JSON file with the sections mesh, material,
adhesive, loading, objective, bounds, phases and tolerances plus the top-level
keys branch and seed. Missing keys take the defaults below, unknown keys are
rejected and every violation is reported at once.

Bundled files live in config/ (full_scale.json, desk_scale.json).
"""

import copy
import json
import pathlib
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from scripts.adhesive_model import FIELDS, Grouping
from scripts.errors import ConfigParseError, ConfigValidationError
from scripts.fem_core import LOADING_EDGES
from scripts.identification.phases import ALGORITHMS, PhasePlan, PhaseSpec
from scripts.identification.synthetic import SCHEDULES
from utils.logger import logger

POLICIES = ("active", "inactive", "enumerate")

PHASE_DEFAULTS: Dict[str, Any] = asdict(PhaseSpec())

DEFAULTS: Dict[str, Any] = {
    "mesh": {"nx": 14, "ny": 20, "width": 0.13, "height": 0.19, "contact_nodes": 12, "loading_edge": "top"},
    "material": {"young_modulus": 70.0e9, "poisson_ratio": 0.35, "plane": "strain", "thickness": 1.0},
    "adhesive": {
        "a": 1.0, "c": -1.0, "epsilon": 1.0, "mass": "lumped", "z0": 1.0,
        "means": {"alpha_f": 187.5, "kappa_n": 1.5e11, "kappa_t": 7.5e10},
        "spread": 0.1, "seed": 1,
    },
    "loading": {"steps": 40, "tau": 1.0, "max_lift": 2.0e-4, "max_shear": 5.0e-5, "max_rotation": 1.0e-3,
                "schedule": "random", "seed": 0},
    "objective": {"zeta": 1.0e10, "data": None, "track_free": True, "noise_u": 0.0, "noise_z": 0.0,
                  "tikhonov_weight": 0.0},
    "bounds": {"alpha_f": [100.0, 500.0], "kappa_n": [1.0e10, 1.0e12], "kappa_t": [1.0e10, 1.0e12]},
    "phases": [asdict(p) for p in PhasePlan.default().phases],
    "tolerances": {"qp": 1.0e-10, "cone": 1.0e-9, "stationarity": 1.0e-6, "fd_step": 1.0e-6,
                   "branch_budget": 4096, "enumerate_budget": 64},
    "branch": "active",
    "seed": 0,
}

# keys whose value may be null
NULLABLE = {("mesh", "contact_nodes"), ("mesh", "loading_edge"), ("objective", "data"), ("phases", "threshold")}


@dataclass(frozen=True)
class ExperimentConfig:
    mesh: Dict[str, Any]
    material: Dict[str, Any]
    adhesive: Dict[str, Any]
    loading: Dict[str, Any]
    objective: Dict[str, Any]
    bounds: Dict[str, List[float]]
    phases: List[Dict[str, Any]]
    tolerances: Dict[str, Any]
    branch: str = "active"
    seed: int = 0
    source: Optional[str] = field(default=None, compare=False)

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("source")
        return data

    def phase_plan(self) -> PhasePlan:
        return PhasePlan(tuple(PhaseSpec(**p) for p in self.phases))

    def n_contact(self) -> int:
        return self.mesh["contact_nodes"] if self.mesh["contact_nodes"] is not None else self.mesh["nx"]

    def data_path(self) -> Optional[pathlib.Path]:
        """Experimental trajectory CSV, resolved against the config file's folder."""
        raw = self.objective["data"]
        if raw is None:
            return None
        path = pathlib.Path(raw)
        if not path.is_absolute() and self.source is not None:
            path = pathlib.Path(self.source).parent.joinpath(path)
        return path


# ---------------------------------------------------------------------------
# Merging and validation
# ---------------------------------------------------------------------------

def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _same_kind(value: Any, default: Any) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return _is_number(value)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return True


def _merge(user: Dict[str, Any], defaults: Dict[str, Any], path: str, violations: List[str],
           section: str) -> Dict[str, Any]:
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            violations.append(f"{where}: unknown key")
            continue
        default = defaults[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                violations.append(f"{where}: expected an object")
                continue
            merged[key] = _merge(value, default, where, violations, section or key)
        elif value is None:
            if (section or key, key) in NULLABLE or default is None:
                merged[key] = None
            else:
                violations.append(f"{where}: must not be null")
        elif default is None or _same_kind(value, default):
            merged[key] = float(value) if isinstance(default, float) else value
        else:
            violations.append(f"{where}: expected {type(default).__name__}, got {type(value).__name__}")
    return merged


def _merge_phases(user: Any, violations: List[str]) -> List[Dict[str, Any]]:
    if not isinstance(user, list):
        violations.append("phases: expected a list")
        return copy.deepcopy(DEFAULTS["phases"])
    phases = []
    for n, entry in enumerate(user, start=1):
        if not isinstance(entry, dict):
            violations.append(f"phases[{n}]: expected an object")
            continue
        merged = copy.deepcopy(PHASE_DEFAULTS)
        for key, value in entry.items():
            where = f"phases[{n}].{key}"
            if key not in PHASE_DEFAULTS:
                violations.append(f"{where}: unknown key")
            elif key == "grouping":
                if not (value in ("uniform", "per_node") or (isinstance(value, int) and not isinstance(value, bool))):
                    violations.append(f"{where}: expected 'uniform', 'per_node' or a block size")
                else:
                    merged[key] = value
            elif value is None and key == "threshold":
                merged[key] = None
            elif key == "threshold" and _is_number(value):
                merged[key] = float(value)
            elif _same_kind(value, PHASE_DEFAULTS[key]):
                merged[key] = float(value) if isinstance(PHASE_DEFAULTS[key], float) else value
            else:
                violations.append(f"{where}: wrong type {type(value).__name__}")
        phases.append(merged)
    return phases


def _check_ranges(cfg: Dict[str, Any], violations: List[str]) -> None:
    mesh, material, adhesive = cfg["mesh"], cfg["material"], cfg["adhesive"]
    if mesh["nx"] < 2 or mesh["ny"] < 2:
        violations.append("mesh.nx, mesh.ny: need at least 2 nodes per direction")
    for key in ("width", "height"):
        if not mesh[key] > 0:
            violations.append(f"mesh.{key}: must be positive")
    contact = mesh["contact_nodes"]
    if contact is not None and not (isinstance(contact, int) and 2 <= contact <= mesh["nx"]):
        violations.append(f"mesh.contact_nodes: must be an integer in [2, nx={mesh['nx']}]")
    if mesh["loading_edge"] is not None and mesh["loading_edge"] not in LOADING_EDGES:
        violations.append(f"mesh.loading_edge: must be one of {LOADING_EDGES}")

    if not material["young_modulus"] > 0:
        violations.append("material.young_modulus: must be positive")
    if not -1.0 < material["poisson_ratio"] < 0.5:
        violations.append("material.poisson_ratio: must lie in (-1, 0.5)")
    if material["plane"] not in ("strain", "stress"):
        violations.append("material.plane: must be 'strain' or 'stress'")
    if not material["thickness"] > 0:
        violations.append("material.thickness: must be positive")

    if not adhesive["a"] > 0:
        violations.append("adhesive.a: must be positive (strictly convex cohesive energy)")
    if adhesive["epsilon"] < 0:
        violations.append("adhesive.epsilon: must be non-negative")
    if adhesive["mass"] not in ("lumped", "consistent"):
        violations.append("adhesive.mass: must be 'lumped' or 'consistent'")
    if not 0.0 <= adhesive["z0"] <= 1.0:
        violations.append("adhesive.z0: must lie in [0, 1]")
    for name in FIELDS:
        if not adhesive["means"][name] > 0:
            violations.append(f"adhesive.means.{name}: must be positive")
    if not 0.0 <= adhesive["spread"] < 1.0:
        violations.append("adhesive.spread: must lie in [0, 1)")

    loading = cfg["loading"]
    if loading["steps"] < 1:
        violations.append("loading.steps: must be at least 1")
    if not loading["tau"] > 0:
        violations.append("loading.tau: must be positive")
    if loading["schedule"] not in SCHEDULES:
        violations.append(f"loading.schedule: must be one of {SCHEDULES}")

    objective = cfg["objective"]
    if objective["data"] is not None and not isinstance(objective["data"], str):
        violations.append("objective.data: must be a file path or null")
    if objective["zeta"] < 0:
        violations.append("objective.zeta: must be non-negative")
    for key in ("noise_u", "noise_z", "tikhonov_weight"):
        if objective[key] < 0:
            violations.append(f"objective.{key}: must be non-negative")

    for name in FIELDS:
        pair = cfg["bounds"][name]
        if len(pair) != 2 or not all(_is_number(v) for v in pair):
            violations.append(f"bounds.{name}: expected [lower, upper]")
        elif not 0 < pair[0] < pair[1]:
            violations.append(f"bounds.{name}: need 0 < lower < upper")

    for key in ("qp", "cone", "stationarity", "fd_step"):
        if not cfg["tolerances"][key] > 0:
            violations.append(f"tolerances.{key}: must be positive")
    for key in ("branch_budget", "enumerate_budget"):
        if cfg["tolerances"][key] < 1:
            violations.append(f"tolerances.{key}: must be at least 1")
    if cfg["branch"] not in POLICIES:
        violations.append(f"branch: must be one of {POLICIES}")


def _check_phases(cfg: Dict[str, Any], violations: List[str]) -> None:
    if not cfg["phases"]:
        violations.append("phases: at least one phase is required")
        return
    for n, phase in enumerate(cfg["phases"], start=1):
        if phase["algorithm"] not in ALGORITHMS:
            violations.append(f"phases[{n}].algorithm: must be one of {ALGORITHMS}")
        if phase["budget"] < 1:
            violations.append(f"phases[{n}].budget: must be at least 1")
        if isinstance(phase["grouping"], int) and phase["grouping"] < 1:
            violations.append(f"phases[{n}].grouping: block size must be at least 1")
    if any(v.startswith("phases") or v.startswith("mesh") for v in violations):
        return
    n_nodes = cfg["mesh"]["contact_nodes"] or cfg["mesh"]["nx"]
    groupings = [Grouping.from_spec(p["grouping"], n_nodes) for p in cfg["phases"]]
    for n, (coarse, fine) in enumerate(zip(groupings, groupings[1:]), start=2):
        if not coarse.is_refined_by(fine):
            violations.append(f"phases[{n}].grouping: does not refine phase {n - 1}")


def config_from_dict(data: Any, source: Optional[str] = None) -> ExperimentConfig:
    """
    Validate a parsed configuration and fill in defaults.

    Raises:
        ConfigValidationError: listing every violation found.
    """
    if not isinstance(data, dict):
        raise ConfigValidationError(["top level: expected a JSON object"])
    violations: List[str] = []
    scalars = {k: v for k, v in DEFAULTS.items() if k != "phases"}
    user = {k: v for k, v in data.items() if k != "phases"}
    merged = _merge(user, scalars, "", violations, "")
    merged["phases"] = _merge_phases(data["phases"], violations) if "phases" in data else copy.deepcopy(DEFAULTS["phases"])
    mesh_user = user.get("mesh")
    if not violations and not (isinstance(mesh_user, dict) and "contact_nodes" in mesh_user):
        # the default contact width never exceeds the bottom edge
        mesh = merged["mesh"]
        mesh["contact_nodes"] = min(mesh["contact_nodes"], mesh["nx"])
    if not violations:
        _check_ranges(merged, violations)
        _check_phases(merged, violations)
    if source is not None and not violations and merged["objective"]["data"] is not None:
        path = pathlib.Path(merged["objective"]["data"])
        if not path.is_absolute():
            path = pathlib.Path(source).parent.joinpath(path)
        if not path.exists():
            violations.append(f"objective.data: file {path} does not exist")
    if violations:
        raise ConfigValidationError(violations)
    return ExperimentConfig(source=source, **merged)


def load_config(path: pathlib.Path) -> ExperimentConfig:
    """
    Read and validate a JSON configuration.

    Raises:
        ConfigParseError: empty or malformed file, with line and column.
        ConfigValidationError: schema violations, all of them.
    """
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"Cannot read config {path}: {e.strerror}")
    if not text.strip():
        raise ConfigParseError(f"Config {path} is empty", line=1, column=1)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"Invalid JSON in {path}: {e.msg}", line=e.lineno, column=e.colno)
    cfg = config_from_dict(data, source=str(path))
    logger.info(f"Loaded config {path}")
    return cfg


def save_config(cfg: ExperimentConfig, path: pathlib.Path) -> pathlib.Path:
    """Write the full (defaults included) configuration as JSON."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.as_dict(), indent=2), encoding="utf-8")
    return path


def parse_phase_numbers(text: str) -> Tuple[int, ...]:
    """'1,2,4' -> (1, 2, 4)."""
    try:
        numbers = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigParseError(f"Phase list must be comma-separated integers, got '{text}'")
    if not numbers:
        raise ConfigParseError("Phase list is empty")
    return numbers
