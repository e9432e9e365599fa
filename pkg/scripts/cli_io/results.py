"""
scripts/cli_io/results.py

Result files of a run, all written with 17 significant digits:

    trace.csv             iteration, phase, objective, event (iterate | phase_boundary)
    params_phase{n}.csv   node, alpha_f, kappa_n, kappa_t for phase n
    summary.csv           field means and objective: starting, phase 1..n, desired
    trajectory.csv        step, load, z_<i>, uN_<i>, uT_<i> per contact node i
    report.json           the whole report

trajectory.csv is also the import format for measured data.
"""

import json
import pathlib
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from scripts.adhesive_model import FIELDS, Grouping
from scripts.errors import ConfigParseError
from scripts.forward_sim import Trajectory
from scripts.identification.phases import IdentificationReport, PhaseResult
from utils.logger import logger

FLOAT_FORMAT = "%.17g"
TRACE_COLUMNS = ["iteration", "phase", "objective", "event"]
PARAM_COLUMNS = ["node", *FIELDS]


def _write_csv(frame: pd.DataFrame, path: pathlib.Path) -> pathlib.Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e.strerror}") from e
    logger.debug(f"Wrote {path}")
    return path


def trace_frame(report: IdentificationReport) -> pd.DataFrame:
    return pd.DataFrame(report.trace, columns=TRACE_COLUMNS)


def phase_params_frame(phase: PhaseResult) -> pd.DataFrame:
    """Per-node values of one phase result."""
    grouping = Grouping(tuple(phase.grouping))
    per_field = np.asarray(phase.params, dtype=float).reshape(3, -1)
    P = grouping.prolongation()
    data = {"node": np.arange(grouping.n_nodes)}
    data.update({name: P @ per_field[f] for f, name in enumerate(FIELDS)})
    return pd.DataFrame(data, columns=PARAM_COLUMNS)


# ---------------------------------------------------------------------------
# report.json
# ---------------------------------------------------------------------------

def _listify(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, list)):
        return [_listify(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def report_to_dict(report: IdentificationReport) -> Dict[str, Any]:
    phases = [{key: _listify(getattr(p, key)) for key in PhaseResult.__dataclass_fields__} for p in report.phases]
    return {
        "seed": report.seed,
        "initial_params": _listify(report.initial_params),
        "initial_grouping": _listify(report.initial_grouping),
        "initial_value": float(report.initial_value),
        "phases": phases,
        "trace": [dict(row) for row in report.trace],
        "planted": _listify(report.planted),
        "planted_grouping": _listify(report.planted_grouping),
        "seconds": float(report.seconds),
    }


def report_from_dict(data: Dict[str, Any]) -> IdentificationReport:
    phases = []
    for p in data["phases"]:
        fields = dict(p)
        fields["x"] = np.asarray(fields["x"], dtype=float)
        fields["params"] = np.asarray(fields["params"], dtype=float)
        fields["grouping"] = tuple(fields["grouping"])
        phases.append(PhaseResult(**fields))
    planted = data.get("planted")
    return IdentificationReport(
        seed=data["seed"],
        initial_params=np.asarray(data["initial_params"], dtype=float),
        initial_grouping=tuple(data["initial_grouping"]),
        initial_value=data["initial_value"],
        phases=phases,
        trace=list(data["trace"]),
        planted=None if planted is None else np.asarray(planted, dtype=float),
        planted_grouping=None if data.get("planted_grouping") is None else tuple(data["planted_grouping"]),
        seconds=data.get("seconds", 0.0),
    )


def load_report(path: pathlib.Path) -> IdentificationReport:
    path = pathlib.Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"Invalid report {path}: {e.msg}", line=e.lineno, column=e.colno)
    return report_from_dict(data)


def write_json(data: Dict[str, Any], path: pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# trajectory.csv
# ---------------------------------------------------------------------------

def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    M = traj.z.shape[1]
    data: Dict[str, Any] = {"step": np.arange(traj.steps + 1), "load": traj.loading.magnitude()}
    for i in range(M):
        data[f"z_{i}"] = traj.z[:, i]
    for i in range(M):
        data[f"uN_{i}"] = traj.u[:, 2 * i]
        data[f"uT_{i}"] = traj.u[:, 2 * i + 1]
    return pd.DataFrame(data)


def write_trajectory_csv(traj: Trajectory, path: pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return _write_csv(trajectory_frame(traj), path)


def read_trajectory_csv(path: pathlib.Path) -> Tuple[np.ndarray, np.ndarray]:
    """
    Contact displacements (K + 1, 2M) in (u_N, u_T) node order and
    delamination (K + 1, M) from a trajectory CSV.

    Raises:
        ConfigParseError: if a required column is missing.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    z_cols = sorted((c for c in frame.columns if c.startswith("z_")), key=lambda c: int(c[2:]))
    M = len(z_cols)
    needed = [f"uN_{i}" for i in range(M)] + [f"uT_{i}" for i in range(M)]
    missing = [c for c in needed if c not in frame.columns]
    if M == 0 or missing:
        raise ConfigParseError(f"Trajectory file {path} lacks columns {missing or ['z_0']}")
    frame = frame.sort_values("step") if "step" in frame.columns else frame
    z = frame[z_cols].to_numpy(dtype=float)
    u = np.empty((len(frame), 2 * M))
    for i in range(M):
        u[:, 2 * i] = frame[f"uN_{i}"].to_numpy(dtype=float)
        u[:, 2 * i + 1] = frame[f"uT_{i}"].to_numpy(dtype=float)
    return u, z


# ---------------------------------------------------------------------------
# Everything at once
# ---------------------------------------------------------------------------

def emit_results(report: IdentificationReport, out_dir: pathlib.Path,
                 trajectory: Optional[Trajectory] = None) -> Dict[str, pathlib.Path]:
    """
    Write the tabular and JSON outputs of an identification run.

    Returns:
        dict: file name -> path of every file written.
    """
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {
        "trace.csv": _write_csv(trace_frame(report), out_dir.joinpath("trace.csv")),
        "summary.csv": _write_csv(report.summary_table(), out_dir.joinpath("summary.csv")),
    }
    if not report.phases:
        written["params_phase1.csv"] = _write_csv(pd.DataFrame(columns=PARAM_COLUMNS),
                                                  out_dir.joinpath("params_phase1.csv"))
    for phase in report.phases:
        name = f"params_phase{phase.index}.csv"
        written[name] = _write_csv(phase_params_frame(phase), out_dir.joinpath(name))
    if trajectory is not None:
        written["trajectory.csv"] = write_trajectory_csv(trajectory, out_dir.joinpath("trajectory.csv"))
    written["report.json"] = write_json(report_to_dict(report), out_dir.joinpath("report.json"))
    logger.info(f"Wrote {len(written)} result files to {out_dir}")
    return written
