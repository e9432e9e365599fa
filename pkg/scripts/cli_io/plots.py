"""
scripts/cli_io/plots.py

SVG figures of a run: objective history with phase separators, parameter
profiles along the contact boundary and deformation frames with the
delamination state of every contact node (circle intact, asterisk fully
delaminated, square in between).
"""

import pathlib
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import seaborn as sns  # noqa: E402
from matplotlib.tri import Triangulation  # noqa: E402

from scripts.adhesive_model import FIELDS  # noqa: E402
from scripts.cli_io.results import phase_params_frame, trace_frame  # noqa: E402
from scripts.fem_core import DofPartition, Mesh2D, ReducedOperators, reconstruct_displacement  # noqa: E402
from scripts.forward_sim import Trajectory  # noqa: E402
from scripts.identification.phases import IdentificationReport  # noqa: E402
from utils.logger import logger  # noqa: E402

sns.set_theme(style="whitegrid")

FIELD_LABELS = {"alpha_f": r"$\alpha_F$ [J/m$^2$]", "kappa_n": r"$\kappa_N$ [Pa/m]", "kappa_t": r"$\kappa_T$ [Pa/m]"}


def plot_objective(report: IdentificationReport, path: pathlib.Path) -> pathlib.Path:
    frame = trace_frame(report)
    fig, ax = plt.subplots(figsize=(7, 4))
    values = frame["objective"].to_numpy(dtype=float)
    iterations = frame["iteration"].to_numpy(dtype=float)
    positive = values > 0
    if positive.any():
        sns.lineplot(x=iterations[positive], y=values[positive], ax=ax, color="tab:blue")
        ax.set_yscale("log")
    for it in frame.loc[frame["event"] == "phase_boundary", "iteration"]:
        ax.axvline(it, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return pathlib.Path(path)


def plot_params(report: IdentificationReport, path: pathlib.Path) -> pathlib.Path:
    """Final per-node parameters next to the planted ones, one panel per field."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    final = phase_params_frame(report.phases[-1]) if report.phases else None
    planted = None
    if report.planted is not None:
        n = len(report.planted_grouping)
        per_field = np.asarray(report.planted).reshape(3, -1)
        labels = np.asarray(report.planted_grouping)
        planted = {name: per_field[f][labels] for f, name in enumerate(FIELDS)}
        nodes = np.arange(n)
    for ax, name in zip(axes, FIELDS):
        if final is not None:
            ax.plot(final["node"], final[name], marker="o", label="identified")
        if planted is not None:
            ax.plot(nodes, planted[name], marker="x", linestyle=":", label="desired")
        ax.set_xlabel("contact node")
        ax.set_ylabel(FIELD_LABELS[name])
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return pathlib.Path(path)


def plot_frames(mesh: Mesh2D, partition: DofPartition, reduced: ReducedOperators, traj: Trajectory,
                out_dir: pathlib.Path, magnification: float = 50.0, every: int = 1,
                z_tol: float = 1e-6) -> List[pathlib.Path]:
    """One SVG per selected step with the deformed mesh, displacements scaled by `magnification`."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for k in range(0, traj.steps + 1, max(1, every)):
        disp = reconstruct_displacement(mesh, partition, reduced, traj.u[k], traj.loading.w[k])
        xy = mesh.nodes + magnification * disp
        fig, ax = plt.subplots(figsize=(4, 5))
        ax.triplot(Triangulation(xy[:, 0], xy[:, 1], mesh.triangles), color="0.6", linewidth=0.5)
        contact_xy = xy[mesh.contact_nodes]
        z = traj.z[k]
        for mask, marker, label in ((z >= 1.0 - z_tol, "o", "intact"),
                                    (z <= z_tol, "*", "delaminated"),
                                    ((z > z_tol) & (z < 1.0 - z_tol), "s", "partial")):
            if mask.any():
                ax.scatter(contact_xy[mask, 0], contact_xy[mask, 1], marker=marker, s=40, label=label, zorder=3)
        ax.set_aspect("equal")
        ax.set_title(f"step {k}")
        ax.legend(loc="upper right", fontsize="small")
        path = out_dir.joinpath(f"frame_{k:03d}.svg")
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    logger.info(f"Wrote {len(written)} deformation frames to {out_dir}")
    return written


def emit_plots(report: Optional[IdentificationReport], out_dir: pathlib.Path, mesh: Mesh2D = None,
               partition: DofPartition = None, reduced: ReducedOperators = None,
               trajectory: Optional[Trajectory] = None, magnification: float = 50.0) -> List[pathlib.Path]:
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if report is not None:
        written.append(plot_objective(report, out_dir.joinpath("objective.svg")))
        written.append(plot_params(report, out_dir.joinpath("params.svg")))
    if trajectory is not None and mesh is not None:
        written.extend(plot_frames(mesh, partition, reduced, trajectory, out_dir.joinpath("frames"), magnification))
    return written
