"""
scripts/adjoint/gradient_check.py

Directional comparison of the adjoint subgradient with finite differences of
the objective. Works with any problem exposing `evaluate(x)` (value and
gradient) and `value(x)`.
"""

from typing import Optional

import numpy as np
import pandas as pd

from utils.logger import logger

COLUMNS = ["direction", "analytic", "finite_difference", "relative_error", "stencil"]


def central_difference(value, x: np.ndarray, d: np.ndarray, h: float) -> float:
    return (value(x + h * d) - value(x - h * d)) / (2.0 * h)


def five_point_difference(value, x: np.ndarray, d: np.ndarray, h: float) -> float:
    return (-value(x + 2 * h * d) + 8 * value(x + h * d) - 8 * value(x - h * d) + value(x - 2 * h * d)) / (12.0 * h)


def gradient_check(problem, x: np.ndarray, directions: Optional[np.ndarray] = None, h: float = 1e-6,
                   fallback_tol: float = 1e-5) -> pd.DataFrame:
    """
    Compare g.d with difference quotients of the objective along each direction.

    Parameters:
        problem: object with `evaluate(x)` returning something with `.gradient`,
            and `value(x)` returning the objective.
        x (np.ndarray): evaluation point.
        directions (np.ndarray, optional): one direction per row; unit vectors when omitted.
        h (float): step size.
        fallback_tol (float): relative error above which the 5-point stencil is used.

    Returns:
        pd.DataFrame: columns direction, analytic, finite_difference,
        relative_error, stencil ("central" or "five-point").
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(problem.evaluate(x).gradient, dtype=float)
    directions = np.eye(x.size) if directions is None else np.atleast_2d(np.asarray(directions, dtype=float))
    floor = 1e-10 * (1.0 + np.linalg.norm(g))
    rows = []
    for n, d in enumerate(directions):
        analytic = float(g @ d)
        fd = central_difference(problem.value, x, d, h)
        error = abs(analytic - fd) / max(abs(analytic), abs(fd), floor)
        stencil = "central"
        if error > fallback_tol:
            fd5 = five_point_difference(problem.value, x, d, h)
            error5 = abs(analytic - fd5) / max(abs(analytic), abs(fd5), floor)
            if error5 < error:
                fd, error, stencil = fd5, error5, "five-point"
        rows.append({"direction": n, "analytic": analytic, "finite_difference": fd,
                     "relative_error": error, "stencil": stencil})
    frame = pd.DataFrame(rows, columns=COLUMNS)
    if len(frame):
        logger.info(f"Gradient check over {len(frame)} directions: max relative error "
                    f"{frame['relative_error'].max():.3e}")
    return frame
