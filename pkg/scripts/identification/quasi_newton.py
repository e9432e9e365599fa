"""
scripts/identification/quasi_newton.py

Nonsmooth quasi-Newton phase on the unit box [0, 1]^n.

BFGS on the inverse Hessian with a weak Wolfe bisection line search. Trial
points are clipped to the box and coordinates held at a bound by the gradient
are frozen. When subgradients disagree repeatedly inside a small radius the
method takes a gradient-sampling step instead: the minimum-norm convex
combination of gradients sampled around the iterate gives the direction.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import nnls

from scripts.errors import InvalidParameterError
from utils.logger import logger

ARMIJO_C1 = 1e-4
WOLFE_C2 = 0.9
MAX_LINE_SEARCH = 40
DISAGREEMENT_LIMIT = 2


@dataclass
class QuasiNewtonResult:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int = 0
    evaluations: int = 0
    history: List[float] = field(default_factory=list)
    stop_reason: str = "budget"
    warning: bool = False
    sampling_steps: int = 0


def projected_gradient(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return x - np.clip(x - g, 0.0, 1.0)


def frozen_coordinates(x: np.ndarray, g: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Coordinates at a bound with the gradient pushing outward."""
    return ((x <= tol) & (g > 0)) | ((x >= 1.0 - tol) & (g < 0))


def min_norm_combination(gradients: np.ndarray) -> np.ndarray:
    """
    Minimum-norm element of the convex hull of the rows of `gradients`,
    from an NNLS problem with a heavily weighted sum-to-one row.
    """
    G = np.asarray(gradients, dtype=float).T
    weight = 1e3 * (1.0 + np.max(np.abs(G), initial=0.0))
    A = np.vstack([G, weight * np.ones((1, G.shape[1]))])
    b = np.concatenate([np.zeros(G.shape[0]), [weight]])
    lam, _ = nnls(A, b)
    total = lam.sum()
    if total <= 0:
        lam = np.full(G.shape[1], 1.0 / G.shape[1])
    else:
        lam /= total
    return G @ lam


def phase_quasinewton(evaluate: Callable, x0: np.ndarray, budget: int = 100, gtol: float = 1e-8,
                      seed: int = 0, sampling_radius: float = 1e-3,
                      threshold: Optional[float] = None) -> QuasiNewtonResult:
    """
    Minimize over [0, 1]^n starting from x0.

    Parameters:
        evaluate (callable): x -> object with `value`, `gradient` and optionally
            `disagreements` (number of branch gradients differing from the returned one).
        x0 (np.ndarray): start point, clipped to the box.
        budget (int): maximal number of iterations.
        gtol (float): tolerance on the norm of the projected gradient.
        seed (int): seed for the gradient-sampling points.
        sampling_radius (float): radius of the disagreement region and of the sampling ball.
        threshold (float, optional): stop as soon as the objective is at or below it.

    Returns:
        QuasiNewtonResult: last accepted iterate; `warning` is set when the line
        search failed and the iterate was returned early.
    """
    if budget < 0:
        raise InvalidParameterError(f"Budget must be non-negative, got {budget}.")
    rng = np.random.Generator(np.random.PCG64(seed))
    x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    n = x.size
    current = evaluate(x)
    f, g = float(current.value), np.asarray(current.gradient, dtype=float)
    evaluations = 1
    history = [f]
    H = np.eye(n)
    radius = sampling_radius
    disagreement_points: List[np.ndarray] = []
    if getattr(current, "disagreements", 0):
        disagreement_points.append(x.copy())
    result = QuasiNewtonResult(x=x, value=f, gradient=g, history=history)

    for iteration in range(budget):
        if threshold is not None and f <= threshold:
            result.stop_reason = "threshold"
            break
        if np.linalg.norm(projected_gradient(x, g)) <= gtol:
            result.stop_reason = "converged"
            break

        nearby = sum(np.linalg.norm(p - x) <= radius for p in disagreement_points)
        if nearby >= DISAGREEMENT_LIMIT:
            step = _sampling_step(evaluate, x, f, g, radius, rng, gtol)
            evaluations += step["evaluations"]
            result.sampling_steps += 1
            if step["stationary"]:
                result.stop_reason = "sampled-stationary"
                break
            if step["x"] is None:
                radius *= 0.5
                if radius < 1e-10:
                    result.stop_reason, result.warning = "sampling-failed", True
                    logger.warning("Gradient sampling found no descent; returning the current iterate.")
                    break
                continue
            x, f, g = step["x"], step["value"], step["gradient"]
            H = np.eye(n)
            disagreement_points = []
            history.append(f)
            result.iterations = iteration + 1
            continue

        frozen = frozen_coordinates(x, g)
        d = -(H @ np.where(frozen, 0.0, g))
        d[frozen] = 0.0
        if g @ d >= -1e-16 * np.linalg.norm(g) * np.linalg.norm(d) or not np.any(d):
            H = np.eye(n)
            d = np.where(frozen, 0.0, -g)

        accepted, ls_evaluations = _weak_wolfe(evaluate, x, f, g, d)
        evaluations += ls_evaluations
        if accepted is None:
            result.stop_reason, result.warning = "line-search", True
            logger.warning(f"Line search failed at iteration {iteration}; returning objective {f:.6e}.")
            break
        x_new, trial = accepted
        f_new, g_new = float(trial.value), np.asarray(trial.gradient, dtype=float)
        s, y = x_new - x, g_new - g

        flip = (np.linalg.norm(s) <= radius and g @ g_new < -0.5 * np.linalg.norm(g) * np.linalg.norm(g_new))
        if getattr(trial, "disagreements", 0) or flip:
            disagreement_points.append(x_new.copy())

        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        result.iterations = iteration + 1
        logger.debug(f"quasi-Newton iteration {iteration + 1}: objective {f:.6e}, "
                     f"|pg| {np.linalg.norm(projected_gradient(x, g)):.3e}")

    result.x, result.value, result.gradient = x, f, g
    result.evaluations = evaluations
    logger.info(f"Quasi-Newton phase stopped ({result.stop_reason}) after {result.iterations} iterations, "
                f"objective {f:.6e}")
    return result


def _weak_wolfe(evaluate: Callable, x: np.ndarray, f: float, g: np.ndarray, d: np.ndarray):
    """
    Bisection for a step satisfying the Armijo and weak Wolfe conditions along
    the clipped path x + t d. Returns ((x_t, evaluation), count) or (None, count).
    """
    lo, hi, t = 0.0, np.inf, 1.0
    armijo_point = None
    previous_x = None
    count = 0
    for _ in range(MAX_LINE_SEARCH):
        x_t = np.clip(x + t * d, 0.0, 1.0)
        s = x_t - x
        if not np.any(s) or (previous_x is not None and np.array_equal(x_t, previous_x)):
            break
        previous_x = x_t
        trial = evaluate(x_t)
        count += 1
        slope = g @ s
        if not np.isfinite(trial.value) or trial.value > f + ARMIJO_C1 * slope:
            hi = t
        else:
            armijo_point = (x_t, trial)
            if np.asarray(trial.gradient) @ s >= WOLFE_C2 * slope:
                return armijo_point, count
            lo = t
        t = 0.5 * (lo + hi) if np.isfinite(hi) else 2.0 * t
    return armijo_point, count


def _sampling_step(evaluate: Callable, x: np.ndarray, f: float, g: np.ndarray, radius: float,
                   rng: np.random.Generator, gtol: float) -> dict:
    n = x.size
    points = [np.clip(x + radius * rng.uniform(-1.0, 1.0, size=n), 0.0, 1.0) for _ in range(n + 1)]
    gradients = [g] + [np.asarray(evaluate(p).gradient, dtype=float) for p in points]
    count = len(points)
    d = -min_norm_combination(np.array(gradients))
    d[frozen_coordinates(x, -d)] = 0.0
    if np.linalg.norm(d) <= gtol:
        return {"stationary": True, "x": None, "evaluations": count}
    t = 1.0
    for _ in range(30):
        x_t = np.clip(x + t * d, 0.0, 1.0)
        trial = evaluate(x_t)
        count += 1
        if trial.value < f - ARMIJO_C1 * t * float(d @ d):
            return {"stationary": False, "x": x_t, "value": float(trial.value),
                    "gradient": np.asarray(trial.gradient, dtype=float), "evaluations": count}
        t *= 0.5
    return {"stationary": False, "x": None, "evaluations": count}
