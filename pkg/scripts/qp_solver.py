"""
scripts/qp_solver.py

Strictly convex quadratic programs with bound constraints

    minimize 1/2 x^T H x + c^T x   subject to   lo <= x <= hi

solved by a primal active-set method. The contact problem of each time step
is the special case lo = 0 on the normal DOFs and -inf elsewhere; the
delamination problem is the box [0, z_prev].

Multiplier convention: lambda_i = (H x + c)_i on an active bound and 0
elsewhere, so lambda >= 0 at an active lower bound, lambda <= 0 at an active
upper bound, and stationarity reads H x + c - lambda = 0.
"""

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from scripts.errors import DomainError, NotPositiveDefiniteError, QPConvergenceError
from utils.logger import logger

INACTIVE = 0
LOWER = 1
UPPER = 2

DEFAULT_TOL = 1e-10
BIACTIVE_FACTOR = 10.0


@dataclass(frozen=True)
class BoxQP:
    """Data of a bound-constrained QP; bounds may be +-inf."""
    H: np.ndarray
    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.c).size
        for name in ("lo", "hi"):
            value = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,)).copy()
            object.__setattr__(self, name, value)
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).ravel())
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float).reshape(n, n))
        if np.any(self.lo > self.hi):
            bad = np.flatnonzero(self.lo > self.hi).tolist()
            raise DomainError(f"Lower bound exceeds upper bound at coordinates {bad}.")

    @property
    def n(self) -> int:
        return self.c.size

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.c @ x)

    def multiplier_tolerance(self, tol: float) -> float:
        return BIACTIVE_FACTOR * tol * (np.max(np.abs(self.c), initial=0.0) + 1.0)

    def gap_tolerance(self, x: np.ndarray, tol: float) -> float:
        bounds = np.concatenate([self.lo, self.hi])
        finite = np.abs(bounds[np.isfinite(bounds)])
        scale = np.max(np.abs(x), initial=0.0) + np.max(finite, initial=0.0)
        return BIACTIVE_FACTOR * tol * scale


@dataclass(frozen=True)
class ContactQP:
    """Contact-step QP: coordinates in `constrained` must stay non-negative."""
    H: np.ndarray
    c: np.ndarray
    constrained: np.ndarray

    def as_box(self) -> BoxQP:
        n = np.asarray(self.c).size
        lo = np.full(n, -np.inf)
        lo[np.asarray(self.constrained, dtype=int)] = 0.0
        return BoxQP(self.H, self.c, lo, np.full(n, np.inf))


@dataclass(frozen=True)
class QPSolution:
    """
    Minimizer, multipliers and activity record of a bound-constrained QP.

    `activity` holds INACTIVE, LOWER or UPPER per coordinate; `biactive` flags
    active coordinates with a vanishing multiplier and inactive coordinates
    sitting on a bound.
    """
    x: np.ndarray
    multipliers: np.ndarray
    activity: np.ndarray
    biactive: np.ndarray
    iterations: int
    objective: float
    residual: float = 0.0
    notes: dict = field(default_factory=dict)

    def active(self) -> np.ndarray:
        return self.activity != INACTIVE

    def strongly_active(self) -> np.ndarray:
        return self.active() & ~self.biactive


def _factor(H_ff: np.ndarray):
    try:
        return cho_factor(H_ff, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise NotPositiveDefiniteError(f"Hessian block of size {H_ff.shape[0]} is not positive definite: {e}")


def _finish(problem: BoxQP, x: np.ndarray, working: np.ndarray, iterations: int, tol: float) -> QPSolution:
    g = problem.H @ x + problem.c
    fixed = problem.lo == problem.hi
    activity = np.where(working == 0, INACTIVE, np.where(working < 0, LOWER, UPPER))
    # a pinched coordinate is reported on the side its multiplier points to
    activity = np.where(fixed & (g < 0), UPPER, activity)
    activity = np.where(fixed & (g >= 0), LOWER, activity)
    multipliers = np.where(activity != INACTIVE, g, 0.0)

    lam_tol = problem.multiplier_tolerance(tol)
    gap_tol = problem.gap_tolerance(x, tol)
    on_bound = (np.abs(x - problem.lo) <= gap_tol) | (np.abs(problem.hi - x) <= gap_tol)
    biactive = np.where(activity != INACTIVE, np.abs(multipliers) <= lam_tol, on_bound)
    biactive &= ~fixed
    return QPSolution(x=x, multipliers=multipliers, activity=activity, biactive=biactive,
                      iterations=iterations, objective=problem.objective(x),
                      residual=kkt_residual(problem, x))


def solve_box_qp(problem: BoxQP, tol: float = DEFAULT_TOL, x0: Optional[np.ndarray] = None,
                 max_iter: Optional[int] = None) -> QPSolution:
    """
    Primal active-set method for a strictly convex box QP.

    Parameters:
        problem (BoxQP): H (SPD), c and bounds.
        tol (float): relative KKT tolerance.
        x0 (np.ndarray, optional): warm start; it is clipped into the box.
        max_iter (int, optional): iteration cap, default 20 * (n + 1).

    Returns:
        QPSolution: the unique minimizer with multipliers and activity record.

    Raises:
        NotPositiveDefiniteError: if a reduced Hessian block fails to factorize.
        QPConvergenceError: if the iteration cap is reached.
    """
    n = problem.n
    lo, hi, H, c = problem.lo, problem.hi, problem.H, problem.c
    max_iter = 20 * (n + 1) if max_iter is None else max_iter
    start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x = np.clip(start, lo, hi)

    # working set: -1 at lower bound, +1 at upper bound, 0 free
    working = np.zeros(n, dtype=int)
    working[x == lo] = -1
    working[(x == hi) & (working == 0)] = 1
    fixed = lo == hi
    lam_tol = problem.multiplier_tolerance(tol)

    for iteration in range(1, max_iter + 1):
        free = np.flatnonzero(working == 0)
        target = x.copy()
        if free.size:
            bound = np.flatnonzero(working != 0)
            rhs = -c[free] - H[np.ix_(free, bound)] @ x[bound]
            target[free] = cho_solve(_factor(H[np.ix_(free, free)]), rhs)
        d = target - x

        step, blocking, blocking_side = 1.0, -1, 0
        for i in free:
            if d[i] < 0 and np.isfinite(lo[i]):
                ratio = (lo[i] - x[i]) / d[i]
                if ratio < step or (ratio == step and blocking < 0):
                    step, blocking, blocking_side = ratio, i, -1
            elif d[i] > 0 and np.isfinite(hi[i]):
                ratio = (hi[i] - x[i]) / d[i]
                if ratio < step or (ratio == step and blocking < 0):
                    step, blocking, blocking_side = ratio, i, 1
        step = max(step, 0.0)
        x = x + step * d
        if blocking >= 0:
            x[blocking] = lo[blocking] if blocking_side < 0 else hi[blocking]
            working[blocking] = blocking_side
            continue

        g = H @ x + c
        violation = np.zeros(n)
        violation[working < 0] = -g[working < 0]
        violation[working > 0] = g[working > 0]
        violation[fixed] = 0.0
        worst = int(np.argmax(violation)) if n else 0
        if n == 0 or violation[worst] <= lam_tol:
            solution = _finish(problem, x, working, iteration, tol)
            logger.trace(f"box QP n={n} converged in {iteration} iterations, "
                         f"objective {solution.objective:.6e}")
            return solution
        working[worst] = 0

    raise QPConvergenceError(f"Active-set method did not converge in {max_iter} iterations (n={n}).")


def solve_contact_qp(problem: ContactQP, tol: float = DEFAULT_TOL,
                     x0: Optional[np.ndarray] = None) -> QPSolution:
    """
    Contact QP with non-negative normal coordinates; the returned multipliers are
    non-negative on the constrained coordinates and zero elsewhere.
    """
    return solve_box_qp(problem.as_box(), tol=tol, x0=x0)


def kkt_residual(problem: BoxQP, x: np.ndarray) -> float:
    """
    Relative KKT residual of a candidate point: the larger of the stationarity
    violation scaled by ||c||_inf + 1 and the bound violation scaled by the
    size of x and of the finite bounds.
    """
    x = np.asarray(x, dtype=float)
    if problem.n == 0:
        return 0.0
    g = problem.H @ x + problem.c
    gap_tol = problem.gap_tolerance(x, DEFAULT_TOL)
    at_lo = x - problem.lo <= gap_tol
    at_hi = problem.hi - x <= gap_tol
    stationarity = np.where(at_lo & at_hi, 0.0,
                            np.where(at_lo, np.maximum(-g, 0.0),
                                     np.where(at_hi, np.maximum(g, 0.0), np.abs(g))))
    infeasible = np.maximum(np.maximum(problem.lo - x, x - problem.hi), 0.0)
    bounds = np.concatenate([problem.lo, problem.hi])
    x_scale = np.max(np.abs(x)) + np.max(np.abs(bounds[np.isfinite(bounds)]), initial=0.0)
    primal = np.max(infeasible) / max(x_scale, np.finfo(float).tiny)
    return float(max(np.max(stationarity) / (np.max(np.abs(problem.c)) + 1.0), primal))


def solve_box_qp_by_enumeration(problem: BoxQP, tol: float = 1e-9) -> QPSolution:
    """
    Reference solver: try every free / lower / upper pattern (3^n of them), keep
    the patterns whose equality-constrained solution is feasible and has
    multipliers of the right sign, and return the one with least objective.
    Only meant for small n.
    """
    n = problem.n
    lo, hi, H, c = problem.lo, problem.hi, problem.H, problem.c
    best_x, best_working, best_obj = None, None, np.inf
    lam_tol = tol * (np.max(np.abs(c), initial=0.0) + 1.0)
    for pattern in itertools.product((0, -1, 1), repeat=n):
        working = np.array(pattern, dtype=int)
        if np.any((working < 0) & ~np.isfinite(lo)) or np.any((working > 0) & ~np.isfinite(hi)):
            continue
        x = np.where(working < 0, lo, np.where(working > 0, hi, 0.0))
        free = np.flatnonzero(working == 0)
        if free.size:
            bound = np.flatnonzero(working != 0)
            try:
                x[free] = np.linalg.solve(H[np.ix_(free, free)], -c[free] - H[np.ix_(free, bound)] @ x[bound])
            except np.linalg.LinAlgError:
                continue
        gap = tol * (1.0 + np.max(np.abs(x), initial=0.0))
        if np.any(x < lo - gap) or np.any(x > hi + gap):
            continue
        g = H @ x + c
        if np.any(g[working < 0] < -lam_tol) or np.any(g[working > 0] > lam_tol):
            continue
        obj = problem.objective(x)
        if obj < best_obj:
            best_x, best_working, best_obj = x, working, obj
    if best_x is None:
        raise QPConvergenceError(f"No KKT pattern found by enumeration (n={n}).")
    return _finish(problem, np.clip(best_x, lo, hi), best_working, 3 ** n, tol)


def random_box_qp(rng: np.random.Generator, n: int, lo: Sequence[float] = None,
                  hi: Sequence[float] = None, conditioning: float = 10.0) -> BoxQP:
    """Random SPD instance with eigenvalues in [1, conditioning]; used by the QP oracle checks."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.linspace(1.0, conditioning, n)
    H = Q @ np.diag(eig) @ Q.T
    H = 0.5 * (H + H.T)
    c = 3.0 * rng.standard_normal(n)
    lo = -rng.uniform(0.0, 1.0, n) if lo is None else lo
    hi = rng.uniform(0.0, 1.0, n) if hi is None else hi
    return BoxQP(H, c, lo, hi)
