"""
scripts/identification/global_search.py

Derivative-free global phase: a particle swarm whose best particle is polished
by a coordinate pattern-search poll every generation.

Works in normalized coordinates on the unit box [0, 1]^n. Generation 0 is the
initial population; every later generation moves the swarm once and polls
+/- step along each coordinate around the swarm best, halving the step when
the poll does not improve.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from scripts.errors import InvalidParameterError
from utils.logger import logger

OMEGA, PHI_P, PHI_G = 0.5, 0.5, 0.5
DEFAULT_POPULATION = 20
DEFAULT_STAGNATION = 15
INITIAL_STEP = 0.25
MIN_STEP = 1e-9


@dataclass
class GlobalResult:
    x: np.ndarray
    value: float
    history: List[float] = field(default_factory=list)
    evaluations: int = 0
    generations: int = 0
    stop_reason: str = "budget"


def evaluate_batch(func: Callable[[np.ndarray], float], points: Sequence[np.ndarray],
                   max_workers: Optional[int] = None) -> np.ndarray:
    """Objective values of independent points, in order, on a thread pool."""
    if max_workers == 1 or len(points) <= 1:
        return np.array([func(p) for p in points], dtype=float)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return np.array(list(pool.map(func, points)), dtype=float)


def phase_global(func: Callable[[np.ndarray], float], dim: int, budget: int, seed: int,
                 threshold: Optional[float] = None, stagnation: int = DEFAULT_STAGNATION,
                 population: int = DEFAULT_POPULATION, x0: Optional[np.ndarray] = None,
                 max_workers: Optional[int] = None) -> GlobalResult:
    """
    Minimize func over [0, 1]^dim.

    Parameters:
        func (callable): objective of a normalized point.
        dim (int): number of coordinates.
        budget (int): number of generations including the initial one.
        seed (int): seed of the PCG64 generator; equal seeds give equal runs.
        threshold (float, optional): stop as soon as the best value is at or below it.
        stagnation (int): stop after this many generations without improvement.
        population (int): swarm size.
        x0 (np.ndarray, optional): placed as the first particle.
        max_workers (int, optional): thread cap for population evaluations.

    Returns:
        GlobalResult: best point, its value and the best value per generation.
    """
    if budget < 1 or population < 1 or dim < 1:
        raise InvalidParameterError(f"Need budget, population and dim >= 1, got {budget}, {population}, {dim}.")
    rng = np.random.Generator(np.random.PCG64(seed))

    x = rng.uniform(0.0, 1.0, size=(population, dim))
    if x0 is not None:
        x[0] = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    v = rng.uniform(-1.0, 1.0, size=(population, dim))
    fx = evaluate_batch(func, list(x), max_workers)
    evaluations = population

    p, fp = x.copy(), fx.copy()
    best = int(np.argmin(fp))
    g, fg = p[best].copy(), float(fp[best])
    history = [fg]
    logger.debug(f"global phase generation 0: best {fg:.6e}")

    step = INITIAL_STEP
    idle = 0
    reason = "budget"
    if threshold is not None and fg <= threshold:
        reason = "threshold"
    for generation in range(1, budget):
        if reason != "budget":
            break
        previous = fg

        rp = rng.uniform(size=(population, dim))
        rg = rng.uniform(size=(population, dim))
        v = OMEGA * v + PHI_P * rp * (p - x) + PHI_G * rg * (g - x)
        x = np.clip(x + v, 0.0, 1.0)
        fx = evaluate_batch(func, list(x), max_workers)
        evaluations += population
        better = fx < fp
        p[better], fp[better] = x[better], fx[better]
        best = int(np.argmin(fp))
        if fp[best] < fg:
            g, fg = p[best].copy(), float(fp[best])

        # pattern-search poll around the swarm best
        trials = []
        for i in range(dim):
            for sign in (-1.0, 1.0):
                trial = g.copy()
                trial[i] = np.clip(trial[i] + sign * step, 0.0, 1.0)
                trials.append(trial)
        f_trials = evaluate_batch(func, trials, max_workers)
        evaluations += len(trials)
        j = int(np.argmin(f_trials))
        if f_trials[j] < fg:
            g, fg = trials[j], float(f_trials[j])
        else:
            step *= 0.5

        history.append(fg)
        logger.debug(f"global phase generation {generation}: best {fg:.6e}, poll step {step:.2e}")
        idle = 0 if fg < previous else idle + 1
        if threshold is not None and fg <= threshold:
            reason = "threshold"
        elif idle >= stagnation:
            reason = "stagnation"
        elif step < MIN_STEP:
            reason = "step"

    logger.info(f"Global phase stopped ({reason}) after {len(history)} generations, "
                f"{evaluations} evaluations, best {fg:.6e}")
    return GlobalResult(x=g, value=fg, history=history, evaluations=evaluations,
                        generations=len(history), stop_reason=reason)
