"""
scripts/identification/phases.py

Staged identification: a plan of phases, each with its own parameter grouping
and optimizer, run in order with piecewise-constant lifting in between.

The default plan has four phases: one shared parameter triple searched
globally, the same triple refined by quasi-Newton, then pairs of contact nodes,
then one triple per node.
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from scripts.adhesive_model import FIELDS, AdhesiveParams, Grouping, lift_params
from scripts.errors import DelamidError, IncompatibleGroupingError, InvalidParameterError
from scripts.identification.global_search import DEFAULT_POPULATION, DEFAULT_STAGNATION, phase_global
from scripts.identification.objective import IdentificationProblem
from scripts.identification.quasi_newton import phase_quasinewton
from utils.logger import logger

ALGORITHMS = ("global", "quasi-newton")
GroupingSpec = Union[str, int]


@dataclass(frozen=True)
class PhaseSpec:
    """
    One phase of a plan.

    `grouping` is "uniform", "per_node" or a block size. `budget` counts
    generations for the global phase and iterations for quasi-Newton.
    """
    grouping: GroupingSpec = "uniform"
    algorithm: str = "global"
    budget: int = 50
    threshold: Optional[float] = None
    stagnation: int = DEFAULT_STAGNATION
    population: int = DEFAULT_POPULATION
    gtol: float = 1e-8

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidParameterError(f"Phase algorithm must be one of {ALGORITHMS}, got '{self.algorithm}'.")
        if self.budget < 1:
            raise InvalidParameterError(f"Phase budget must be at least 1, got {self.budget}.")


@dataclass(frozen=True)
class PhasePlan:
    phases: Sequence[PhaseSpec]

    @classmethod
    def default(cls) -> "PhasePlan":
        return cls((
            PhaseSpec("uniform", "global", budget=60),
            PhaseSpec("uniform", "quasi-newton", budget=100),
            PhaseSpec(2, "quasi-newton", budget=200),
            PhaseSpec("per_node", "quasi-newton", budget=300),
        ))

    def groupings(self, n_nodes: int) -> List[Grouping]:
        """
        Groupings of all phases.

        Raises:
            IncompatibleGroupingError: if a phase does not refine its predecessor.
        """
        groupings = [Grouping.from_spec(p.grouping, n_nodes) for p in self.phases]
        for n, (coarse, fine) in enumerate(zip(groupings, groupings[1:]), start=2):
            if not coarse.is_refined_by(fine):
                raise IncompatibleGroupingError(f"Phase {n} grouping does not refine phase {n - 1}.")
        return groupings

    def select(self, numbers: Sequence[int]) -> "PhasePlan":
        """Sub-plan with the given 1-based phase numbers, in plan order."""
        wanted = sorted(set(numbers))
        if not wanted or wanted[0] < 1 or wanted[-1] > len(self.phases):
            raise InvalidParameterError(f"Phase numbers must lie in 1..{len(self.phases)}, got {list(numbers)}.")
        return PhasePlan(tuple(self.phases[n - 1] for n in wanted))


def lift_grouping(values: np.ndarray, source: Grouping, target: Grouping) -> np.ndarray:
    """
    Piecewise-constant lift of a stacked slot vector (3 fields) from `source`
    to the finer `target` grouping.

    Raises:
        IncompatibleGroupingError: if target does not refine source.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (3 * source.n_slots,):
        raise InvalidParameterError(f"Expected {3 * source.n_slots} values, got shape {values.shape}.")
    mapping = source.coarse_slot_of(target)
    per_field = values.reshape(3, source.n_slots)
    return per_field[:, mapping].ravel()


@dataclass
class PhaseResult:
    index: int
    algorithm: str
    grouping: Sequence[int]
    x: np.ndarray
    params: np.ndarray
    start_value: float
    value: float
    evaluations: int
    iterations: int
    seconds: float
    stop_reason: str
    warning: bool = False


@dataclass
class IdentificationReport:
    """Everything a run produces: per-phase results, the objective trace and timings."""
    seed: int
    initial_params: np.ndarray
    initial_grouping: Sequence[int]
    initial_value: float
    phases: List[PhaseResult] = field(default_factory=list)
    trace: List[dict] = field(default_factory=list)
    planted: Optional[np.ndarray] = None
    planted_grouping: Optional[Sequence[int]] = None
    seconds: float = 0.0

    @property
    def final_value(self) -> float:
        return self.phases[-1].value if self.phases else self.initial_value

    def final_params(self) -> AdhesiveParams:
        if not self.phases:
            return AdhesiveParams.from_vector(self.initial_params, Grouping(tuple(self.initial_grouping)))
        last = self.phases[-1]
        return AdhesiveParams.from_vector(last.params, Grouping(tuple(last.grouping)))

    def summary_table(self) -> pd.DataFrame:
        """Means of every field and the objective for the start, each phase and the planted values."""
        rows = [_summary_row("starting", self.initial_params, self.initial_value)]
        rows += [_summary_row(f"phase {p.index}", p.params, p.value) for p in self.phases]
        if self.planted is not None:
            rows.append(_summary_row("desired", self.planted, 0.0))
        return pd.DataFrame(rows, columns=["stage", *FIELDS, "objective"])


def _summary_row(stage: str, vector: np.ndarray, value: float) -> dict:
    per_field = np.asarray(vector, dtype=float).reshape(3, -1)
    row = {"stage": stage, "objective": float(value)}
    row.update({name: float(per_field[f].mean()) for f, name in enumerate(FIELDS)})
    return row


def run_identification(plan: PhasePlan, problem: IdentificationProblem, seed: int,
                       initial: Optional[AdhesiveParams] = None,
                       planted: Optional[AdhesiveParams] = None,
                       max_workers: Optional[int] = None) -> IdentificationReport:
    """
    Execute the phases in order, lifting the result of each into the next grouping.

    Parameters:
        plan (PhasePlan): phases to run.
        problem (IdentificationProblem): objective; its grouping is replaced per phase.
        seed (int): seed of the global phase and of gradient sampling.
        initial (AdhesiveParams, optional): start point; the box midpoint when omitted.
        planted (AdhesiveParams, optional): known parameters, reported next to the results.
        max_workers (int, optional): thread cap for population evaluations.

    Returns:
        IdentificationReport: parameters per phase, objective trace and timings.
    """
    n_nodes = problem.grouping.n_nodes
    groupings = plan.groupings(n_nodes)
    first = groupings[0]
    if initial is None:
        x = np.full(3 * first.n_slots, 0.5)
    else:
        if initial.grouping.is_refined_by(first):
            initial = lift_params(initial, first)
        elif initial.grouping != first:
            raise IncompatibleGroupingError("The initial parameters must be at most as fine as phase 1.")
        x = problem.bounds.to_normalized(initial)

    started = time.perf_counter()
    current = problem.with_grouping(first)
    value = current.value(x)
    report = IdentificationReport(seed=seed, initial_params=current.params(x).as_vector(),
                                  initial_grouping=first.labels, initial_value=value,
                                  planted=None if planted is None else planted.as_vector(),
                                  planted_grouping=None if planted is None else planted.grouping.labels)
    logger.info(f"Identification: {len(plan.phases)} phase(s), initial objective {value:.6e}")
    iteration = 0
    previous = first
    for n, (spec, grouping) in enumerate(zip(plan.phases, groupings), start=1):
        if grouping != previous:
            x = lift_grouping(x, previous, grouping)
        current = problem.with_grouping(grouping)
        report.trace.append({"iteration": iteration, "phase": n, "objective": value, "event": "phase_boundary"})
        logger.info(f"Phase {n}: {spec.algorithm} over {3 * grouping.n_slots} parameters, start {value:.6e}")
        t0 = time.perf_counter()
        try:
            if spec.algorithm == "global":
                outcome = phase_global(current.value, current.dim, spec.budget, seed + n,
                                       threshold=spec.threshold, stagnation=spec.stagnation,
                                       population=spec.population, x0=x, max_workers=max_workers)
                iterations, warning = outcome.generations, False
            else:
                outcome = phase_quasinewton(current.evaluate, x, budget=spec.budget, gtol=spec.gtol, seed=seed + n,
                                            threshold=spec.threshold)
                iterations, warning = outcome.iterations, outcome.warning
        except DelamidError as e:
            logger.error(f"Phase {n} ({spec.algorithm}) failed: {e}")
            e.phase = n
            raise
        for f in outcome.history:
            iteration += 1
            report.trace.append({"iteration": iteration, "phase": n, "objective": float(f), "event": "iterate"})
        result = PhaseResult(index=n, algorithm=spec.algorithm, grouping=grouping.labels, x=outcome.x.copy(),
                             params=current.params(outcome.x).as_vector(), start_value=value,
                             value=float(outcome.value), evaluations=outcome.evaluations,
                             iterations=iterations, seconds=time.perf_counter() - t0,
                             stop_reason=outcome.stop_reason, warning=warning)
        report.phases.append(result)
        logger.info(f"Phase {n} finished ({result.stop_reason}) in {result.seconds:.1f} s, objective {result.value:.6e}")
        x, value, previous = outcome.x, result.value, grouping
    report.seconds = time.perf_counter() - started
    return report
