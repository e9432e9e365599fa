"""
scripts/errors.py

Exception hierarchy shared by every module. Input and precondition problems
derive from ValueError, numerical failures from RuntimeError, so callers that
only know the builtin types still catch them.
"""

from typing import List, Optional, Sequence


class DelamidError(Exception):
    """Root of all project errors."""


# ---------------------------------------------------------------------------
# Input / precondition errors
# ---------------------------------------------------------------------------

class InvalidGeometryError(DelamidError, ValueError):
    """Degenerate mesh geometry or inconsistent mesh sizes."""


class InvalidMaterialError(DelamidError, ValueError):
    """Elasticity constants outside the admissible range."""


class InconsistentLabelingError(DelamidError, ValueError):
    """Boundary labels that cannot produce a valid DOF partition."""


class InvalidParameterError(DelamidError, ValueError):
    """Adhesive parameters or bounds that are not admissible."""


class DomainError(DelamidError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ClassificationError(DelamidError, ValueError):
    """Point that does not lie on the graph being classified."""


class InvalidBranchError(DelamidError, ValueError):
    """Piece index not admissible for the requested stratum."""


class IncompatibleGroupingError(DelamidError, ValueError):
    """Parameter groupings that are not refinements of each other."""


class StaleCacheError(DelamidError, ValueError):
    """An operator cache was built for a different mesh or material."""


class ConfigError(DelamidError, ValueError):
    """Any problem with an experiment configuration file."""


class ConfigParseError(ConfigError):
    """The configuration file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")


class ConfigValidationError(ConfigError):
    """The configuration parsed but violates the schema; lists every violation."""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        joined = "\n  - ".join(self.violations)
        super().__init__(f"{len(self.violations)} configuration violation(s):\n  - {joined}")


# ---------------------------------------------------------------------------
# Numerical errors
# ---------------------------------------------------------------------------

class NumericalError(DelamidError, RuntimeError):
    """Root of numerical failures (CLI exit code 3)."""


class FactorizationError(NumericalError):
    """A matrix factorization failed (singular block)."""


class NotPositiveDefiniteError(NumericalError):
    """A QP Hessian is not symmetric positive definite."""


class QPConvergenceError(NumericalError):
    """The active-set iteration exceeded its iteration cap."""


class SimulationError(NumericalError):
    """A time step of the forward recursion failed."""

    def __init__(self, message: str, step: int, params: Optional[Sequence[float]] = None):
        self.step = step
        self.params = None if params is None else list(params)
        super().__init__(f"step {step}: {message}")


class AdjointError(NumericalError):
    """The backward adjoint sweep could not be completed."""
