"""
Exception hierarchy for the numerical engine.

Every error carries a machine-readable ``code`` and a ``category``:
``"input"`` for bad data or arguments, ``"numerical"`` for failures of the
computation itself (degenerate geometry, non-convergence, ...).
"""

from __future__ import annotations

from typing import Any


class GeomedError(Exception):
    """Base error for all engine failures."""

    code = "GEOMED_ERROR"
    category = "numerical"

    def __init__(self, message: str, *, details: Any = None) -> None:
        self.message = message
        self.details = details
        super().__init__(message)


# --- input errors ---


class InvalidInputError(GeomedError):
    """Non-finite values, malformed shapes or invalid weights."""

    code = "INVALID_INPUT"
    category = "input"


class DirectionDomainError(InvalidInputError):
    """A quantile direction lies outside the open unit q-ball."""

    code = "DIRECTION_DOMAIN"


class InsufficientDataError(InvalidInputError):
    """Too few observations (or draws) for the requested operation."""

    code = "INSUFFICIENT_DATA"


class DataFileError(InvalidInputError):
    """A data file could not be read into a numeric matrix."""

    code = "DATA_FILE"


# --- numerical errors ---


class CoincidentPointError(GeomedError):
    """The score is undefined because x equals theta."""

    code = "COINCIDENT_POINT"


class SingularityError(GeomedError):
    """psi_dot diverges at a coordinate tie for p < 2."""

    code = "COORDINATE_SINGULARITY"


class DegenerateGeometryError(GeomedError):
    """All observations lie on one straight line."""

    code = "DEGENERATE_GEOMETRY"


class NonConvergenceError(GeomedError):
    """The solver hit its iteration cap; ``report`` holds the best iterate."""

    code = "NON_CONVERGENCE"

    def __init__(self, message: str, *, report: Any = None) -> None:
        self.report = report
        super().__init__(message)


class SamplerDegeneracyError(GeomedError):
    """Too many posterior draws failed to solve."""

    code = "SAMPLER_DEGENERACY"


class DegenerateDataError(GeomedError):
    """The data admit no usable transformation (all candidates singular)."""

    code = "DEGENERATE_DATA"


class UnstableEstimateError(GeomedError):
    """The plug-in derivative matrix is singular or badly conditioned."""

    code = "UNSTABLE_ESTIMATE"


class DegenerateRegionError(GeomedError):
    """The posterior draws have a singular covariance."""

    code = "DEGENERATE_REGION"


class SimulationAbortedError(GeomedError):
    """More than 1% of the replications in a simulation cell failed."""

    code = "SIMULATION_ABORTED"
