"""Exception types shared across the library."""

from __future__ import annotations

import numpy as np


class GaitfamError(Exception):
    """Base class for library errors."""


class InputError(GaitfamError, ValueError):
    """Invalid argument (non-finite state, out-of-range phase, bad config)."""


class SingularDynamicsError(GaitfamError):
    """The stacked dynamics system cannot be solved consistently."""

    def __init__(self, message: str, rank: int | None = None,
                 time: float | None = None):
        super().__init__(message)
        self.rank = rank
        self.time = time


class SingularImpactError(GaitfamError):
    """The impact constraint Jacobian is rank deficient."""

    def __init__(self, message: str, rank: int | None = None):
        super().__init__(message)
        self.rank = rank


class CorrectorError(GaitfamError):
    """Newton corrector did not converge within the iteration budget."""

    def __init__(self, message: str, point: np.ndarray | None = None,
                 residual_norm: float = np.inf, iterations: int = 0):
        super().__init__(message)
        self.point = point
        self.residual_norm = residual_norm
        self.iterations = iterations


class StepFailureError(CorrectorError):
    """A continuation step failed even after step-size reduction."""


class NoTangentError(GaitfamError):
    """The map Jacobian has an empty numerical null space."""


class DegenerateReferenceError(GaitfamError):
    """The homotopy reference point already satisfies the query exactly."""


class StalledDescentError(GaitfamError):
    """The homotopy line search cannot make progress."""

    def __init__(self, message: str, point: np.ndarray | None = None,
                 p_value: float | None = None):
        super().__init__(message)
        self.point = point
        self.p_value = p_value
