""" Exceptions raised by package biobb_rnot.core """
from typing import Optional, Sequence


class ManifoldMismatchError(ValueError):
    """ Exception raised when points, tangent vectors or models live on
        different manifolds or have the wrong number of coordinates.
    """


class CutLocusError(ValueError):
    """ Exception raised when the logarithm map is requested for a pair of
        points lying on each other's cut locus (antipodal points of a sphere).
    """

    def __init__(self, message: str, indices: Optional[Sequence[int]] = None) -> None:
        super().__init__(message)
        self.indices = list(indices) if indices is not None else []


class DegenerateProjectionError(ValueError):
    """ Exception raised when an ambient vector is too close to the origin to be
        projected radially onto the sphere.
    """


class SingularJacobianError(ArithmeticError):
    """ Exception raised when the linearised stationarity system of the
        transport map cannot be solved.
    """


class TrainingAbortedError(RuntimeError):
    """ Exception raised when training produces a non-finite loss or gradient,
        or when the inner solver keeps failing on most of the batch.
    """

    def __init__(self, message: str, step: int = -1, last_good_checkpoint: Optional[str] = None) -> None:
        super().__init__(message)
        self.step = step
        self.last_good_checkpoint = last_good_checkpoint


class ConfigError(ValueError):
    """ Exception raised for malformed configurations: unknown keys, invalid
        values or an unsupported schema version.
    """
