"""Exception hierarchy shared by every module of the package."""


class ProjGraphError(Exception):
    """Base class for all package errors."""


class DimensionError(ProjGraphError, ValueError):
    pass


class DomainError(ProjGraphError, ValueError):
    """A point lies outside the domain of its model space."""


class CurvatureSignError(ProjGraphError, ValueError):
    pass


class SignatureParseError(ProjGraphError, ValueError):
    pass


class GraphError(ProjGraphError):
    """Malformed autodiff tape (dangling or foreign node ids)."""


class ShapeError(ProjGraphError, ValueError):
    pass


class NonFiniteError(ProjGraphError, FloatingPointError):
    pass


class EvaluationError(ProjGraphError):
    pass


class SamplingError(ProjGraphError, ValueError):
    pass


class ConfigError(ProjGraphError, ValueError):
    pass


class DataError(ProjGraphError, ValueError):
    pass


class DatasetParseError(DataError):
    pass


class SplitError(ProjGraphError, ValueError):
    pass


class TrainingError(ProjGraphError, RuntimeError):
    def __init__(self, message, epoch=None, run=None):
        super().__init__(message)
        self.epoch = epoch
        self.run = run
