"""Exception hierarchy shared by every fedol module."""


class FedolError(Exception):
    """Base class for all library errors."""


class NumericInputError(FedolError, ValueError):
    """Input contains NaN or infinite values."""


class ShapeError(FedolError, ValueError):
    """Array dimensions do not line up."""


class PreconditionError(FedolError, ValueError):
    """An operation was called outside its domain."""


class TrainingDivergedError(FedolError, RuntimeError):
    """The training loss became non-finite."""


class InfeasiblePartitionError(FedolError, ValueError):
    """A pathological split cannot cover every class."""


class IncompatibleArchitectureError(FedolError, ValueError):
    """Parameter averaging was requested across different architectures."""


class LedgerError(FedolError, AssertionError):
    """A client broke the one-shot communication contract."""

    def __init__(self, message, client_id=None, count=None):
        super().__init__(message)
        self.client_id = client_id
        self.count = count


class ConfigError(FedolError, ValueError):
    """Experiment configuration is malformed or inconsistent."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
