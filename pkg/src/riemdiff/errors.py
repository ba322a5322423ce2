"""Exception types shared across the library."""


class ContractViolation(ValueError):
    """An argument breaks a structural contract (shape, base point, type)."""


class DomainError(ValueError):
    """An input is outside the mathematical domain of an operation."""


class ConvergenceError(RuntimeError):
    """An iterative procedure failed to converge.

    Carries the last iterate and residual so callers can inspect or resume.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class ConfigError(ValueError):
    """An experiment configuration is invalid; the message names the key."""


class IdxFormatError(ValueError):
    """An IDX file failed to parse; carries the offending byte offset."""

    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset
