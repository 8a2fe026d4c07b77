"""
Exception hierarchy for focus-iir.

Library code raises these; only the CLI maps them to process exit codes.
"""


class FocusError(Exception):
    """Base class for every error raised by this package."""
    exit_code: int = 1


class ConfigError(FocusError, ValueError):
    """Invalid, unknown or inconsistent configuration."""
    exit_code = 2


class DimensionError(FocusError, ValueError):
    """Tensor shapes that cannot be combined."""
    exit_code = 2


class InputError(FocusError, ValueError):
    """User-supplied data outside the accepted range (e.g. token ids >= vocab)."""
    exit_code = 2


class ContractError(FocusError, RuntimeError):
    """A runtime invariant of an operation was violated."""
    exit_code = 1


class ArtifactError(FocusError, RuntimeError):
    """A checkpoint or dataset file is missing, corrupt or incompatible."""
    exit_code = 3


class DivergenceError(FocusError, RuntimeError):
    """Training produced a non-finite loss."""
    exit_code = 4

    def __init__(self, step: int, loss: float):
        super().__init__(f"Training diverged at step {step}: loss={loss}")
        self.step = step
        self.loss = loss


__all__ = [
    "FocusError",
    "ConfigError",
    "DimensionError",
    "InputError",
    "ContractError",
    "ArtifactError",
    "DivergenceError",
]
