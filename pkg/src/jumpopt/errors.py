"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A robot parameter file or pipeline config is invalid; message names the field."""


class DomainError(ValueError):
    """An input is outside the mathematical domain of an operation."""


class FreeFallSingularity(DomainError):
    """Center of pressure is undefined because vertical acceleration cancels gravity."""


class SolverFailure(RuntimeError):
    """An optimization stage did not converge; message carries diagnostics."""


class DependencyError(FileNotFoundError):
    """A pipeline stage is missing an upstream artifact."""


class VerificationFailure(RuntimeError):
    """The verification report contains failed checks."""
