class ConfigurationError(ValueError):
    """Raised when a run configuration or an input is malformed."""


class InvariantViolation(RuntimeError):
    """Raised when internal state breaks a documented invariant; the run is aborted."""
