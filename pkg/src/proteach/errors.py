"""Exception types shared across the package."""


class ConfigurationError(Exception):
    """A config value or shape is invalid before any computation starts."""


class ContractViolationError(Exception):
    """An operation was called with arguments that break its contract."""


class DivergenceError(Exception):
    """Training produced nonfinite losses or gradients."""
