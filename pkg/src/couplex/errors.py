"""Exceptions and warning categories shared across the package."""


class CouplexError(Exception):
    """Base class for package errors."""


class NumericalBlowup(CouplexError):
    """A coefficient or state evaluated to a non-finite value during integration."""

    def __init__(self, message, state=None, time=None):
        super().__init__(message)
        self.state = state
        self.time = time


class ExitBudgetExceeded(CouplexError):
    """An uncapped exit simulation ran past its hard iteration budget."""


class IncompatibleSupport(CouplexError):
    """Two discrete distributions do not share cells / reference masses."""


class InvalidKernel(CouplexError):
    """A transition matrix is not row-stochastic within tolerance."""


class UnknownModel(CouplexError):
    """A model spec string does not name a registered model."""


class ConfigError(CouplexError):
    """An experiment config is malformed or misses required fields."""


class UndersampledWarning(UserWarning):
    """Fewer samples than cells warrant; histogram cells are noise-dominated."""


class LowEffectiveSampleWarning(UserWarning):
    """Importance weights are degenerate (effective sample size below threshold)."""


class DeclaredBoundWarning(UserWarning):
    """A spot check found a sampled state violating a declared coefficient bound."""
