"""Exception and warning types raised across the package."""


class CuqdynError(Exception):
    """Base class for all package-specific errors."""


class StepLimitExceeded(CuqdynError):
    """Integrator hit the step budget before reaching the end of the grid."""


class NonFiniteState(CuqdynError):
    """State or derivative became NaN/Inf during integration."""


class UnknownModel(CuqdynError, KeyError):
    """Requested model name is not in the registry."""

    def __str__(self):
        # KeyError.__str__ wraps the message in quotes; undo that
        return str(self.args[0]) if self.args else ""


class NonPositiveInput(CuqdynError, ValueError):
    """Log or Box-Cox transform applied to a value <= 0."""


class ParseError(CuqdynError, ValueError):
    """Malformed dataset or config file; message names the offending row."""


class DimensionMismatch(CuqdynError, ValueError):
    """Array dimensions disagree with the model or dataset layout."""


class AllStartsFailed(CuqdynError, RuntimeError):
    """Every multistart point evaluated to infinite cost."""


class EmptySample(CuqdynError, ValueError):
    """Quantile of an empty sample requested."""


class NotUnivariate(CuqdynError, ValueError):
    """jackknife_plus called on an ensemble with more than one observable."""


class GridMismatch(CuqdynError, ValueError):
    """Coverage evaluation grid does not match the region grid."""


class ConfigError(CuqdynError, ValueError):
    """Invalid experiment configuration or config file."""


class DegenerateSigmaWarning(UserWarning):
    """A coordinate had all-zero residuals; its interval has zero width."""
