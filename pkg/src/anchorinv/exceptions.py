"""Exception types shared across the package."""


class AnchorInvError(Exception):
    """Base class for anchorinv errors."""


class SingularCovarianceError(AnchorInvError):
    """A covariance matrix could not be factorized even after jitter."""


class EmptyPosteriorError(AnchorInvError):
    """Every mixture component weight underflowed during conditioning."""


class ForwardModelError(AnchorInvError):
    """A forward evaluation failed."""


class ForwardDomainError(ForwardModelError):
    """Forward model input outside its domain (nonpositive coefficient)."""


class ForwardSolveError(ForwardModelError):
    """Forward solve produced a non-finite or missing result."""


class ConfigError(AnchorInvError):
    """Invalid or inconsistent run configuration."""


class EngineError(AnchorInvError):
    """Pipeline-level failure (e.g. too many discarded draws)."""
