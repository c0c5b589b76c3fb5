"""Extremes of the Cantor-type autoregression X_{k+1} = beta X_k + eps_{k+1}."""
from ._validation import (
    DEFAULT_DEPTH,
    DomainError,
    InvalidLawError,
    LevelError,
    Params,
    PreconditionError,
    ResourceError,
)

__version__ = "0.1.0"
