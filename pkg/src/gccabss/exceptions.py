"""Exception types shared across the package."""


class GCCAError(Exception):
    """Base class for all package errors."""


class PreconditionError(GCCAError, ValueError):
    """A numerical precondition of an algorithm is violated.

    Raised for things like a non positive definite pencil denominator, a
    vanishing lagged correlation used as a normalizer, or an unstable source
    filter.
    """


class ConfigError(GCCAError, ValueError):
    """An experiment configuration is malformed or references missing files."""
