"""Shared exception types."""


class IllumineError(Exception):
    """Base class for errors raised by this package."""


class ValidityError(IllumineError):
    """An input model violates a domain constraint."""


class FeatureUndefinedError(IllumineError):
    """A feature metric is undefined for this input (e.g. degenerate geometry)."""


class MutationError(IllumineError):
    """The mutation operator exhausted its retry budget."""


class SeedGenerationError(IllumineError):
    """The domain failed to produce a valid seed within the retry bound."""


class ProtocolError(IllumineError):
    """An external system under test violated the wire protocol."""


class EvaluationError(IllumineError):
    """An evaluation failed; the individual is discarded."""
