"""Exception types shared across the package."""


class AgorankError(Exception):
    """Base class for every error raised by this package."""


# ranking primitives / grounding


class EmptyAfterGrounding(AgorankError):
    """No ballot items survived grounding against the catalog."""


class PoolMismatch(AgorankError):
    """Two rankings do not cover the same candidate set."""


class NoCandidates(AgorankError):
    """No candidate items present in any ballot."""


# external agent adapter


class AdapterTimeout(AgorankError):
    """The external agent service missed its response deadline."""


class AdapterMalformed(AgorankError):
    """The external agent response violates the wire schema."""


# orchestration


class NoActiveAgents(AgorankError):
    """Selection or grounding left no usable agent for a query."""


# metrics


class ZeroMass(AgorankError):
    """A distribution or exposure vector sums to zero."""


class NotNormalized(AgorankError):
    """Probability vector entries do not sum to one (or are negative)."""


class LengthMismatch(AgorankError):
    """Two vectors that must share a support have different lengths."""


class UndefinedBaseline(AgorankError):
    """Popularity lift has no usable historical baseline."""


class UnknownMetricDirection(AgorankError):
    """The metric has no registered better/worse direction for regret."""


# data loading


class DuplicateItemId(AgorankError):
    """Two catalog records share an item id."""


class MalformedRecord(AgorankError):
    """A data file row cannot be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingRequiredField(AgorankError):
    """A record lacks a required field (e.g. the item id)."""


class SchemaError(AgorankError):
    """A scenario document violates the schema; message names the field path."""


class UnknownMetricId(AgorankError):
    """A metric identifier does not name a registered metric."""


class UnknownRule(AgorankError):
    """A rule name does not name a supported aggregation rule."""
