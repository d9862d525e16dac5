"""Exception types shared across the toolkit."""


class LedgerNetError(Exception):
    """Base class for every error raised by this package."""


class AddressError(LedgerNetError, ValueError):
    """An address string cannot be canonicalized for its chain."""


class ExportError(LedgerNetError):
    """Writing a graph file failed."""


class ParseError(LedgerNetError):
    """A graph, chunk, or checkpoint file is malformed."""

    def __init__(self, message: str, path=None, line: int | None = None,
                 offset: int | None = None):
        self.path = path
        self.line = line
        self.offset = offset
        where = ""
        if path is not None:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
            if offset is not None:
                where = where[:-2] + f", column {offset}: "
        super().__init__(where + message)


class UsageError(LedgerNetError):
    """Bad command-line arguments or an unknown format name."""


class EmptyRangeError(LedgerNetError):
    """No block's timestamp falls inside the requested time interval."""


class ProviderError(LedgerNetError):
    """A block provider request failed.

    ``attempts`` carries the number of tries made when a retry cap was hit.
    ``permanent`` marks failures that retrying cannot fix (e.g. a missing
    fixture file), so the retry loop re-raises them immediately.
    """

    def __init__(self, message: str, attempts: int | None = None,
                 permanent: bool = False):
        self.attempts = attempts
        self.permanent = permanent
        if attempts is not None:
            message = f"{message} (after {attempts} attempts)"
        super().__init__(message)


class CheckpointError(LedgerNetError):
    """A checkpoint file is invalid or does not match the requested job."""


class UndefinedMetricError(LedgerNetError):
    """The metric has no value on this input (empty node set, singleton component)."""


class ErSpecError(LedgerNetError, ValueError):
    """Random-graph parameters are inconsistent (e.g. more edges than node pairs)."""
