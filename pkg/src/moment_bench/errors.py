"""Exception hierarchy shared across the toolkit.

The CLI maps UsageError to exit code 1 and any DataError to exit code 2;
everything else is a bug and propagates.
"""


class MomentBenchError(Exception):
    """Base class for all toolkit errors."""


class UsageError(MomentBenchError):
    """Bad invocation: unknown flags, missing required arguments."""


class DataError(MomentBenchError):
    """Any problem with input data or configuration values."""


class ParseError(DataError):
    """Malformed raw annotation input; message names the offending line."""


class DurationLookupError(DataError):
    """A video_id referenced by an annotation has no known duration."""


class StructureError(DataError):
    """Structurally inconsistent document (e.g. mismatched array lengths)."""


class TableError(DataError):
    """Dataset table invariant violated (duplicate ids, conflicting durations)."""


class RecordIOError(DataError):
    """Unreadable or duplicate record in a line-delimited file."""


class KdeFitError(DataError):
    """Density fit preconditions violated (too few points, zero variance)."""


class SamplingError(DataError):
    """Rejection sampling stalled on a pathological model."""


class SplitError(DataError):
    """Re-splitting preconditions violated (dataset too small, too few videos)."""


class PredictionFormatError(DataError):
    """Malformed prediction record."""
