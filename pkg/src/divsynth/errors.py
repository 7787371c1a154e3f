"""Exception hierarchy shared across the pipeline.

The CLI maps these onto process exit codes: usage errors exit 1,
data errors exit 2, endpoint errors exit 3.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PipelineError):
    """Malformed, inconsistent, or insufficient input data."""


class EndpointError(PipelineError):
    """A remote embedding/chat endpoint failed after retries."""
