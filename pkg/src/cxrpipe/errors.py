"""Exception types shared across the pipeline.

ValueError stays the type for bad in-process arguments; these classes mark
problems with external data and files, which the CLI maps to exit code 2.
"""


class PipelineError(Exception):
    """Base for data and contract violations surfaced to the CLI."""


class DataError(PipelineError):
    """Input data violates the pipeline contract (corpus layout, labels, sizes)."""


class FormatError(PipelineError):
    """A file does not match its declared binary or text format."""
