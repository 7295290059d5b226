"""Exception hierarchy for the pipeline.

InputError maps to CLI exit code 2 (usage/config problems); everything
else derived from PipelineError maps to exit code 1 (data/model failures).
"""


class PipelineError(Exception):
    """Base class for all pipeline failures."""


class InputError(PipelineError):
    """Caller passed invalid arguments, config, or out-of-domain values."""


class DataFormatError(PipelineError):
    """Malformed input data (ragged rows, unparseable cells, missing columns)."""


class NetworkError(PipelineError):
    """Connection-level failure while fetching remote data."""


class HttpError(NetworkError):
    """Remote server answered with a non-success status."""

    def __init__(self, status_code: int, url: str):
        self.status_code = status_code
        self.url = url
        super().__init__(f"HTTP {status_code} for {url}")


class StorageError(PipelineError):
    """Local filesystem write failed."""


class ModelError(PipelineError):
    """A classifier could not be fitted or applied (degenerate input, width mismatch)."""


class SingularCovarianceError(ModelError):
    """Pooled covariance is singular; regularization epsilon > 0 required."""


class UndefinedStatisticError(PipelineError):
    """A statistic is undefined for the given input (zero variance, empty vector)."""


class SnapshotError(PipelineError):
    """A model snapshot is corrupt, has the wrong version, or a mismatched digest."""
