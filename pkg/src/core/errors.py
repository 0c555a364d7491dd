"""
Exception hierarchy for LA-VA.

ValidationError and its subclasses describe bad inputs (exit code 1 at the CLI);
every other LavaError is a runtime failure (exit code 2).
"""
from typing import List, Optional, Tuple


class LavaError(Exception):
    """Root of every error raised by the pipeline."""


class ValidationError(LavaError):
    """Input data, files or configuration failed validation."""


class CodebookError(ValidationError):
    """Codebook resources are malformed or a label cannot be resolved."""


class ProbabilityError(ValidationError):
    """A probability vector is negative, empty, or too far from summing to one."""


class ConfigError(ValidationError):
    """Configuration file or override is invalid."""


class MetricError(ValidationError):
    """A metric is undefined for the given cohort."""


class RecordValidationError(ValidationError):
    """One or more rows of an input file were rejected."""

    def __init__(self, message: str, rejects: Optional[List[Tuple[int, str]]] = None):
        self.rejects = list(rejects or [])
        if self.rejects:
            shown = '; '.join(f"row {row}: {reason}" for row, reason in self.rejects[:20])
            more = len(self.rejects) - 20
            if more > 0:
                shown += f"; ... and {more} more"
            message = f"{message} ({shown})"
        super().__init__(message)


class LlmError(LavaError):
    """Chat-completion request failed."""

    def __init__(self, message: str, record_id: Optional[str] = None):
        self.record_id = record_id
        if record_id is not None:
            message = f"[{record_id}] {message}"
        super().__init__(message)


class LlmAuthError(LlmError):
    """Missing or rejected API credentials."""


class ResponseParseError(LavaError):
    """Model output holds no usable structured prediction."""


class LeakageError(LavaError):
    """A held-out record reached a training structure."""


class ModelLayoutError(LavaError):
    """Stacker inputs do not match the declared method order or feature layout."""
