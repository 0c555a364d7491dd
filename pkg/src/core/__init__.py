"""Core module for LA-VA: domain types, codebooks and probability helpers."""

from .errors import (
    LavaError, ValidationError, CodebookError, ProbabilityError, ConfigError, MetricError,
    RecordValidationError, LlmError, LlmAuthError, ResponseParseError, LeakageError, ModelLayoutError
)
from .models import (
    AgeGroup, Sex, SymptomAnswer, Confidence, STRATA, MAX_RANK, ProbVector, PrevalenceVector,
    RankedPrediction, PredictionEntry, PredictionSet, VARecord, check_cohort, labels_of
)
from .codebook import CauseCodebook, load_codebook
from .probability import normalize, ingest_probs, empirical_prevalence, one_hot, argmax, ranking

__all__ = [
    'LavaError', 'ValidationError', 'CodebookError', 'ProbabilityError', 'ConfigError', 'MetricError',
    'RecordValidationError', 'LlmError', 'LlmAuthError', 'ResponseParseError', 'LeakageError',
    'ModelLayoutError',
    'AgeGroup', 'Sex', 'SymptomAnswer', 'Confidence', 'STRATA', 'MAX_RANK', 'ProbVector',
    'PrevalenceVector', 'RankedPrediction', 'PredictionEntry', 'PredictionSet', 'VARecord',
    'check_cohort', 'labels_of',
    'CauseCodebook', 'load_codebook',
    'normalize', 'ingest_probs', 'empirical_prevalence', 'one_hot', 'argmax', 'ranking',
]
