"""
Probability-vector utilities shared by every module.
"""
from typing import List, Sequence

import numpy as np

from .codebook import CauseCodebook
from .errors import ProbabilityError, ValidationError
from .models import INGEST_TOLERANCE, PrevalenceVector, ProbVector, VARecord


def normalize(raw: Sequence[float]) -> ProbVector:
    """Scale a nonnegative vector so it sums to one."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ProbabilityError("normalize expects a nonempty 1-D array")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ProbabilityError(f"normalize expects finite nonnegative entries, got {arr.tolist()}")
    total = float(arr.sum())
    if total <= 0:
        raise ProbabilityError("normalize needs at least one positive entry")
    return ProbVector(arr / total)


def ingest_probs(raw: Sequence[float], n_causes: int) -> ProbVector:
    """
    Validate an externally produced probability vector.

    Vectors within INGEST_TOLERANCE of summing to one are renormalised once;
    anything further off is rejected.
    """
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProbabilityError(f"probabilities must be a list of numbers, got {type(raw).__name__}") from None
    if arr.shape != (n_causes,):
        raise ProbabilityError(f"expected {n_causes} probabilities, got {arr.size}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ProbabilityError("probabilities must be finite and nonnegative")
    total = float(arr.sum())
    if abs(total - 1.0) > INGEST_TOLERANCE:
        raise ProbabilityError(f"probabilities sum to {total:.9g}; off by more than {INGEST_TOLERANCE}")
    return ProbVector(arr / total)


def empirical_prevalence(records: Sequence[VARecord], codebook: CauseCodebook) -> PrevalenceVector:
    """Fraction of records per true cause."""
    if not records:
        raise ValidationError("empirical_prevalence needs a nonempty cohort")
    counts = np.zeros(codebook.size, dtype=np.float64)
    for record in records:
        if record.true_cause is None:
            raise ValidationError(f"Record {record.id} has no true cause")
        if not 0 <= record.true_cause < codebook.size:
            raise ValidationError(f"Record {record.id}: cause {record.true_cause} outside codebook")
        counts[record.true_cause] += 1
    return PrevalenceVector(counts / counts.sum())


def one_hot(index: int, n_causes: int) -> ProbVector:
    vec = np.zeros(n_causes, dtype=np.float64)
    vec[index] = 1.0
    return ProbVector(vec)


def argmax(probs: np.ndarray) -> int:
    """Index of the largest entry; ties go to the lowest index."""
    return int(np.argmax(probs))


def ranking(probs: np.ndarray) -> List[int]:
    """Cause indices by descending probability, ties broken by lower index."""
    return [int(i) for i in np.argsort(-np.asarray(probs), kind='stable')]
