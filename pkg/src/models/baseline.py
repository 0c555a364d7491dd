"""Prevalence-only comparator."""
from typing import Sequence

from ..core.models import PredictionEntry, PredictionSet, PrevalenceVector


def prior_baseline(prevalence: PrevalenceVector, ids: Sequence[str], method: str = 'prior') -> PredictionSet:
    """Give every record the training prevalence vector."""
    entry = PredictionEntry(probs=prevalence)
    return PredictionSet(method, {record_id: entry for record_id in ids})
