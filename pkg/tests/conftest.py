"""Shared fixtures for the LA-VA test suite."""
import os

import pytest

from src.core.codebook import load_codebook
from src.core.models import AgeGroup, Confidence, PredictionEntry, PredictionSet, RankedPrediction, Sex, VARecord

FIXTURES = os.path.join(os.path.dirname(__file__), 'fixtures')


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def adult():
    return load_codebook(AgeGroup.ADULT)


@pytest.fixture
def child():
    return load_codebook(AgeGroup.CHILD)


@pytest.fixture
def neonate():
    return load_codebook(AgeGroup.NEONATE)


@pytest.fixture
def make_records():
    """Factory: one labeled record per cause index, ids r0, r1, ..."""

    def make(causes, site='A', age_group=AgeGroup.ADULT, narratives=None, prefix='r'):
        records = []
        for i, cause in enumerate(causes):
            narrative = narratives[i] if narratives is not None else None
            records.append(VARecord(
                id=f"{prefix}{i}",
                site=site,
                age_group=age_group,
                age_value=1.0 if age_group is AgeGroup.NEONATE else 40.0,
                sex=Sex.FEMALE,
                narrative=narrative,
                true_cause=cause,
            ))
        return records

    return make


@pytest.fixture
def ranked_set():
    """Factory: ranked-only PredictionSet from {id: [causes]} (confidence 'high' on rank 1)."""

    def make(lists, method='llm', confidence=Confidence.HIGH):
        by_id = {}
        for record_id, causes in lists.items():
            conf = confidence[record_id] if isinstance(confidence, dict) else confidence
            entries = [(causes[0], conf)] + [(c, Confidence.LOW) for c in causes[1:]]
            by_id[record_id] = PredictionEntry(ranked=RankedPrediction(tuple(entries)))
        return PredictionSet(method, by_id)

    return make
