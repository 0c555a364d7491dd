"""Tests for domain types, codebooks and probability helpers."""
import numpy as np
import pytest

from src.core.codebook import CauseCodebook, parse_alias_lines
from src.core.errors import CodebookError, ProbabilityError, ValidationError
from src.core.models import (
    AgeGroup, Confidence, PredictionEntry, PredictionSet, ProbVector, RankedPrediction, VARecord, check_cohort,
    labels_of
)
from src.core.probability import argmax, empirical_prevalence, ingest_probs, normalize, one_hot, ranking


def test_codebook_sizes(adult, child, neonate):
    assert adult.size == 34
    assert child.size == 21
    assert neonate.size == 6
    assert neonate.labels[0] == 'Birth asphyxia'


def test_resolve_case_fold_and_whitespace(adult):
    assert adult.resolve('stroke') == adult.labels.index('Stroke')
    assert adult.resolve('Diarrhea/Dysentery ') == adult.labels.index('Diarrhea/Dysentery')
    assert adult.resolve('  acute   myocardial infarction') == 1


def test_resolve_alias_and_punctuation(adult, neonate):
    assert adult.resolve('AMI') == adult.labels.index('Acute Myocardial Infarction')
    assert adult.resolve('tuberculosis') == adult.labels.index('TB')
    assert adult.resolve('Diarrhea Dysentery') == adult.labels.index('Diarrhea/Dysentery')
    assert neonate.resolve('Neonatal sepsis') == neonate.labels.index('Meningitis/Sepsis')


def test_resolve_unknown(adult):
    assert adult.resolve('Gunshot of the spleen') is None
    assert adult.resolve('') is None
    assert adult.resolve(None) is None
    with pytest.raises(CodebookError):
        adult.index('Gunshot of the spleen')


def test_codebook_rejects_wrong_size():
    with pytest.raises(CodebookError):
        CauseCodebook(AgeGroup.NEONATE, ('A', 'B'))


def test_alias_lines_must_point_at_labels():
    labels = ('Alpha', 'Beta')
    assert parse_alias_lines(['# comment', 'a\tAlpha'], labels) == {'a': 0}
    with pytest.raises(CodebookError):
        parse_alias_lines(['x\tGamma'], labels)
    with pytest.raises(CodebookError):
        parse_alias_lines(['no tab here'], labels)


@pytest.mark.parametrize('raw,expected', [
    ((2, 2, 0, 0), (0.5, 0.5, 0, 0)),
    ((1, 1, 1), (1 / 3, 1 / 3, 1 / 3)),
    ((0.3, 0.9), (0.25, 0.75)),
])
def test_normalize(raw, expected):
    out = normalize(raw)
    assert np.allclose(out.probs, expected, atol=1e-12)
    assert abs(out.probs.sum() - 1.0) <= 1e-9


@pytest.mark.parametrize('raw', [(0, 0, 0), (1, -1, 1), ()])
def test_normalize_rejects(raw):
    with pytest.raises(ProbabilityError):
        normalize(raw)


def test_prob_vector_validation():
    with pytest.raises(ProbabilityError):
        ProbVector(np.array([0.5, 0.6]))
    with pytest.raises(ProbabilityError):
        ProbVector(np.array([1.5, -0.5]))
    vec = ProbVector(np.array([0.25, 0.75]))
    with pytest.raises(ValueError):
        vec.probs[0] = 1.0


def test_ingest_probs_tolerance():
    out = ingest_probs([0.5, 0.3, 0.1999995], 3)
    assert abs(out.probs.sum() - 1.0) <= 1e-12
    with pytest.raises(ProbabilityError):
        ingest_probs([0.5, 0.3, 0.1], 3)
    with pytest.raises(ProbabilityError):
        ingest_probs([0.5, 0.5], 3)


def test_empirical_prevalence_counts(make_records, neonate):
    records = make_records([0] * 5 + [1] * 3 + [2] * 2, age_group=AgeGroup.NEONATE)
    assert np.allclose(empirical_prevalence(records, neonate).probs, [0.5, 0.3, 0.2, 0, 0, 0])

    records = make_records([0] * 4 + [1] * 2 + [2], age_group=AgeGroup.NEONATE)
    assert np.allclose(empirical_prevalence(records, neonate).probs[:3], [4 / 7, 2 / 7, 1 / 7])

    records = make_records([3] * 6, age_group=AgeGroup.NEONATE)
    assert np.array_equal(empirical_prevalence(records, neonate).probs, one_hot(3, 6).probs)


def test_empirical_prevalence_names_unlabeled_record(neonate):
    records = [VARecord(id='case-17', site='A', age_group=AgeGroup.NEONATE, age_value=2.0)]
    with pytest.raises(ValidationError, match='case-17'):
        empirical_prevalence(records, neonate)


def test_argmax_and_ranking_ties_go_to_lower_index():
    probs = np.array([0.2, 0.4, 0.4, 0.0])
    assert argmax(probs) == 1
    assert ranking(probs) == [1, 2, 0, 3]


def test_ranked_prediction_rules():
    ranked = RankedPrediction(((3, Confidence.HIGH), (1, 'low')))
    assert ranked.causes == (3, 1)
    assert ranked.top_confidence is Confidence.HIGH
    with pytest.raises(ValidationError):
        RankedPrediction(((1, 'high'), (1, 'low')))
    with pytest.raises(ValidationError):
        RankedPrediction(tuple((c, 'low') for c in range(6)))
    with pytest.raises(ValidationError):
        RankedPrediction(())


def test_record_rules(make_records):
    with pytest.raises(ValidationError):
        VARecord(id='', site='A', age_group=AgeGroup.ADULT, age_value=30)
    with pytest.raises(ValidationError):
        VARecord(id='x', site='A', age_group=AgeGroup.NEONATE, age_value=3, true_cause=6)
    blank = VARecord(id='x', site='A', age_group=AgeGroup.ADULT, age_value=30, narrative='   ')
    assert blank.narrative is None

    records = make_records([0, 1])
    check_cohort(records)
    with pytest.raises(ValidationError):
        check_cohort(records + records[:1])
    assert labels_of(records).tolist() == [0, 1]


def test_prediction_set_helpers():
    pset = PredictionSet('m', {
        'a': PredictionEntry(probs=ProbVector(np.array([1.0, 0.0]))),
        'b': PredictionEntry(probs=ProbVector(np.array([0.25, 0.75]))),
    })
    assert pset.n_causes == 2
    assert pset.prob_matrix(['b', 'a']).tolist() == [[0.25, 0.75], [1.0, 0.0]]
    assert pset.subset(['b']).ids == ['b']
    assert pset.renamed('z').method == 'z'
    with pytest.raises(ValidationError):
        pset.subset(['c'])
    with pytest.raises(ValidationError):
        PredictionEntry()


def test_confidence_parse():
    assert Confidence.parse(' High ') is Confidence.HIGH
    assert Confidence.parse('certain', default=Confidence.MEDIUM) is Confidence.MEDIUM
    with pytest.raises(ValidationError):
        Confidence.parse('certain')
