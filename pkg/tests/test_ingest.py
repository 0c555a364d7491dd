"""Tests for cohort, embedding and prediction file I/O."""
import json
import os

import numpy as np
import pytest

from src.core.errors import RecordValidationError, ValidationError
from src.core.models import AgeGroup, Confidence, PredictionEntry, PredictionSet, ProbVector, RankedPrediction
from src.core.models import SymptomAnswer
from src.ingest.embedding_io import EmbeddingTable, load_embeddings, save_embeddings
from src.ingest.prediction_io import load_external_predictions, merge_prediction_sets, write_predictions
from src.ingest.record_loader import load_records, read_records, write_records

HEADER = 'id,site,age_group,age_value,sex,narrative,gs_text,fever,cough\n'


def _write(path, text):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    return str(path)


def test_load_records_happy_path(tmp_path, adult):
    path = _write(tmp_path / 'cohort.csv', HEADER + (
        'a1,Mexico,adult,55,male,"He collapsed, suddenly.",Stroke,Yes,No\n'
        'a2,Dar,adult,30,female,,acute myocardial infarction,,Yes\n'
        'a3,Pemba,adult,61,2,She coughed for months.,TB,Don\'t Know,Yes\n'
    ))
    records = load_records(path, adult)
    assert [r.id for r in records] == ['a1', 'a2', 'a3']
    assert records[0].narrative == 'He collapsed, suddenly.'
    assert records[1].narrative is None
    assert records[1].true_cause == adult.labels.index('Acute Myocardial Infarction')
    assert records[0].symptoms == {'fever': SymptomAnswer.YES, 'cough': SymptomAnswer.NO}
    assert records[1].symptoms['fever'] is SymptomAnswer.MISSING
    assert records[2].symptoms['fever'] is SymptomAnswer.MISSING
    assert records[2].site == 'Pemba'


def test_load_records_collects_every_reject(tmp_path, adult):
    path = _write(tmp_path / 'bad.csv', HEADER + (
        'a1,A,adult,55,male,,Stroke,Yes,No\n'
        'a1,A,adult,56,male,,Stroke,Yes,No\n'
        'a3,A,adult,old,male,,Stroke,Yes,No\n'
        'a4,A,adult,40,male,,Dragon bite,Yes,No\n'
        'a5,A,child,4,male,,Pneumonia,Yes,No\n'
    ))
    report = read_records(path, adult)
    assert [r.id for r in report.records] == ['a1']
    assert [line for line, _ in report.rejects] == [3, 4, 5, 6]
    assert report.is_complete
    with pytest.raises(RecordValidationError) as excinfo:
        load_records(path, adult)
    assert 'row 5' in str(excinfo.value)
    assert len(excinfo.value.rejects) == 4


def test_load_records_header_check(tmp_path, adult):
    path = _write(tmp_path / 'hdr.csv', 'id,site,age\nx,A,3\n')
    with pytest.raises(ValidationError):
        load_records(path, adult)
    with pytest.raises(ValidationError):
        load_records(str(tmp_path / 'missing.csv'), adult)


def test_load_records_malformed_csv(tmp_path, adult):
    ragged = _write(tmp_path / 'ragged.csv', HEADER + (
        'a1,A,adult,55,male,,Stroke,Yes,No\n'
        'a2,A,adult,56,male,,Stroke,Yes,No,Yes,No\n'
    ))
    with pytest.raises(ValidationError, match='malformed'):
        read_records(ragged, adult)
    empty = _write(tmp_path / 'empty.csv', '')
    with pytest.raises(ValidationError, match='empty'):
        load_records(empty, adult)


def test_write_records_then_load(tmp_path, neonate, make_records):
    records = make_records([0, 5, 2], age_group=AgeGroup.NEONATE, narratives=['Born blue.', None, 'Fever, "high".'])
    path = str(tmp_path / 'out' / 'records.csv')
    write_records(path, records, neonate)
    loaded = load_records(path, neonate)
    assert [r.true_cause for r in loaded] == [0, 5, 2]
    assert [r.narrative for r in loaded] == ['Born blue.', None, 'Fever, "high".']


def test_embeddings_csv(tmp_path):
    path = _write(tmp_path / 'emb.csv', 'id,e0,e1,e2,e3\nx,1,2,3,4\ny,0.5,0,0,-1\n')
    table = load_embeddings(path)
    assert table.dim == 4
    assert table.matrix(['y']).tolist() == [[0.5, 0.0, 0.0, -1.0]]
    with pytest.raises(ValidationError):
        table.matrix(['z'])


def test_embeddings_reject_nan_with_row_id(tmp_path):
    path = _write(tmp_path / 'emb.csv', 'id,e0,e1\nx,1,2\nbad-row,nan,2\ny,3,\n')
    with pytest.raises(RecordValidationError) as excinfo:
        load_embeddings(path)
    message = str(excinfo.value)
    assert 'bad-row' in message
    assert 'ragged' in message


def test_embeddings_binary_with_sidecar(tmp_path):
    table = EmbeddingTable(dim=3, ids=['a', 'b'], values=np.array([[1.0, 2.0, 3.0], [0.25, -0.5, 4.0]]))
    path = str(tmp_path / 'emb.bin')
    save_embeddings(path, table)
    assert os.path.exists(path + '.json')
    loaded = load_embeddings(path)
    assert loaded.ids == ['a', 'b']
    assert np.array_equal(loaded.values, table.values)

    with open(path + '.json', 'w', encoding='utf-8') as f:
        json.dump({'dim': 4, 'ids': ['a', 'b']}, f)
    with pytest.raises(ValidationError):
        load_embeddings(path)


def test_embeddings_sidecar_must_name_its_keys(tmp_path):
    table = EmbeddingTable(dim=2, ids=['a'], values=np.array([[1.0, 2.0]]))
    path = str(tmp_path / 'emb.bin')
    save_embeddings(path, table)
    with open(path + '.json', 'w', encoding='utf-8') as f:
        json.dump({'ids': ['a']}, f)
    with pytest.raises(ValidationError, match='dim'):
        load_embeddings(path)
    with open(path + '.json', 'w', encoding='utf-8') as f:
        f.write('{not json')
    with pytest.raises(ValidationError):
        load_embeddings(path)


def test_embedding_table_validation():
    with pytest.raises(ValidationError):
        EmbeddingTable(dim=2, ids=['a', 'a'], values=np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        EmbeddingTable(dim=3, ids=['a'], values=np.zeros((1, 2)))


def test_external_predictions(tmp_path, adult):
    uniform = [1 / 34] * 34
    near = [0.9999995 / 34] * 34
    lines = [
        {'id': 'a', 'method': 'lcva', 'probs': uniform},
        {'id': 'b', 'method': 'lcva', 'probs': near},
        {'id': 'c', 'method': 'lcva', 'ranked': [{'cause': 'Stroke', 'confidence': 'high'},
                                                 {'cause': 'TB', 'confidence': 'low'}]},
        {'id': 'd', 'ranked': [31, 'tuberculosis']},
    ]
    path = _write(tmp_path / 'lcva.jsonl', '\n'.join(json.dumps(x) for x in lines) + '\n')
    pset = load_external_predictions(path, adult)
    assert pset.method == 'lcva'
    assert len(pset) == 4
    assert abs(pset['b'].probs.probs.sum() - 1.0) <= 1e-12
    ranked = pset['c'].ranked
    assert ranked.causes == (adult.index('Stroke'), adult.index('TB'))
    assert ranked.top_confidence is Confidence.HIGH
    assert pset['d'].ranked.entries[1] == (adult.index('TB'), Confidence.MEDIUM)


def test_external_predictions_reject_lines(tmp_path, adult):
    lines = [
        json.dumps({'id': 'a', 'probs': [0.5] * 34}),
        json.dumps({'id': 'b', 'ranked': ['Dragon bite']}),
        'not json',
        json.dumps({'probs': [1 / 34] * 34}),
    ]
    path = _write(tmp_path / 'p.jsonl', '\n'.join(lines) + '\n')
    with pytest.raises(RecordValidationError) as excinfo:
        load_external_predictions(path, adult)
    assert [line for line, _ in excinfo.value.rejects] == [1, 2, 3, 4]


def test_external_predictions_reject_wrong_shapes(tmp_path, adult):
    lines = [
        json.dumps({'id': 'a', 'probs': {'x': 1}}),
        json.dumps({'id': 'b', 'probs': ['high'] * 34}),
        json.dumps({'id': 'c', 'ranked': [{'cause': 3.5}]}),
        json.dumps({'id': 'd', 'ranked': 'Stroke'}),
        json.dumps({'id': 'e', 'ranked': [{'cause': 'Stroke', 'confidence': 5}]}),
    ]
    path = _write(tmp_path / 'p.jsonl', '\n'.join(lines) + '\n')
    with pytest.raises(RecordValidationError) as excinfo:
        load_external_predictions(path, adult)
    assert [line for line, _ in excinfo.value.rejects] == [1, 2, 3, 4]


def test_write_predictions_keeps_both_forms(tmp_path, adult):
    probs = np.zeros(34)
    probs[[31, 33]] = [0.7, 0.3]
    entry = PredictionEntry(probs=ProbVector(probs), ranked=RankedPrediction(((31, 'high'), (33, 'low'))))
    pset = PredictionSet('llm', {'a': entry})
    path = str(tmp_path / 'preds.jsonl')
    write_predictions(path, pset, adult)
    with open(path, encoding='utf-8') as f:
        obj = json.loads(f.readline())
    assert obj['ranked'][0] == {'cause': 'Stroke', 'confidence': 'high'}
    assert 'probs' in obj

    loaded = load_external_predictions(path, adult)
    assert loaded.ids == ['a']
    assert np.max(np.abs(loaded['a'].probs.probs - probs)) <= 1e-12
    assert loaded['a'].ranked == entry.ranked


def test_write_predictions_refuses_empty(tmp_path):
    with pytest.raises(ValidationError):
        write_predictions(str(tmp_path / 'x.jsonl'), PredictionSet('m', {}))


def test_merge_prediction_sets():
    entry = PredictionEntry(probs=ProbVector(np.array([1.0])))
    merged = merge_prediction_sets('m', [PredictionSet('m', {'a': entry}), PredictionSet('m', {'b': entry})])
    assert merged.ids == ['a', 'b']
    with pytest.raises(ValidationError):
        merge_prediction_sets('m', [PredictionSet('m', {'a': entry}), PredictionSet('m', {'a': entry})])
