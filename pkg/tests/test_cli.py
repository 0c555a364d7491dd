"""End-to-end tests of the command-line interface."""
import json
import os

import pytest

from src.config import load_config
from src.core.codebook import load_codebook
from src.ingest.record_loader import load_records
from src.llm.prompts import build_prompt, load_template
from src.llm.response_cache import ResponseCache, cache_key
from src.ui.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, run

KEY_ENV = 'LAVA_CLI_TEST_KEY'


@pytest.fixture
def config_path(tmp_path):
    config = {
        'age_group': 'neonate',
        'seed': 7,
        'output_dir': str(tmp_path / 'out'),
        'synth': {
            'sites': [{'name': name, 'n': 40, 'prevalence': 'random'} for name in ('A', 'B', 'C')],
            'symptom_count': 5,
            'embedding_dim': 4,
            'class_separation': 3.0,
            'llm_top1_accuracy': 0.6,
        },
        'llm': {'cache_dir': str(tmp_path / 'cache'), 'api_key_env': KEY_ENV},
        'models': {'lambda_grid': [0.1, 1.0], 'max_iter': 50},
        'ensemble': {'grid_step': 0.25},
        'evaluation': {'inner_folds': 3},
    }
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(config), encoding='utf-8')
    return str(path)


def _summary(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


def test_synth_then_evaluate(config_path, tmp_path, capsys):
    out = tmp_path / 'out'
    assert run(['synth', '--config', config_path, '-q']) == EXIT_OK
    summary = _summary(capsys)
    assert summary['status'] == 'ok'
    assert summary['records'] == 120
    assert {'records.csv', 'embeddings.csv', 'llm_predictions.jsonl', 'manifest-synth.json'} <= set(os.listdir(out))

    assert run(['evaluate', '--config', config_path, '-q']) == EXIT_OK
    summary = _summary(capsys)
    assert set(summary['pooled']) == {
        'logreg', 'llm', 'weighted_ensemble', 'stacked_ensemble', 'llm_calibrated', 'prior'
    }
    assert (out / 'reports.json').exists()
    assert 'CSMF accuracy by site' in (out / 'reports.txt').read_text(encoding='utf-8')

    with open(out / 'manifest-evaluate.json', encoding='utf-8') as f:
        manifest = json.load(f)
    assert manifest['seed'] == 7
    assert manifest['command'] == 'evaluate'

    (out / 'reports.txt').unlink()
    assert run(['report', '--config', config_path, '-q']) == EXIT_OK
    assert (out / 'reports.txt').exists()


def test_calibrate_and_embedding_commands(config_path, tmp_path, capsys):
    out = tmp_path / 'out'
    assert run(['synth', '--config', config_path, '-q']) == EXIT_OK
    assert run(['calibrate', '--config', config_path, '-q']) == EXIT_OK
    summary = _summary(capsys)
    assert summary['calibrated'] == 120
    assert set(summary['alphas']) == {'high', 'medium', 'low'}
    assert (out / 'calibration.json').exists()
    assert (out / 'llm_calibrated_predictions.jsonl').exists()

    assert run(['train-embed', '--config', config_path, '-q']) == EXIT_OK
    assert _summary(capsys)['lambda'] in (0.1, 1.0)
    assert run(['predict-embed', '--config', config_path, '-q']) == EXIT_OK
    assert _summary(capsys)['predicted'] == 120

    files = [str(out / 'llm_predictions.jsonl'), str(out / 'logreg_predictions.jsonl')]
    assert run(['ensemble', '--config', config_path, '-q', '--predictions', *files]) == EXIT_OK
    summary = _summary(capsys)
    assert summary['methods'] == ['llm', 'logreg']
    assert abs(sum(summary['weights'].values()) - 1.0) <= 1e-9
    assert (out / 'stacked_ensemble_predictions.jsonl').exists()


def test_unknown_flag_exits_with_usage(capsys):
    assert run(['evaluate', '--no-such-flag']) == EXIT_INVALID
    assert 'usage' in capsys.readouterr().err


def test_bad_override_is_invalid_input(config_path):
    assert run(['synth', '--config', config_path, '-q', '--set', 'synth.nonsense=3']) == EXIT_INVALID
    assert run(['synth', '--config', config_path, '-q', '--set', 'no-equals-sign']) == EXIT_INVALID


def test_evaluate_without_inputs_is_invalid(tmp_path):
    assert run(['evaluate', '--out', str(tmp_path / 'empty'), '-q']) == EXIT_INVALID


def test_ensemble_needs_two_sources(config_path):
    assert run(['synth', '--config', config_path, '-q']) == EXIT_OK
    assert run(['ensemble', '--config', config_path, '-q']) == EXIT_INVALID


def test_predict_llm_without_key_is_runtime_failure(config_path, monkeypatch, capsys):
    assert run(['synth', '--config', config_path, '-q']) == EXIT_OK
    capsys.readouterr()
    monkeypatch.delenv(KEY_ENV, raising=False)
    assert run(['predict-llm', '--config', config_path, '-q']) == EXIT_RUNTIME
    assert KEY_ENV in capsys.readouterr().err


def _seed_reply_cache(config_file, fixtures_dir):
    """Store the recorded replies under the cache keys predict-llm will look up."""
    config = load_config(config_file)
    codebook = load_codebook(config.age)
    template = load_template(config.age)
    with open(os.path.join(fixtures_dir, 'phmrc_mini', 'llm_replies.jsonl'), encoding='utf-8') as f:
        replies = {row['id']: row['content'] for row in map(json.loads, f)}
    cache = ResponseCache(config.llm.cache_dir)
    for record in load_records(config.records_path, codebook):
        system, user = build_prompt(record, codebook, template, config.llm.care_access_fields)
        content = replies[record.id]
        cache.put(cache_key(config.llm.model, system, user), {
            'model': config.llm.model,
            'system': system,
            'user': user,
            'response': {'choices': [{'message': {'role': 'assistant', 'content': content}}]},
            'content': content,
        })
    return len(replies)


def test_recorded_cohort_with_external_posteriors(tmp_path, fixtures_dir, monkeypatch, capsys):
    mini = os.path.join(fixtures_dir, 'phmrc_mini')
    config = {
        'age_group': 'neonate',
        'seed': 11,
        'output_dir': str(tmp_path / 'out'),
        'data': {
            'records': os.path.join(mini, 'records.csv'),
            'external_predictions': [os.path.join(mini, 'lcva_posteriors.jsonl')],
        },
        'llm': {'cache_dir': str(tmp_path / 'cache'), 'api_key_env': KEY_ENV},
        'models': {'lambda_grid': [0.1, 1.0], 'max_iter': 100},
        'ensemble': {'grid_step': 0.25},
        'evaluation': {'inner_folds': 2},
    }
    config_file = tmp_path / 'phmrc.json'
    config_file.write_text(json.dumps(config), encoding='utf-8')
    assert _seed_reply_cache(str(config_file), fixtures_dir) == 60

    monkeypatch.delenv(KEY_ENV, raising=False)
    assert run(['predict-llm', '--config', str(config_file), '-q']) == EXIT_OK
    summary = _summary(capsys)
    assert summary['predicted'] == 60
    assert summary['cache_hits'] == 60
    assert summary['requests'] == 0

    assert run(['evaluate', '--config', str(config_file), '-q']) == EXIT_OK
    pooled = _summary(capsys)['pooled']
    assert set(pooled) == {'llm', 'lcva', 'weighted_ensemble', 'stacked_ensemble', 'llm_calibrated', 'prior'}
    assert abs(pooled['llm']['top1'] - 0.75) <= 1e-12
    assert abs(pooled['lcva']['top1'] - 40 / 60) <= 1e-12
    assert pooled['llm']['top5'] is None
    text = (tmp_path / 'out' / 'reports.txt').read_text(encoding='utf-8')
    for site in ('AP', 'Dar', 'Mexico'):
        assert site in text


def test_malformed_records_exit_invalid(config_path, tmp_path):
    assert run(['synth', '--config', config_path, '-q']) == EXIT_OK
    with open(tmp_path / 'out' / 'records.csv', 'a', encoding='utf-8') as f:
        f.write('zz,A,neonate,3,male,,Pneumonia' + ',Yes' * 20 + '\n')
    assert run(['train-embed', '--config', config_path, '-q']) == EXIT_INVALID


def test_unwritable_output_is_runtime_failure(config_path, tmp_path):
    blocker = tmp_path / 'blocker'
    blocker.write_text('not a directory', encoding='utf-8')
    assert run(['synth', '--config', config_path, '-q', '--out', str(blocker / 'out')]) == EXIT_RUNTIME
