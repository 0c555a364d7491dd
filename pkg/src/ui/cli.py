"""
Command-line interface for LA-VA.

Logs go to stderr; each command prints one JSON summary line on stdout and
leaves a run manifest in its output directory.

Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.
"""
import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

import yaml

from ..calibrate import apply_calibration, fit_calibrator, load_params, save_params
from ..config import DEFAULT_SEED, ExperimentConfig, load_config
from ..core.codebook import load_codebook
from ..core.errors import ConfigError, LavaError, ValidationError
from ..core.models import PrevalenceVector, labels_of
from ..core.probability import normalize
from ..harness import load_inputs, require_sources, run_loso, stratified_kfold
from ..ingest import (
    load_embeddings, load_external_predictions, load_records, save_embeddings, write_predictions, write_records
)
from ..llm import load_template, predict_batch, write_failure_manifest
from ..metrics import load_reports_json, write_reports
from ..models import (
    apply_weighted_ensemble, as_probability_set, fit_logreg, fit_stacker, fit_weighted_ensemble, load_model,
    predict_logreg, predict_stacker, save_model, save_weights, stack_features, tune_lambda
)
from ..synth import generate_cohort, simulate_ranked_predictions, symptom_ids, synth_config_from_section
from .run_manifest import argv_or_sys, build_manifest, write_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


class UsageError(Exception):
    """Raised instead of exiting when argparse rejects the command line."""


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


class CommandResult:
    """What a command produced: a stdout summary, its inputs and outputs."""

    def __init__(self, summary: Dict, inputs: Sequence[str] = (), outputs: Sequence[str] = ()):
        self.summary = summary
        self.inputs = list(inputs)
        self.outputs = list(outputs)


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', type=str, default=None, help='YAML or JSON experiment config')
    parser.add_argument('--seed', type=int, default=None, help=f"Random seed (default: from config or {DEFAULT_SEED})")
    parser.add_argument('--out', type=str, default=None, help='Output directory (default: from config)')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='Config override such as evaluation.split_mode=random (repeatable)')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser for CLI."""
    parser = ArgumentParser(
        prog='lava',
        description='LA-VA - cause-of-death coding for verbal autopsies with calibrated LLM and ensemble predictors',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Generate a synthetic multi-site cohort (records, embeddings, simulated LLM predictions)
  python main.py synth --config config.yaml

  # Leave-one-site-out evaluation of every available method
  python main.py evaluate --config config.yaml

  # Code real records with a chat model (key from $OPENAI_API_KEY, cached replies reused)
  python main.py predict-llm --config phmrc.yaml --set llm.model=gpt-5

  # Conventional random splits instead of held-out sites
  python main.py evaluate --config config.yaml --set evaluation.split_mode=random

  # Re-render tables from an earlier run
  python main.py report --out output
        """
    )
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True

    commands = {
        'synth': 'Generate a synthetic cohort with embeddings and simulated LLM predictions',
        'predict-llm': 'Predict ranked causes with a chat-completion model',
        'train-embed': 'Train the embedding classifier on a labeled cohort',
        'predict-embed': 'Predict with a trained embedding classifier',
        'calibrate': 'Fit (or apply) confidence-stratified calibration of LLM predictions',
        'ensemble': 'Fit weighted and stacked ensembles on out-of-fold prediction files',
        'evaluate': 'Run the cross-site evaluation and write reports',
        'report': 'Re-render text tables from reports.json',
    }
    subs = {name: subparsers.add_parser(name, help=text, description=text) for name, text in commands.items()}
    for sub in subs.values():
        _add_common(sub)

    subs['predict-embed'].add_argument('--model', type=str, default=None,
                                       help='Model JSON (default: <out>/logreg_model.json)')
    subs['calibrate'].add_argument('--params', type=str, default=None,
                                   help='Apply existing calibration parameters instead of fitting')
    subs['ensemble'].add_argument('--predictions', nargs='+', default=None, metavar='PATH',
                                  help='Out-of-fold prediction files (default: LLM and external files from config)')
    subs['report'].add_argument('--reports', type=str, default=None,
                                help='reports.json to render (default: <out>/reports.json)')
    return parser


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config, args.overrides)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output_dir = args.out
    return config


def _out(config: ExperimentConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


def _labeled(records):
    unlabeled = [r.id for r in records if r.true_cause is None]
    if unlabeled:
        raise ValidationError(f"{len(unlabeled)} records have no cause label, e.g. {unlabeled[:5]}")
    return records


def _symptom_labels(config: ExperimentConfig) -> Optional[Dict[str, str]]:
    path = config.data.symptom_labels
    if not path:
        return None
    if not os.path.exists(path):
        raise ValidationError(f"Symptom label file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        labels = yaml.safe_load(f) or {}
    if not isinstance(labels, dict):
        raise ConfigError(f"{path}: expected a mapping of symptom id to question text")
    return {str(k): str(v) for k, v in labels.items()}


def _inner_rows(ids: List[str], y, config: ExperimentConfig):
    row = {record_id: i for i, record_id in enumerate(ids)}
    splits = stratified_kfold(ids, y, config.evaluation.inner_folds, config.seed)
    return [([row[i] for i in train], [row[i] for i in val]) for train, val in splits]


def cmd_synth(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    codebook = load_codebook(config.age)
    synth = config.synth
    records, embeddings = generate_cohort(synth_config_from_section(synth, codebook, config.seed), codebook)

    records_path = _out(config, 'records.csv')
    suffix = 'bin' if synth.embedding_format == 'bin' else 'csv'
    embeddings_path = _out(config, f"embeddings.{suffix}")
    write_records(records_path, records, codebook, symptom_ids(synth.symptom_count))
    save_embeddings(embeddings_path, embeddings)
    outputs = [records_path, embeddings_path]

    summary = {'records': len(records), 'sites': len({r.site for r in records}), 'causes': codebook.size}
    if synth.llm_top1_accuracy is not None:
        biased = codebook.index(synth.llm_biased_cause) if synth.llm_biased_cause else None
        llm = simulate_ranked_predictions(records, codebook, synth.llm_top1_accuracy, config.seed,
                                          biased_cause=biased, bias=synth.llm_bias, method=config.llm.method)
        llm_path = _out(config, 'llm_predictions.jsonl')
        write_predictions(llm_path, llm, codebook)
        outputs.append(llm_path)
        summary['llm_predictions'] = len(llm)
    return CommandResult(summary, outputs=outputs)


def cmd_predict_llm(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    codebook = load_codebook(config.age)
    records = load_records(config.records_path, codebook)
    result = predict_batch(records, codebook, load_template(config.age), config.llm,
                           symptom_labels=_symptom_labels(config))
    predictions_path = _out(config, 'llm_predictions.jsonl')
    failures_path = _out(config, 'llm_failures.jsonl')
    write_predictions(predictions_path, result.predictions, codebook)
    write_failure_manifest(failures_path, result.failures)
    inputs = [config.records_path] + ([config.data.symptom_labels] if config.data.symptom_labels else [])
    return CommandResult(result.summary(), inputs, [predictions_path, failures_path])


def cmd_train_embed(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    codebook = load_codebook(config.age)
    records = _labeled(load_records(config.records_path, codebook))
    embeddings = load_embeddings(config.embeddings_path)
    ids = [r.id for r in records]
    X, y = embeddings.matrix(ids), labels_of(records)
    models = config.models
    lam, _ = tune_lambda(X, y, codebook.size, _inner_rows(ids, y, config), models.lambda_grid,
                         max_iter=models.max_iter, seed=config.seed)
    model = fit_logreg(X, y, codebook.size, lam, max_iter=models.max_iter, tol=models.tol, seed=config.seed)
    model_path = _out(config, 'logreg_model.json')
    save_model(model_path, model)
    summary = {'records': len(records), 'lambda': lam, 'iterations': model.iterations, 'grad_norm': model.grad_norm}
    return CommandResult(summary, [config.records_path, config.embeddings_path], [model_path])


def cmd_predict_embed(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    codebook = load_codebook(config.age)
    records = load_records(config.records_path, codebook)
    embeddings = load_embeddings(config.embeddings_path)
    model_path = args.model or _out(config, 'logreg_model.json')
    model = load_model(model_path)
    ids = [r.id for r in records]
    preds = predict_logreg(model, embeddings.matrix(ids), ids)
    predictions_path = _out(config, 'logreg_predictions.jsonl')
    write_predictions(predictions_path, preds, codebook)
    return CommandResult({'predicted': len(preds)}, [config.records_path, config.embeddings_path, model_path],
                         [predictions_path])


def cmd_calibrate(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    codebook = load_codebook(config.age)
    records = load_records(config.records_path, codebook)
    llm = load_external_predictions(config.llm_predictions_path, codebook, method=config.llm.method)
    inputs = [config.records_path, config.llm_predictions_path]
    outputs = []
    cal = config.calibration

    if args.params:
        params = load_params(args.params)
        inputs.append(args.params)
    else:
        labeled = _labeled(records)
        target = PrevalenceVector(normalize(cal.target).probs) if cal.target is not None else None
        params = fit_calibrator(llm, labeled, codebook, stratify=cal.stratify, top_n=cal.top_n, target=target)
        params_path = _out(config, 'calibration.json')
        save_params(params_path, params)
        outputs.append(params_path)

    calibrated = apply_calibration(llm.subset([r.id for r in records]), params)
    predictions_path = _out(config, f"{calibrated.method}_predictions.jsonl")
    write_predictions(predictions_path, calibrated, codebook)
    outputs.append(predictions_path)
    summary = {
        'calibrated': len(calibrated),
        'objective': params.objective,
        'alphas': {stratum.value: [round(float(a), 6) for a in alpha] for stratum, alpha in params.alphas.items()},
    }
    return CommandResult(summary, inputs, outputs)


def cmd_ensemble(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    codebook = load_codebook(config.age)
    records = _labeled(load_records(config.records_path, codebook))
    paths = args.predictions
    if not paths:
        paths = [config.llm_predictions_path] + list(config.data.external_predictions)
    if len(paths) < 2:
        raise ValidationError("An ensemble needs at least two prediction files")

    ids = [r.id for r in records]
    sets = []
    for path in paths:
        method = config.llm.method if path == config.llm_predictions_path else None
        pset = load_external_predictions(path, codebook, method=method)
        sets.append(as_probability_set(pset.subset(ids), codebook.size))
    if len({s.method for s in sets}) != len(sets):
        raise ValidationError(f"Prediction files share a method name: {[s.method for s in sets]}")

    outputs = []
    summary: Dict = {'records': len(records), 'methods': [s.method for s in sets]}
    if config.ensemble.weighted:
        weights = fit_weighted_ensemble(sets, records, config.ensemble.grid_step)
        weights_path = _out(config, 'ensemble_weights.json')
        predictions_path = _out(config, 'weighted_ensemble_predictions.jsonl')
        save_weights(weights_path, weights)
        write_predictions(predictions_path, apply_weighted_ensemble(weights, sets), codebook)
        outputs += [weights_path, predictions_path]
        summary['weights'] = weights.as_dict()
    if config.ensemble.stacker:
        y = labels_of(records)
        models = config.models
        lam, _ = tune_lambda(stack_features(sets, ids), y, codebook.size, _inner_rows(ids, y, config),
                             models.lambda_grid, max_iter=models.max_iter, seed=config.seed)
        model = fit_stacker(sets, records, lam, max_iter=models.max_iter, seed=config.seed)
        model_path = _out(config, 'stacker_model.json')
        predictions_path = _out(config, 'stacked_ensemble_predictions.jsonl')
        save_model(model_path, model)
        write_predictions(predictions_path, predict_stacker(model, sets, ids), codebook)
        outputs += [model_path, predictions_path]
        summary['stacker_lambda'] = lam
    return CommandResult(summary, [config.records_path] + list(paths), outputs)


def cmd_evaluate(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    require_sources(config)
    inputs = load_inputs(config)
    reports = run_loso(config, inputs)
    paths = write_reports(config.output_dir, reports, inputs.codebook)

    pooled = {r.method: {'top1': r.top1, 'top5': r.top5, 'csmf': r.csmf} for r in reports if r.site is None}
    used = [config.records_path] + [p for p in (config.embeddings_path, config.llm_predictions_path)
                                    if os.path.exists(p)] + list(config.data.external_predictions)
    return CommandResult({'reports': len(reports), 'pooled': pooled}, used, list(paths.values()))


def cmd_report(config: ExperimentConfig, args: argparse.Namespace) -> CommandResult:
    source = args.reports or _out(config, 'reports.json')
    reports = load_reports_json(source)
    out_dir = args.out or os.path.dirname(os.path.abspath(source))
    paths = write_reports(out_dir, reports, load_codebook(config.age))
    return CommandResult({'reports': len(reports), 'text': paths['text']}, [source], [paths['text']])


COMMANDS: Dict[str, Callable[[ExperimentConfig, argparse.Namespace], CommandResult]] = {
    'synth': cmd_synth,
    'predict-llm': cmd_predict_llm,
    'train-embed': cmd_train_embed,
    'predict-embed': cmd_predict_embed,
    'calibrate': cmd_calibrate,
    'ensemble': cmd_ensemble,
    'evaluate': cmd_evaluate,
    'report': cmd_report,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Exit code: 0 success, 1 invalid input or usage, 2 runtime failure
    """
    argv = argv_or_sys(argv)
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_INVALID
    _configure_logging(args)

    try:
        config = _load(args)
        result = COMMANDS[args.command](config, args)
        manifest = build_manifest(args.command, argv, config.to_dict(), config.seed, result.inputs, result.outputs)
        out_dir = os.path.dirname(result.outputs[0]) if result.outputs else config.output_dir
        manifest_path = write_manifest(out_dir or '.', manifest)
    except ValidationError as e:
        logger.error("❌ %s", e)
        return EXIT_INVALID
    except LavaError as e:
        logger.error("❌ %s", e)
        return EXIT_RUNTIME
    except (OSError, ValueError, KeyError) as e:
        logger.error("❌ %s: %s", type(e).__name__, e)
        return EXIT_RUNTIME

    summary = {'command': args.command, 'status': 'ok', **result.summary, 'manifest': manifest_path}
    print(json.dumps(summary, default=float))
    logger.info("✓ %s finished", args.command)
    return EXIT_OK


def main():
    """Main entry point for CLI."""
    return run()


if __name__ == '__main__':
    sys.exit(main())
