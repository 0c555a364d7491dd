"""
Cross-site experiment orchestration.

Per outer fold:
  1. out-of-fold probabilities for each base method from the inner splits
     (the embedding classifier is refit per inner split; LLM and external
     prediction files are fixed and used as-is)
  2. weighted ensemble and stacker fit on those out-of-fold probabilities
  3. base models refit on the whole training part
  4. calibrator fit on the training part's ranked LLM predictions
  5. every method scored on the held-out site

Every fit is preceded by a leakage check against the held-out ids.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..calibrate.calibrator import apply_calibration, fit_calibrator
from ..config import ExperimentConfig
from ..core.codebook import CauseCodebook, load_codebook
from ..core.errors import ConfigError, ValidationError
from ..core.models import PredictionEntry, PredictionSet, PrevalenceVector, ProbVector, VARecord, check_cohort, labels_of
from ..core.probability import empirical_prevalence, normalize
from ..ingest.embedding_io import EmbeddingTable, load_embeddings
from ..ingest.prediction_io import load_external_predictions, merge_prediction_sets
from ..ingest.record_loader import load_records
from ..metrics.scoring import POOLED_SCOPE, EvalReport, evaluate_method
from ..models.baseline import prior_baseline
from ..models.ensemble import (
    apply_weighted_ensemble, as_probability_set, fit_stacker, fit_weighted_ensemble, predict_stacker,
    stack_features
)
from ..models.logreg import fit_logreg, predict_logreg, tune_lambda
from .splits import Fold, FoldPlan, assert_disjoint, loso_split, random_split

logger = logging.getLogger(__name__)

LOGREG = 'logreg'
WEIGHTED = 'weighted_ensemble'
STACKED = 'stacked_ensemble'
PRIOR = 'prior'
CALIBRATED_SUFFIX = '_calibrated'


@dataclass
class ExperimentInputs:
    """Everything a run reads from disk."""

    codebook: CauseCodebook
    records: List[VARecord]
    embeddings: Optional[EmbeddingTable] = None
    llm: Optional[PredictionSet] = None
    externals: List[PredictionSet] = field(default_factory=list)


def load_inputs(config: ExperimentConfig) -> ExperimentInputs:
    """
    Load the cohort and every available prediction source.

    Embeddings and LLM predictions at their default locations are optional;
    explicitly configured paths must exist.
    """
    codebook = load_codebook(config.age)
    records = load_records(config.records_path, codebook)

    embeddings = None
    if config.data.embeddings or os.path.exists(config.embeddings_path):
        embeddings = load_embeddings(config.embeddings_path)
    llm = None
    if config.data.llm_predictions or os.path.exists(config.llm_predictions_path):
        llm = load_external_predictions(config.llm_predictions_path, codebook, method=config.llm.method)
    externals = [load_external_predictions(path, codebook) for path in config.data.external_predictions]
    return ExperimentInputs(codebook, records, embeddings, llm, externals)


def build_plan(config: ExperimentConfig, records: Sequence[VARecord]) -> FoldPlan:
    ev = config.evaluation
    if ev.split_mode == 'random':
        return random_split(records, config.seed, ev.random_folds, ev.inner_folds)
    return loso_split(records, config.seed, ev.inner_folds)


def _base_methods(config: ExperimentConfig, inputs: ExperimentInputs) -> List[str]:
    available = []
    if inputs.embeddings is not None:
        available.append(LOGREG)
    if inputs.llm is not None:
        available.append(inputs.llm.method)
    available.extend(s.method for s in inputs.externals)
    if len(set(available)) != len(available):
        raise ConfigError(f"Prediction sources share a method name: {available}")
    wanted = config.evaluation.base_methods
    if not wanted:
        return available
    unknown = [m for m in wanted if m not in available]
    if unknown:
        raise ConfigError(f"evaluation.base_methods names unavailable methods {unknown}; available: {available}")
    return [m for m in available if m in wanted]


def _rows_of(ids: Sequence[str], splits) -> List:
    row = {record_id: i for i, record_id in enumerate(ids)}
    return [([row[i] for i in train], [row[i] for i in val]) for train, val in splits]


def _probability_set(method: str, ids: Sequence[str], probs: np.ndarray) -> PredictionSet:
    return PredictionSet(method, {
        record_id: PredictionEntry(probs=ProbVector(row / row.sum())) for record_id, row in zip(ids, probs)
    })


class FoldRunner:
    """Fits and predicts everything for one outer fold."""

    def __init__(self, config: ExperimentConfig, inputs: ExperimentInputs, fold: Fold, seed: int):
        self.config = config
        self.inputs = inputs
        self.fold = fold
        self.seed = seed
        self.n_causes = inputs.codebook.size
        by_id = {r.id: r for r in inputs.records}
        self.train_records = [by_id[i] for i in fold.train_ids]
        self.test_records = [by_id[i] for i in fold.test_ids]

    def _guard(self, used_ids: Sequence[str], what: str):
        assert_disjoint(self.fold.test_ids, used_ids, f"fold {self.fold.test_site}: {what}")

    def _logreg(self):
        ids = self.fold.train_ids
        self._guard(ids, 'embedding classifier')
        X = self.inputs.embeddings.matrix(ids)
        y = labels_of(self.train_records)
        models = self.config.models
        lam, oof = tune_lambda(X, y, self.n_causes, _rows_of(ids, self.fold.inner), models.lambda_grid,
                               max_iter=models.max_iter, seed=self.seed)
        model = fit_logreg(X, y, self.n_causes, lam, max_iter=models.max_iter, tol=models.tol, seed=self.seed)
        test = predict_logreg(model, self.inputs.embeddings.matrix(self.fold.test_ids), self.fold.test_ids, LOGREG)
        return _probability_set(LOGREG, ids, oof), test

    def run(self, base_methods: Sequence[str]) -> Dict[str, PredictionSet]:
        """Held-out predictions of every method, keyed by method name."""
        fold, config = self.fold, self.config
        self._guard(fold.train_ids, 'outer training ids')
        oof: Dict[str, PredictionSet] = {}
        test_vectors: Dict[str, PredictionSet] = {}
        results: Dict[str, PredictionSet] = {}
        fixed = {s.method: s for s in self.inputs.externals}
        if self.inputs.llm is not None:
            fixed[self.inputs.llm.method] = self.inputs.llm

        for method in base_methods:
            if method == LOGREG:
                oof[method], results[method] = self._logreg()
                test_vectors[method] = results[method]
            else:
                source = fixed[method]
                oof[method] = as_probability_set(source.subset(fold.train_ids), self.n_causes)
                results[method] = source.subset(fold.test_ids)
                test_vectors[method] = as_probability_set(results[method], self.n_causes)

        if len(base_methods) >= 2:
            oof_sets = [oof[m] for m in base_methods]
            test_sets = [test_vectors[m] for m in base_methods]
            for pset in oof_sets:
                self._guard(pset.ids, f"out-of-fold {pset.method}")
            if config.ensemble.weighted:
                weights = fit_weighted_ensemble(oof_sets, self.train_records, config.ensemble.grid_step)
                results[WEIGHTED] = apply_weighted_ensemble(weights, test_sets, WEIGHTED)
            if config.ensemble.stacker:
                results[STACKED] = self._stacker(oof_sets, test_sets)

        llm = self.inputs.llm
        if config.calibration.enabled and llm is not None and llm.method in base_methods:
            self._guard(fold.train_ids, 'calibrator')
            target = None
            if config.calibration.target is not None:
                target = PrevalenceVector(normalize(config.calibration.target).probs)
            params = fit_calibrator(llm.subset(fold.train_ids), self.train_records, self.inputs.codebook,
                                    stratify=config.calibration.stratify, top_n=config.calibration.top_n,
                                    target=target)
            name = llm.method + CALIBRATED_SUFFIX
            results[name] = apply_calibration(llm.subset(fold.test_ids), params, name)

        prevalence = empirical_prevalence(self.train_records, self.inputs.codebook)
        results[PRIOR] = prior_baseline(prevalence, fold.test_ids, PRIOR)
        return results

    def _stacker(self, oof_sets: List[PredictionSet], test_sets: List[PredictionSet]) -> PredictionSet:
        ids = self.fold.train_ids
        y = labels_of(self.train_records)
        models = self.config.models
        features = stack_features(oof_sets, ids)
        lam, _ = tune_lambda(features, y, self.n_causes, _rows_of(ids, self.fold.inner), models.lambda_grid,
                             max_iter=models.max_iter, seed=self.seed)
        model = fit_stacker(oof_sets, self.train_records, lam, max_iter=models.max_iter, seed=self.seed)
        return predict_stacker(model, test_sets, self.fold.test_ids, STACKED)


def run_loso(
    config: ExperimentConfig,
    inputs: Optional[ExperimentInputs] = None,
    plan: Optional[FoldPlan] = None,
) -> List[EvalReport]:
    """
    Run the cross-site experiment.

    Args:
        config: Experiment configuration
        inputs: Preloaded inputs (loaded from config paths when omitted)
        plan: Fold plan (built from config.evaluation when omitted)

    Returns:
        One EvalReport per (method, held-out site), then one pooled report per
        method over all held-out cases (site None)

    Raises:
        LeakageError: a held-out id reached any training structure
    """
    inputs = inputs or load_inputs(config)
    records = inputs.records
    check_cohort(records)
    labels_of(records)
    plan = plan or build_plan(config, records)
    plan.validate()
    base_methods = _base_methods(config, inputs)
    if not base_methods:
        logger.warning("⚠ No prediction sources found; only the prior baseline will be scored")

    by_id = {r.id: r for r in records}
    ev = config.evaluation
    reports: List[EvalReport] = []
    held_out: Dict[str, List[PredictionSet]] = {}

    for index, fold in enumerate(plan.folds):
        seed = int(np.random.SeedSequence([config.seed, 101, index]).generate_state(1)[0])
        runner = FoldRunner(config, inputs, fold, seed)
        predictions = runner.run(base_methods)
        for method, pset in predictions.items():
            test = pset.subset(fold.test_ids)
            reports.append(evaluate_method(test, runner.test_records, site=fold.test_site,
                                           boundaries=ev.length_boundaries, include_top5=ev.include_top5))
            held_out.setdefault(method, []).append(test)
        logger.info("✓ Fold %s: %d methods scored on %d cases", fold.test_site, len(predictions), len(fold.test_ids))

    for method, sets in held_out.items():
        merged = merge_prediction_sets(method, sets)
        pooled_records = [by_id[i] for i in merged.ids]
        reports.append(evaluate_method(merged, pooled_records, site=None, boundaries=ev.length_boundaries,
                                       include_top5=ev.include_top5, scope=POOLED_SCOPE))
    return reports


def missing_sources(config: ExperimentConfig) -> List[str]:
    """Configured input paths that do not exist (for early CLI diagnostics)."""
    paths = [config.records_path]
    for path in (config.data.embeddings, config.data.llm_predictions, *config.data.external_predictions):
        if path:
            paths.append(path)
    return [p for p in paths if not os.path.exists(p)]


def require_sources(config: ExperimentConfig):
    missing = missing_sources(config)
    if missing:
        raise ValidationError(f"Missing input files: {', '.join(missing)}")
