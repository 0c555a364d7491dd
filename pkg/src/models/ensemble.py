"""
Weighted-average and stacked ensembles over per-method probability vectors.

Both are fit on out-of-fold predictions only. Ranked-only methods enter through
as_probability_set, which substitutes the rank-1 one-hot vector.
"""
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ModelLayoutError, ValidationError
from ..core.models import PredictionEntry, PredictionSet, ProbVector, VARecord, labels_of
from ..metrics.scoring import csmf_from_fractions, true_fractions
from .logreg import LogRegModel, fit_logreg

logger = logging.getLogger(__name__)

DEFAULT_GRID_STEP = 0.05
# Score comparisons treat differences below this as ties.
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EnsembleWeights:
    """Convex weights keyed by method name, in the order the methods were given."""

    methods: Tuple[str, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        if len(self.methods) != len(self.weights) or not self.methods:
            raise ValidationError("Ensemble needs one weight per method and at least one method")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValidationError(f"Ensemble weights {list(self.weights)} are not on the simplex")
        object.__setattr__(self, 'methods', tuple(self.methods))
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.methods, self.weights))

    def to_dict(self) -> Dict:
        return {'methods': list(self.methods), 'weights': list(self.weights)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'EnsembleWeights':
        return cls(tuple(data['methods']), tuple(data['weights']))


def as_probability_set(pset: PredictionSet, n_causes: int) -> PredictionSet:
    """Give every entry a probability vector, one-hot on rank 1 where only a ranking exists."""
    by_id = {}
    for record_id, entry in pset.by_id.items():
        if entry.probs is not None:
            by_id[record_id] = entry
            continue
        vec = np.zeros(n_causes, dtype=np.float64)
        vec[entry.ranked.top_cause] = 1.0
        by_id[record_id] = PredictionEntry(probs=ProbVector(vec), ranked=entry.ranked)
    return PredictionSet(pset.method, by_id)


def _check_coverage(sets: Sequence[PredictionSet], ids: Sequence[str]):
    if not sets:
        raise ValidationError("Ensemble needs at least one method")
    wanted = set(ids)
    for pset in sets:
        missing = wanted - set(pset.by_id)
        if missing:
            raise ValidationError(f"{pset.method}: no prediction for {len(missing)} ids, e.g. {sorted(missing)[:5]}")
    names = [s.method for s in sets]
    if len(set(names)) != len(names):
        raise ValidationError(f"Duplicate method names in ensemble: {names}")


def simplex_lattice(n_methods: int, steps: int) -> Iterator[Tuple[int, ...]]:
    """Nonnegative integer vectors summing to `steps`, in lexicographic order."""
    if n_methods == 1:
        yield (steps,)
        return
    for first in range(steps + 1):
        for rest in simplex_lattice(n_methods - 1, steps - first):
            yield (first,) + rest


def fit_weighted_ensemble(
    oof: Sequence[PredictionSet],
    records: Sequence[VARecord],
    grid_step: float = DEFAULT_GRID_STEP,
) -> EnsembleWeights:
    """
    Exhaustive simplex-lattice search on out-of-fold predictions.

    Selection: highest Top-1, then highest CSMF accuracy, then the lexicographically
    smallest weight vector.
    """
    ids = [r.id for r in records]
    _check_coverage(oof, ids)
    steps = int(round(1.0 / grid_step))
    if steps < 1 or abs(steps * grid_step - 1.0) > 1e-9:
        raise ValidationError(f"grid_step {grid_step} does not divide 1")

    y = labels_of(records)
    truth = true_fractions(records)
    stacks = np.stack([pset.prob_matrix(ids) for pset in oof])
    best: Optional[Tuple[int, ...]] = None
    best_hits, best_csmf = -1, -np.inf

    for lattice in simplex_lattice(len(oof), steps):
        weights = np.asarray(lattice, dtype=np.float64) / steps
        combined = np.tensordot(weights, stacks, axes=1)
        hits = int(np.sum(np.argmax(combined, axis=1) == y))
        if hits < best_hits:
            continue
        csmf = csmf_from_fractions(combined.mean(axis=0), truth)
        if hits > best_hits or csmf > best_csmf + TIE_TOLERANCE:
            best, best_hits, best_csmf = lattice, hits, csmf

    result = EnsembleWeights(tuple(p.method for p in oof), tuple(w / steps for w in best))
    logger.info("✓ Weighted ensemble %s (OOF Top-1 %.3f, CSMF %.3f)",
                {m: round(w, 3) for m, w in result.as_dict().items()}, best_hits / len(ids), best_csmf)
    return result


def apply_weighted_ensemble(weights: EnsembleWeights, sets: Sequence[PredictionSet],
                            method: str = 'weighted_ensemble') -> PredictionSet:
    """Per-record convex combination of the methods' probability vectors."""
    names = tuple(s.method for s in sets)
    if names != weights.methods:
        raise ModelLayoutError(f"Ensemble expects methods {list(weights.methods)}, got {list(names)}")
    ids = sets[0].ids
    _check_coverage(sets, ids)
    combined = np.tensordot(np.asarray(weights.weights), np.stack([s.prob_matrix(ids) for s in sets]), axes=1)
    return PredictionSet(method, {
        record_id: PredictionEntry(probs=ProbVector(row / row.sum())) for record_id, row in zip(ids, combined)
    })


def stack_features(sets: Sequence[PredictionSet], ids: Sequence[str]) -> np.ndarray:
    """n x (M*C) matrix of the methods' probability vectors side by side."""
    return np.hstack([s.prob_matrix(ids) for s in sets])


def fit_stacker(
    oof: Sequence[PredictionSet],
    records: Sequence[VARecord],
    lam: float,
    max_iter: int = 2000,
    seed: int = 42,
) -> LogRegModel:
    """Logistic-regression meta-learner on concatenated out-of-fold probabilities."""
    ids = [r.id for r in records]
    _check_coverage(oof, ids)
    X = stack_features(oof, ids)
    n_causes = records[0].age_group.codebook_size
    if X.shape[1] != len(oof) * n_causes:
        raise ModelLayoutError(f"Stacked features have {X.shape[1]} columns, expected {len(oof) * n_causes}")
    model = fit_logreg(X, labels_of(records), n_causes, lam, max_iter=max_iter, seed=seed)
    model.method_order = [s.method for s in oof]
    return model


def predict_stacker(model: LogRegModel, sets: Sequence[PredictionSet], ids: Sequence[str],
                    method: str = 'stacked_ensemble') -> PredictionSet:
    names = [s.method for s in sets]
    if model.method_order is None or names != list(model.method_order):
        raise ModelLayoutError(f"Stacker was fit on methods {model.method_order}, got {names}")
    _check_coverage(sets, ids)
    probs = model.predict_proba(stack_features(sets, ids))
    return PredictionSet(method, {
        record_id: PredictionEntry(probs=ProbVector(row / row.sum())) for record_id, row in zip(ids, probs)
    })


def save_weights(path: str, weights: EnsembleWeights):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(weights.to_dict(), f, indent=2)


def load_weights(path: str) -> EnsembleWeights:
    if not os.path.exists(path):
        raise ValidationError(f"Ensemble weights file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    try:
        return EnsembleWeights.from_dict(data)
    except (KeyError, TypeError) as e:
        raise ValidationError(f"{path}: malformed ensemble weights ({e})") from None
