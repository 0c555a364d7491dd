"""
Fit, apply and persist the rank-weight calibration of ranked (LLM) predictions.

Usage:
    params = fit_calibrator(train_preds, train_records, codebook, stratify=True)
    calibrated = apply_calibration(test_preds, params)
    save_params('out/calibration.json', params)
"""
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from ..core.codebook import CauseCodebook
from ..core.errors import ValidationError
from ..core.models import (
    MAX_RANK, STRATA, Confidence, PredictionEntry, PredictionSet, PrevalenceVector, ProbVector, VARecord
)
from ..core.probability import empirical_prevalence
from .lp_builder import CalibrationLP, build_lp, residual_weights, solve_alpha

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationParams:
    """Rank weights per confidence stratum plus the distributions they were fit against."""

    alphas: Dict[Confidence, np.ndarray]
    prevalence: PrevalenceVector
    target: PrevalenceVector
    objective: float = 0.0
    top_n: int = MAX_RANK
    stratified: bool = True

    def __post_init__(self):
        checked = {}
        for stratum in STRATA:
            if stratum not in self.alphas:
                raise ValidationError(f"Missing calibration weights for stratum {stratum.value}")
            alpha = np.zeros(MAX_RANK, dtype=np.float64)
            given = np.asarray(self.alphas[stratum], dtype=np.float64)
            if given.ndim != 1 or given.size > MAX_RANK:
                raise ValidationError(f"Stratum {stratum.value}: expected at most {MAX_RANK} weights")
            alpha[:given.size] = given
            if np.any(alpha < -1e-12) or np.any(np.diff(alpha) > 1e-12) or alpha.sum() > 1.0 + 1e-9:
                raise ValidationError(
                    f"Stratum {stratum.value}: weights {alpha.tolist()} must be nonincreasing, nonnegative, sum <= 1"
                )
            alpha = np.maximum(alpha, 0.0)
            alpha.setflags(write=False)
            checked[stratum] = alpha
        if len(self.prevalence) != len(self.target):
            raise ValidationError("Calibration prevalence and target differ in length")
        if not 1 <= self.top_n <= MAX_RANK:
            raise ValidationError(f"top_n must lie in 1..{MAX_RANK}")
        object.__setattr__(self, 'alphas', checked)

    @property
    def n_causes(self) -> int:
        return len(self.prevalence)

    def alpha_for(self, confidence: Confidence) -> np.ndarray:
        return self.alphas[confidence if self.stratified else STRATA[0]]

    def to_dict(self) -> Dict:
        return {
            'alphas': {s.value: self.alphas[s].tolist() for s in STRATA},
            'prevalence': self.prevalence.to_list(),
            'target': self.target.to_list(),
            'objective': self.objective,
            'top_n': self.top_n,
            'stratified': self.stratified,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'CalibrationParams':
        try:
            return cls(
                alphas={Confidence(k): np.asarray(v, dtype=np.float64) for k, v in data['alphas'].items()},
                prevalence=PrevalenceVector(np.asarray(data['prevalence'], dtype=np.float64)),
                target=PrevalenceVector(np.asarray(data['target'], dtype=np.float64)),
                objective=float(data.get('objective', 0.0)),
                top_n=int(data.get('top_n', MAX_RANK)),
                stratified=bool(data.get('stratified', True)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed calibration parameters: {e}") from None


def solve_lp(lp: CalibrationLP) -> CalibrationParams:
    """Solve a built LP; an unstratified solution is shared by all three strata."""
    alpha, objective = solve_alpha(lp)
    if lp.stratified:
        alphas = {stratum: alpha[i] for i, stratum in enumerate(STRATA)}
    else:
        alphas = {stratum: alpha[0] for stratum in STRATA}
    logger.info("✓ Calibration LP solved: objective %.6f (%s)", objective,
                'stratified' if lp.stratified else 'pooled')
    return CalibrationParams(
        alphas=alphas,
        prevalence=lp.prevalence,
        target=lp.target,
        objective=objective,
        top_n=lp.top_n,
        stratified=lp.stratified,
    )


def calibrated_vector(ranked_causes: Sequence[int], alpha: np.ndarray, prevalence: np.ndarray, top_n: int) -> np.ndarray:
    """
    q for one case: alpha on its top_n ranked causes plus the residual 1 - sum(alpha).

    The residual goes to the unranked causes by normalized prevalence, or
    uniformly over the list when it names every cause. Either way q is affine in
    alpha, which is the map the calibration LP optimizes.
    """
    n_causes = prevalence.size
    ranked = tuple(ranked_causes[:top_n])
    if any(not 0 <= c < n_causes for c in ranked):
        raise ValidationError(f"Ranked causes {list(ranked)} fall outside 0..{n_causes - 1}")
    weights = alpha[:len(ranked)]
    q = np.zeros(n_causes, dtype=np.float64)
    q[list(ranked)] = weights
    residual = max(0.0, 1.0 - float(weights.sum()))
    q += residual * residual_weights(ranked, prevalence)
    return q


def apply_calibration(preds: PredictionSet, params: CalibrationParams, method: Optional[str] = None) -> PredictionSet:
    """
    Attach calibrated probability vectors to ranked predictions.

    Ranked forms are carried through unchanged, so any Top-k computed from them
    is identical before and after.
    """
    pi = params.prevalence.probs
    by_id = {}
    for record_id, entry in preds.by_id.items():
        if entry.ranked is None:
            raise ValidationError(f"{preds.method}: record {record_id} has no ranked prediction")
        alpha = params.alpha_for(entry.ranked.top_confidence)
        q = calibrated_vector(entry.ranked.causes, alpha, pi, params.top_n)
        by_id[record_id] = PredictionEntry(probs=ProbVector(q), ranked=entry.ranked)
    return PredictionSet(method or f"{preds.method}_calibrated", by_id)


def fit_calibrator(
    train_preds: PredictionSet,
    train_records: Sequence[VARecord],
    codebook: CauseCodebook,
    stratify: bool = True,
    top_n: int = MAX_RANK,
    target: Optional[PrevalenceVector] = None,
) -> CalibrationParams:
    """
    Fit rank weights on a labeled training cohort.

    The prevalence pi is the training cause distribution; the target r defaults
    to the same distribution. Strata without training cases take the pooled
    weights.
    """
    if not train_records:
        raise ValidationError("fit_calibrator needs a nonempty training cohort")
    prevalence = empirical_prevalence(train_records, codebook)
    target = target if target is not None else prevalence
    preds = train_preds.subset([r.id for r in train_records])

    lp = build_lp(preds, prevalence, target, stratify=stratify, top_n=top_n)
    params = solve_lp(lp)
    empty = [STRATA[i] for i, n in enumerate(lp.stratum_counts) if n == 0] if stratify else []
    if empty:
        pooled = solve_lp(build_lp(preds, prevalence, target, stratify=False, top_n=top_n))
        alphas = dict(params.alphas)
        for stratum in empty:
            alphas[stratum] = pooled.alphas[stratum]
        logger.info("Strata without training cases use pooled weights: %s", ', '.join(s.value for s in empty))
        params = CalibrationParams(alphas, prevalence, target, params.objective, top_n, True)
    return params


def save_params(path: str, params: CalibrationParams):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(params.to_dict(), f, indent=2)
    logger.info("✓ Saved calibration parameters to %s", path)


def load_params(path: str) -> CalibrationParams:
    if not os.path.exists(path):
        raise ValidationError(f"Calibration file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return CalibrationParams.from_dict(json.load(f))
