"""
L2-regularized multinomial logistic regression on embeddings.

Full-batch gradient descent with Armijo backtracking from zero weights. The
weight matrix is C x (d + 1) with the bias in the last column; the bias is not
penalized.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from ..core.errors import LavaError, ModelLayoutError, ValidationError
from ..core.models import PredictionEntry, PredictionSet, ProbVector

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
ARMIJO_C1 = 1e-4
ARMIJO_TAU = 0.5
MAX_BACKTRACKS = 60


@dataclass
class LogRegModel:
    """Fitted classifier; immutable after fitting by convention."""

    weights: np.ndarray
    lam: float
    iterations: int = 0
    grad_norm: float = 0.0
    seed: int = 42
    method_order: Optional[List[str]] = None
    loss_history: List[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[1] < 2:
            raise ValidationError(f"Weights must be C x (d+1), got shape {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise LavaError("Logistic regression weights are not finite")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ModelLayoutError(f"Expected {self.dim} features, got shape {X.shape}")
        return softmax(_augment(X) @ self.weights.T, axis=1)

    def to_dict(self) -> Dict:
        return {
            'weights': self.weights.tolist(),
            'lambda': self.lam,
            'iterations': self.iterations,
            'grad_norm': self.grad_norm,
            'seed': self.seed,
            'method_order': self.method_order,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'LogRegModel':
        try:
            return cls(
                weights=np.asarray(data['weights'], dtype=np.float64),
                lam=float(data['lambda']),
                iterations=int(data.get('iterations', 0)),
                grad_norm=float(data.get('grad_norm', 0.0)),
                seed=int(data.get('seed', 42)),
                method_order=data.get('method_order'),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed model file: {e}") from None


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def logreg_loss_and_grad(weights: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy plus (lam/2)||W||^2 over non-bias weights.

    Args:
        weights: C x (d+1) matrix
        X: n x d features (without the bias column)
        y: n cause indices
        lam: L2 strength

    Returns:
        (loss, gradient with the shape of weights)
    """
    Xa = _augment(X)
    n = Xa.shape[0]
    scores = Xa @ weights.T
    log_norm = logsumexp(scores, axis=1)
    loss = float(np.mean(log_norm - scores[np.arange(n), y]))
    penalized = weights[:, :-1]
    loss += 0.5 * lam * float(np.sum(penalized ** 2))

    probs = np.exp(scores - log_norm[:, None])
    probs[np.arange(n), y] -= 1.0
    grad = probs.T @ Xa / n
    grad[:, :-1] += lam * penalized
    return loss, grad


def fit_logreg(
    X: np.ndarray,
    y: Sequence[int],
    n_classes: int,
    lam: float,
    max_iter: int = 2000,
    tol: float = 1e-6,
    seed: int = 42,
) -> LogRegModel:
    """
    Fit by gradient descent with backtracking line search.

    Stops once the gradient's infinity norm drops below `tol`, after `max_iter`
    iterations, or when no step gives sufficient decrease.

    Args:
        X: n x d feature matrix
        y: Cause index per row
        n_classes: Number of causes C
        lam: L2 strength (>= 0)
        max_iter: Iteration cap
        tol: Gradient infinity-norm threshold
        seed: Recorded with the model; fitting itself is deterministic

    Returns:
        LogRegModel
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValidationError(f"Feature matrix {X.shape} does not match {y.size} labels")
    if y.size < n_classes:
        raise ValidationError(f"Need at least {n_classes} samples to fit {n_classes} classes, got {y.size}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("Feature matrix contains non-finite values")
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValidationError(f"Labels must lie in 0..{n_classes - 1}")

    weights = np.zeros((n_classes, X.shape[1] + 1), dtype=np.float64)
    loss, grad = logreg_loss_and_grad(weights, X, y, lam)
    history = [loss]
    step = 1.0
    iteration = 0

    for iteration in range(1, max_iter + 1):
        if float(np.max(np.abs(grad))) < tol:
            iteration -= 1
            break
        sq_norm = float(np.sum(grad ** 2))
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            candidate = weights - step * grad
            new_loss, new_grad = logreg_loss_and_grad(candidate, X, y, lam)
            if new_loss <= loss - ARMIJO_C1 * step * sq_norm:
                accepted = True
                break
            step *= ARMIJO_TAU
        if not accepted:
            logger.debug("Line search stalled at iteration %d", iteration)
            iteration -= 1
            break
        weights, loss, grad = candidate, new_loss, new_grad
        history.append(loss)
        step *= 2.0

    grad_norm = float(np.max(np.abs(grad)))
    logger.debug("logreg lambda=%g: %d iterations, loss %.6f, |grad|_inf %.2e", lam, iteration, loss, grad_norm)
    return LogRegModel(weights=weights, lam=lam, iterations=iteration, grad_norm=grad_norm,
                       seed=seed, loss_history=history)


def predict_logreg(model: LogRegModel, X: np.ndarray, ids: Sequence[str], method: str = 'logreg') -> PredictionSet:
    """Softmax probabilities per row, keyed by `ids`."""
    probs = model.predict_proba(X)
    if len(ids) != probs.shape[0]:
        raise ValidationError(f"{len(ids)} ids for {probs.shape[0]} feature rows")
    return PredictionSet(method, {
        record_id: PredictionEntry(probs=ProbVector(row / row.sum())) for record_id, row in zip(ids, probs)
    })


def tune_lambda(
    X: np.ndarray,
    y: Sequence[int],
    n_classes: int,
    folds: Sequence[Tuple[Sequence[int], Sequence[int]]],
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    max_iter: int = 2000,
    seed: int = 42,
) -> Tuple[float, np.ndarray]:
    """
    Pick lambda by out-of-fold Top-1 over the given (train, validation) row splits.

    Returns:
        (best lambda, n x C out-of-fold probabilities for that lambda); ties go to
        the earlier grid value
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if not grid:
        raise ValidationError("Lambda grid is empty")
    best_lam, best_hits, best_oof = None, -1, None
    for lam in grid:
        oof = np.full((y.size, n_classes), np.nan)
        for train_rows, val_rows in folds:
            train_rows = np.asarray(train_rows, dtype=np.int64)
            val_rows = np.asarray(val_rows, dtype=np.int64)
            model = fit_logreg(X[train_rows], y[train_rows], n_classes, lam, max_iter=max_iter, seed=seed)
            oof[val_rows] = model.predict_proba(X[val_rows])
        if np.isnan(oof).any():
            raise ValidationError("Inner folds do not cover every training row")
        hits = int(np.sum(np.argmax(oof, axis=1) == y))
        logger.debug("lambda=%g: OOF Top-1 %.4f", lam, hits / y.size)
        if hits > best_hits:
            best_lam, best_hits, best_oof = lam, hits, oof
    logger.info("Selected lambda=%g (OOF Top-1 %.3f)", best_lam, best_hits / y.size)
    return best_lam, best_oof


def save_model(path: str, model: LogRegModel):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(model.to_dict(), f)
    logger.info("✓ Saved model (%d x %d) to %s", model.n_classes, model.dim + 1, path)


def load_model(path: str) -> LogRegModel:
    if not os.path.exists(path):
        raise ValidationError(f"Model file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return LogRegModel.from_dict(json.load(f))
