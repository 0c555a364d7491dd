"""Models module for LA-VA: embedding classifier, baseline and ensembles."""

from .logreg import (
    LogRegModel, logreg_loss_and_grad, fit_logreg, predict_logreg, tune_lambda, save_model, load_model,
    DEFAULT_LAMBDA_GRID
)
from .baseline import prior_baseline
from .ensemble import (
    EnsembleWeights, as_probability_set, simplex_lattice, fit_weighted_ensemble, apply_weighted_ensemble,
    stack_features, fit_stacker, predict_stacker, save_weights, load_weights, DEFAULT_GRID_STEP
)

__all__ = [
    'LogRegModel', 'logreg_loss_and_grad', 'fit_logreg', 'predict_logreg', 'tune_lambda', 'save_model',
    'load_model', 'DEFAULT_LAMBDA_GRID',
    'prior_baseline',
    'EnsembleWeights', 'as_probability_set', 'simplex_lattice', 'fit_weighted_ensemble',
    'apply_weighted_ensemble', 'stack_features', 'fit_stacker', 'predict_stacker', 'save_weights',
    'load_weights', 'DEFAULT_GRID_STEP',
]
