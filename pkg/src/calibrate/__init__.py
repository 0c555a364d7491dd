"""Calibration module for LA-VA."""

from .lp_builder import CalibrationLP, build_lp, solve_alpha, residual_weights, make_feasible
from .calibrator import (
    CalibrationParams, solve_lp, apply_calibration, calibrated_vector, fit_calibrator, save_params, load_params
)

__all__ = [
    'CalibrationLP', 'build_lp', 'solve_alpha', 'residual_weights', 'make_feasible',
    'CalibrationParams', 'solve_lp', 'apply_calibration', 'calibrated_vector', 'fit_calibrator',
    'save_params', 'load_params',
]
