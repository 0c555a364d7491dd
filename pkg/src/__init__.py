"""
LA-VA - Verbal autopsy cause-of-death coding
"""

__version__ = '0.3.0'
__author__ = 'LA-VA Contributors'

from .core import CauseCodebook, load_codebook, PredictionSet, VARecord
from .calibrate import fit_calibrator, apply_calibration
from .harness import run_loso
from .metrics import evaluate_method

__all__ = [
    'CauseCodebook',
    'load_codebook',
    'PredictionSet',
    'VARecord',
    'fit_calibrator',
    'apply_calibration',
    'run_loso',
    'evaluate_method',
]
