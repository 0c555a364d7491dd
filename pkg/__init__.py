"""
LA-VA - Verbal autopsy cause-of-death coding

LLM and embedding predictors for verbal-autopsy narratives, a confidence-stratified
calibrator for cause-specific mortality fractions, weighted and stacked ensembles,
and a leave-one-site-out evaluation harness.
"""

__version__ = '0.3.0'
__author__ = 'LA-VA Contributors'
__description__ = 'Calibrated LLM and ensemble cause-of-death coding for verbal autopsies'

# Package metadata
__all__ = ['__version__', '__author__', '__description__']
