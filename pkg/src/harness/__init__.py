"""Harness module for LA-VA: fold plans and the cross-site experiment."""

from .splits import Fold, FoldPlan, assert_disjoint, stratified_kfold, loso_split, random_split
from .loso_runner import ExperimentInputs, FoldRunner, load_inputs, build_plan, run_loso, require_sources

__all__ = [
    'Fold', 'FoldPlan', 'assert_disjoint', 'stratified_kfold', 'loso_split', 'random_split',
    'ExperimentInputs', 'FoldRunner', 'load_inputs', 'build_plan', 'run_loso', 'require_sources',
]
