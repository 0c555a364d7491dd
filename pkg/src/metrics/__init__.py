"""Metrics module for LA-VA."""

from .scoring import (
    EvalReport, PooledStats, top_k_accuracy, csmf_accuracy, csmf_from_fractions, per_cause_report,
    narrative_length_report, evaluate_method, pool_reports, ranked_causes, DEFAULT_BOUNDARIES, POOLED_SCOPE
)
from .reports import (
    reports_to_json, load_reports_json, render_site_table, render_cause_table, render_length_table,
    render_text, write_reports
)

__all__ = [
    'EvalReport', 'PooledStats', 'top_k_accuracy', 'csmf_accuracy', 'csmf_from_fractions',
    'per_cause_report', 'narrative_length_report', 'evaluate_method', 'pool_reports', 'ranked_causes',
    'DEFAULT_BOUNDARIES', 'POOLED_SCOPE',
    'reports_to_json', 'load_reports_json', 'render_site_table', 'render_cause_table',
    'render_length_table', 'render_text', 'write_reports',
]
