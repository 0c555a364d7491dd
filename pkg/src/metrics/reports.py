"""
Report serialization: JSON for machines, aligned plain-text tables for people.

Text tables follow the published layout: sites as rows with a closing
"Mean (sd)" row, causes by site with "--" where a site had no cases.
"""
import json
import logging
import os
from typing import Dict, List, Optional, Sequence

import pandas as pd

from ..core.codebook import CauseCodebook
from ..core.errors import ValidationError
from .scoring import EvalReport, pool_reports

logger = logging.getLogger(__name__)

MISSING_CELL = '--'
METRIC_TITLES = {'top1': 'Top-1 accuracy', 'top5': 'Top-5 accuracy', 'csmf': 'CSMF accuracy'}


def _method_order(reports: Sequence[EvalReport]) -> List[str]:
    seen: Dict[str, None] = {}
    for report in reports:
        seen.setdefault(report.method, None)
    return list(seen)


def reports_to_json(reports: Sequence[EvalReport]) -> Dict:
    pooled = pool_reports(reports)
    return {
        'reports': [r.to_dict() for r in reports],
        'pooled': {
            method: {metric: stats.to_dict() for metric, stats in metrics.items()}
            for method, metrics in pooled.items()
        },
    }


def load_reports_json(path: str) -> List[EvalReport]:
    if not os.path.exists(path):
        raise ValidationError(f"Reports file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    try:
        return [EvalReport.from_dict(item) for item in data['reports']]
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"{path}: malformed reports file ({e})") from None


def render_site_table(reports: Sequence[EvalReport], metric: str = 'csmf') -> str:
    """Site x method table of one metric with a trailing Mean (sd) row."""
    if metric not in METRIC_TITLES:
        raise ValidationError(f"Unknown metric {metric!r}; choose from {sorted(METRIC_TITLES)}")
    site_reports = [r for r in reports if r.site is not None]
    methods = _method_order(site_reports)
    sites = sorted({r.site for r in site_reports})
    cells = {(r.site, r.method): getattr(r, metric) for r in site_reports}

    rows = []
    for site in sites:
        row = {}
        for method in methods:
            value = cells.get((site, method))
            row[method] = MISSING_CELL if value is None else f"{value:.3f}"
        rows.append(row)
    pooled = pool_reports(site_reports)
    rows.append({method: pooled[method][metric].format() for method in methods})

    flagged = [m for m in methods if metric == 'csmf' and any(r.csmf_one_hot for r in site_reports if r.method == m)]
    frame = pd.DataFrame(rows, index=sites + ['Mean (sd)'], columns=methods)
    frame.index.name = 'Site'
    text = f"{METRIC_TITLES[metric]} by site\n{frame.to_string()}"
    if flagged:
        text += "\n* one-hot CSMF (rank-1 vectorization): " + ', '.join(flagged)
    return text


def render_cause_table(reports: Sequence[EvalReport], method: str, codebook: Optional[CauseCodebook] = None) -> str:
    """Cause x site Top-1 table for one method."""
    site_reports = sorted((r for r in reports if r.site is not None and r.method == method), key=lambda r: r.site)
    if not site_reports:
        raise ValidationError(f"No per-site reports for method {method!r}")
    causes = sorted({c for r in site_reports for c in r.per_cause_top1})

    def name(cause: int) -> str:
        return codebook.label(cause) if codebook is not None else str(cause)

    header_rows = {
        'Narratives %': {r.site: f"{100 * r.narrative_share:.1f}" for r in site_reports},
        'Avg words': {r.site: f"{r.mean_words:.1f}" for r in site_reports},
    }
    rows = []
    index = []
    for label, values in header_rows.items():
        rows.append(values)
        index.append(label)
    for cause in causes:
        row = {}
        for report in site_reports:
            value = report.per_cause_top1.get(cause)
            row[report.site] = MISSING_CELL if value is None else f"{value[0]:.2f}"
        rows.append(row)
        index.append(name(cause))

    frame = pd.DataFrame(rows, index=index, columns=[r.site for r in site_reports])
    frame.index.name = 'Cause'
    return f"Cause-specific Top-1 accuracy ({method}) by site\n{frame.to_string()}"


def render_length_table(reports: Sequence[EvalReport]) -> str:
    """Top-1 by narrative-length bucket for every pooled report, labelled with its scope."""
    pooled = [r for r in reports if r.site is None]
    if not pooled:
        return "Narrative length: no pooled reports"
    labels: Dict[str, None] = {}
    for report in pooled:
        for label, _, _ in report.length_buckets:
            labels.setdefault(label, None)
    rows = []
    for report in pooled:
        buckets = {label: (acc, n) for label, acc, n in report.length_buckets}
        rows.append({
            label: (f"{buckets[label][0]:.3f} (n={buckets[label][1]})" if label in buckets else MISSING_CELL)
            for label in labels
        })
    frame = pd.DataFrame(rows, index=[r.method for r in pooled], columns=list(labels))
    frame.index.name = 'Method'
    scope = pooled[0].scope or 'pooled'
    return f"Top-1 accuracy by narrative length in characters (scope: {scope})\n{frame.to_string()}"


def render_text(reports: Sequence[EvalReport], codebook: Optional[CauseCodebook] = None) -> str:
    sections = [render_site_table(reports, metric) for metric in ('top1', 'top5', 'csmf')
                if any(getattr(r, metric) is not None for r in reports if r.site is not None)]
    for method in _method_order([r for r in reports if r.site is not None]):
        sections.append(render_cause_table(reports, method, codebook))
    sections.append(render_length_table(reports))
    return '\n\n'.join(sections) + '\n'


def write_reports(out_dir: str, reports: Sequence[EvalReport], codebook: Optional[CauseCodebook] = None) -> Dict[str, str]:
    """
    Write reports.json and reports.txt into `out_dir`.

    Returns:
        {'json': path, 'text': path}
    """
    if not reports:
        raise ValidationError("No reports to write")
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, 'reports.json')
    text_path = os.path.join(out_dir, 'reports.txt')
    with open(json_path, 'w', encoding='utf-8') as f:
        json.dump(reports_to_json(reports), f, indent=2)
    with open(text_path, 'w', encoding='utf-8') as f:
        f.write(render_text(reports, codebook))
    logger.info("✓ Wrote %d reports to %s", len(reports), out_dir)
    return {'json': json_path, 'text': text_path}
