"""
Individual- and population-level scores for a method on a labeled cohort.

Top-k accuracy reads the ranked form when a prediction has one and otherwise ranks
the probability vector (ties to the lower cause index). CSMF accuracy averages
probability vectors; ranked-only predictions contribute the one-hot vector of
their rank-1 cause and the report is flagged accordingly.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import MetricError, ValidationError
from ..core.models import AgeGroup, PredictionEntry, PredictionSet, VARecord
from ..core.probability import ranking

logger = logging.getLogger(__name__)

DEFAULT_BOUNDARIES = (250, 500, 1000)
ABSENT_BUCKET = 'absent'
POOLED_SCOPE = 'all held-out sites'


def ranked_causes(entry: PredictionEntry) -> List[int]:
    """Causes of a prediction from most to least likely."""
    if entry.ranked is not None:
        return list(entry.ranked.causes)
    return ranking(entry.probs.probs)


def _require(preds: PredictionSet, records: Sequence[VARecord]) -> List[PredictionEntry]:
    entries = []
    missing = []
    for record in records:
        if record.true_cause is None:
            raise ValidationError(f"Record {record.id} has no true cause")
        entry = preds.by_id.get(record.id)
        if entry is None:
            missing.append(record.id)
        else:
            entries.append(entry)
    if missing:
        raise ValidationError(f"{preds.method}: no prediction for {len(missing)} records, e.g. {missing[:5]}")
    return entries


def top_k_accuracy(preds: PredictionSet, records: Sequence[VARecord], k: int) -> float:
    """Fraction of records whose true cause is among the k highest-ranked causes."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not records:
        raise MetricError("top_k_accuracy needs a nonempty cohort")
    entries = _require(preds, records)
    hits = sum(record.true_cause in ranked_causes(entry)[:k] for record, entry in zip(records, entries))
    return hits / len(records)


def csmf_from_fractions(predicted: np.ndarray, truth: np.ndarray) -> float:
    """1 - L1(predicted, truth) / (2 (1 - min truth))."""
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise MetricError(f"CSMF vectors differ in length: {predicted.size} vs {truth.size}")
    denominator = 2.0 * (1.0 - float(truth.min()))
    if denominator <= 0:
        raise MetricError("CSMF accuracy is undefined when a single cause holds every case")
    return 1.0 - float(np.abs(predicted - truth).sum()) / denominator


def csmf_vectors(preds: PredictionSet, records: Sequence[VARecord]) -> Tuple[np.ndarray, bool]:
    """
    Per-record CSMF input vectors.

    Returns:
        (n x C matrix, True if any row was a rank-1 one-hot stand-in)
    """
    n_causes = records[0].age_group.codebook_size
    entries = _require(preds, records)
    rows = np.zeros((len(records), n_causes), dtype=np.float64)
    used_one_hot = False
    for i, entry in enumerate(entries):
        if entry.probs is not None:
            if len(entry.probs) != n_causes:
                raise ValidationError(f"{preds.method}: vector of length {len(entry.probs)}, expected {n_causes}")
            rows[i] = entry.probs.probs
        else:
            top = entry.ranked.top_cause
            if top >= n_causes:
                raise ValidationError(f"{preds.method}: cause index {top} out of range")
            rows[i, top] = 1.0
            used_one_hot = True
    return rows, used_one_hot


def true_fractions(records: Sequence[VARecord]) -> np.ndarray:
    n_causes = records[0].age_group.codebook_size
    counts = np.bincount([r.true_cause for r in records], minlength=n_causes).astype(np.float64)
    return counts / counts.sum()


def csmf_accuracy(preds: PredictionSet, records: Sequence[VARecord]) -> float:
    """CSMF accuracy of the mean predicted distribution against the true cause fractions."""
    if not records:
        raise MetricError("csmf_accuracy needs a nonempty cohort")
    rows, _ = csmf_vectors(preds, records)
    return csmf_from_fractions(rows.mean(axis=0), true_fractions(records))


def per_cause_report(preds: PredictionSet, records: Sequence[VARecord]) -> Dict[int, Tuple[float, int]]:
    """Top-1 accuracy and case count per true cause; causes without cases are omitted."""
    entries = _require(preds, records)
    hits: Dict[int, int] = {}
    counts: Dict[int, int] = {}
    for record, entry in zip(records, entries):
        cause = record.true_cause
        counts[cause] = counts.get(cause, 0) + 1
        hits[cause] = hits.get(cause, 0) + int(ranked_causes(entry)[0] == cause)
    return {cause: (hits[cause] / counts[cause], counts[cause]) for cause in sorted(counts)}


def bucket_labels(boundaries: Sequence[int]) -> List[str]:
    labels = [f"<={boundaries[0]}"]
    for low, high in zip(boundaries, boundaries[1:]):
        labels.append(f"{low + 1}-{high}")
    labels.append(f">{boundaries[-1]}")
    return labels


def _bucket_of(length: int, boundaries: Sequence[int]) -> int:
    for i, bound in enumerate(boundaries):
        if length <= bound:
            return i
    return len(boundaries)


def narrative_length_report(
    preds: PredictionSet,
    records: Sequence[VARecord],
    boundaries: Sequence[int] = DEFAULT_BOUNDARIES,
) -> List[Tuple[str, float, int]]:
    """
    Top-1 accuracy by narrative length in characters.

    Args:
        preds: Predictions covering every record
        records: Labeled cohort
        boundaries: Strictly increasing upper bounds of the inner buckets

    Returns:
        (bucket label, Top-1, n) for each populated bucket, "absent" last
    """
    if not boundaries:
        raise ValidationError("narrative_length_report needs at least one boundary")
    if any(high <= low for low, high in zip(boundaries, boundaries[1:])):
        raise ValidationError(f"Boundaries must be strictly increasing: {list(boundaries)}")
    entries = _require(preds, records)
    labels = bucket_labels(boundaries) + [ABSENT_BUCKET]
    hits = [0] * len(labels)
    counts = [0] * len(labels)
    for record, entry in zip(records, entries):
        slot = len(labels) - 1 if record.narrative is None else _bucket_of(len(record.narrative), boundaries)
        counts[slot] += 1
        hits[slot] += int(ranked_causes(entry)[0] == record.true_cause)
    return [(label, hits[i] / counts[i], counts[i]) for i, label in enumerate(labels) if counts[i]]


@dataclass
class EvalReport:
    """Scores of one method on one site (or on a pooled scope when site is None)."""

    method: str
    site: Optional[str]
    top1: float
    top5: Optional[float]
    csmf: float
    n: int
    per_cause_top1: Dict[int, Tuple[float, int]] = field(default_factory=dict)
    length_buckets: List[Tuple[str, float, int]] = field(default_factory=list)
    csmf_one_hot: bool = False
    narrative_share: float = 0.0
    mean_words: float = 0.0
    scope: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            'method': self.method,
            'site': self.site,
            'scope': self.scope,
            'n': self.n,
            'top1': self.top1,
            'top5': self.top5,
            'csmf': self.csmf,
            'csmf_one_hot': self.csmf_one_hot,
            'narrative_share': self.narrative_share,
            'mean_words': self.mean_words,
            'per_cause_top1': {str(c): [acc, n] for c, (acc, n) in self.per_cause_top1.items()},
            'length_buckets': [[label, acc, n] for label, acc, n in self.length_buckets],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'EvalReport':
        return cls(
            method=data['method'],
            site=data.get('site'),
            scope=data.get('scope'),
            n=int(data['n']),
            top1=float(data['top1']),
            top5=None if data.get('top5') is None else float(data['top5']),
            csmf=float(data['csmf']),
            csmf_one_hot=bool(data.get('csmf_one_hot', False)),
            narrative_share=float(data.get('narrative_share', 0.0)),
            mean_words=float(data.get('mean_words', 0.0)),
            per_cause_top1={int(c): (float(v[0]), int(v[1])) for c, v in data.get('per_cause_top1', {}).items()},
            length_buckets=[(str(b[0]), float(b[1]), int(b[2])) for b in data.get('length_buckets', [])],
        )


def evaluate_method(
    preds: PredictionSet,
    records: Sequence[VARecord],
    site: Optional[str] = None,
    boundaries: Sequence[int] = DEFAULT_BOUNDARIES,
    include_top5: Optional[bool] = None,
    scope: Optional[str] = None,
) -> EvalReport:
    """
    Score one method on one cohort.

    Top-5 is left out for neonates unless include_top5 forces it; their six-cause
    list makes it uninformative.
    """
    if not records:
        raise MetricError(f"{preds.method}: nothing to evaluate")
    if include_top5 is None:
        include_top5 = records[0].age_group is not AgeGroup.NEONATE
    rows, one_hot_used = csmf_vectors(preds, records)
    narratives = [r.narrative for r in records if r.narrative is not None]

    report = EvalReport(
        method=preds.method,
        site=site,
        scope=scope or (site if site is not None else POOLED_SCOPE),
        n=len(records),
        top1=top_k_accuracy(preds, records, 1),
        top5=top_k_accuracy(preds, records, 5) if include_top5 else None,
        csmf=csmf_from_fractions(rows.mean(axis=0), true_fractions(records)),
        csmf_one_hot=one_hot_used,
        per_cause_top1=per_cause_report(preds, records),
        length_buckets=narrative_length_report(preds, records, boundaries),
        narrative_share=len(narratives) / len(records),
        mean_words=float(np.mean([len(t.split()) for t in narratives])) if narratives else 0.0,
    )
    logger.debug("%s @ %s: top1=%.3f csmf=%.3f", report.method, report.scope, report.top1, report.csmf)
    return report


@dataclass
class PooledStats:
    """Mean and sample standard deviation across sites."""

    mean: Optional[float]
    sd: Optional[float]
    n_sites: int

    def format(self, digits: int = 3) -> str:
        if self.mean is None:
            return '--'
        if self.sd is None:
            return f"{self.mean:.{digits}f}"
        return f"{self.mean:.{digits}f} ({self.sd:.{digits}f})"

    def to_dict(self) -> Dict:
        return {'mean': self.mean, 'sd': self.sd, 'n_sites': self.n_sites}


def _pool(values: List[Optional[float]]) -> PooledStats:
    present = [v for v in values if v is not None]
    if not present:
        return PooledStats(None, None, 0)
    arr = np.asarray(present, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else None
    return PooledStats(float(arr.mean()), sd, int(arr.size))


def pool_reports(reports: Sequence[EvalReport]) -> Dict[str, Dict[str, PooledStats]]:
    """
    Per-method Mean (sd) over per-site reports; pooled reports (site None) are skipped.

    Returns:
        {method: {'top1': PooledStats, 'top5': ..., 'csmf': ...}}
    """
    by_method: Dict[str, List[EvalReport]] = {}
    for report in reports:
        if report.site is None:
            continue
        by_method.setdefault(report.method, []).append(report)
    return {
        method: {
            'top1': _pool([r.top1 for r in items]),
            'top5': _pool([r.top5 for r in items]),
            'csmf': _pool([r.csmf for r in items]),
        }
        for method, items in by_method.items()
    }
