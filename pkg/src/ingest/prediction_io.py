"""
JSON Lines prediction files.

One object per line: {"id", "method", "probs": [...]} and/or
{"id", "method", "ranked": [{"cause", "confidence"}]}.
"""
import json
import logging
import os
from typing import Dict, List, Optional

from ..core.codebook import CauseCodebook
from ..core.errors import ProbabilityError, RecordValidationError, ValidationError
from ..core.models import Confidence, PredictionEntry, PredictionSet, RankedPrediction
from ..core.probability import ingest_probs

logger = logging.getLogger(__name__)


def _parse_ranked(items, codebook: CauseCodebook) -> RankedPrediction:
    if not isinstance(items, list):
        raise ValidationError("ranked must be a list")
    entries = []
    for item in items:
        if isinstance(item, dict):
            cause, confidence = item.get('cause'), item.get('confidence')
        else:
            cause, confidence = item, None
        if isinstance(cause, int) and not isinstance(cause, bool):
            index = cause
            if not 0 <= index < codebook.size:
                raise ValidationError(f"ranked cause index {index} out of range")
        elif isinstance(cause, str):
            index = codebook.resolve(cause)
            if index is None:
                raise ValidationError(f"unknown ranked cause {cause!r}")
        else:
            raise ValidationError(f"ranked cause {cause!r} is neither a label nor an index")
        entries.append((index, Confidence.parse(confidence, default=Confidence.MEDIUM)))
    return RankedPrediction(tuple(entries))


def load_external_predictions(path: str, codebook: CauseCodebook, method: Optional[str] = None) -> PredictionSet:
    """
    Read a JSONL prediction file produced by any method (LCVA posteriors, LLM runs, ...).

    Args:
        path: JSONL file
        codebook: Codebook fixing C and resolving ranked cause labels
        method: Method name; defaults to the file's "method" field, then the file stem

    Returns:
        PredictionSet with renormalised probability vectors
    """
    if not os.path.exists(path):
        raise ValidationError(f"Predictions file not found: {path}")

    by_id: Dict[str, PredictionEntry] = {}
    rejects = []
    file_method = None
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValidationError("line is not a JSON object")
                record_id = str(obj.get('id', '')).strip()
                if not record_id:
                    raise ValidationError("missing id")
                if record_id in by_id:
                    raise ValidationError(f"duplicate id {record_id!r}")
                probs = ingest_probs(obj['probs'], codebook.size) if obj.get('probs') is not None else None
                ranked = _parse_ranked(obj['ranked'], codebook) if obj.get('ranked') else None
                by_id[record_id] = PredictionEntry(probs=probs, ranked=ranked)
                file_method = file_method or obj.get('method')
            except (ValueError, ValidationError, ProbabilityError) as e:
                rejects.append((line_no, str(e)))

    if rejects:
        raise RecordValidationError(f"{path}: {len(rejects)} prediction lines rejected", rejects)
    name = method or file_method or os.path.splitext(os.path.basename(path))[0]
    logger.info("✓ Loaded %d %s predictions from %s", len(by_id), name, path)
    return PredictionSet(name, by_id)


def prediction_to_json(record_id: str, method: str, entry: PredictionEntry,
                       codebook: Optional[CauseCodebook] = None) -> Dict:
    obj: Dict = {'id': record_id, 'method': method}
    if entry.probs is not None:
        obj['probs'] = entry.probs.to_list()
    if entry.ranked is not None:
        obj['ranked'] = [
            {'cause': codebook.label(cause) if codebook is not None else cause, 'confidence': conf.value}
            for cause, conf in entry.ranked.entries
        ]
    return obj


def write_predictions(path: str, pset: PredictionSet, codebook: Optional[CauseCodebook] = None):
    """
    Write a prediction set as JSONL.

    Ranked causes are written as canonical labels when a codebook is given and as
    integer indices otherwise; load_external_predictions accepts both.
    """
    if len(pset) == 0:
        raise ValidationError(f"Refusing to write an empty prediction set ({pset.method})")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record_id, entry in pset.by_id.items():
            f.write(json.dumps(prediction_to_json(record_id, pset.method, entry, codebook)) + '\n')
    logger.info("✓ Wrote %d %s predictions to %s", len(pset), pset.method, path)


def merge_prediction_sets(method: str, sets: List[PredictionSet]) -> PredictionSet:
    """Concatenate disjoint prediction sets (e.g. per-fold test predictions)."""
    by_id: Dict[str, PredictionEntry] = {}
    for pset in sets:
        overlap = set(pset.by_id) & set(by_id)
        if overlap:
            raise ValidationError(f"Overlapping ids while merging {method}: {sorted(overlap)[:5]}")
        by_id.update(pset.by_id)
    return PredictionSet(method, by_id)
