"""
Structured-output parsing of chat-completion replies.

A reply must contain a JSON object with a "predictions" list of
{"cause", "confidence"} items; surrounding prose and code fences are ignored.
"""
import json
import logging
from typing import Dict, Optional

from ..core.codebook import CauseCodebook
from ..core.errors import ResponseParseError
from ..core.models import MAX_RANK, Confidence, RankedPrediction

logger = logging.getLogger(__name__)

_decoder = json.JSONDecoder()


def normalize_label(raw: str, codebook: CauseCodebook) -> Optional[int]:
    """Cause index for a free-text label, or None when it cannot be resolved."""
    if not isinstance(raw, str):
        return None
    return codebook.resolve(raw)


def extract_json_object(text: str) -> Optional[Dict]:
    """First JSON object in `text` that has a "predictions" key."""
    start = text.find('{')
    while start != -1:
        try:
            obj, _ = _decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and 'predictions' in obj:
            return obj
        start = text.find('{', start + 1)
    return None


def parse_response(text: str, codebook: CauseCodebook) -> RankedPrediction:
    """
    Parse a reply into a ranked prediction.

    Unresolvable labels are dropped, repeats keep their first position and the
    list is cut to five. Missing or unknown confidences become "medium".

    Raises:
        ResponseParseError: no usable JSON object, or no resolvable cause
    """
    obj = extract_json_object(text or '')
    if obj is None:
        raise ResponseParseError("No JSON object with a 'predictions' list in response")
    items = obj['predictions']
    if not isinstance(items, list):
        raise ResponseParseError("'predictions' is not a list")

    entries = []
    seen = set()
    dropped = []
    for item in items:
        if isinstance(item, dict):
            raw_cause, raw_conf = item.get('cause'), item.get('confidence')
        else:
            raw_cause, raw_conf = item, None
        index = normalize_label(raw_cause, codebook)
        if index is None:
            dropped.append(raw_cause)
            continue
        if index in seen:
            continue
        seen.add(index)
        conf = raw_conf if isinstance(raw_conf, str) else None
        entries.append((index, Confidence.parse(conf, default=Confidence.MEDIUM)))
        if len(entries) == MAX_RANK:
            break

    if dropped:
        logger.debug("Dropped unresolved labels: %s", dropped)
    if not entries:
        raise ResponseParseError(f"No resolvable cause among {len(items)} predictions")
    return RankedPrediction(tuple(entries))


def serialize_prediction(prediction: RankedPrediction, codebook: CauseCodebook, rationale: str = '') -> str:
    """JSON reply text that parse_response maps back to `prediction`."""
    return json.dumps({
        'predictions': [
            {'cause': codebook.label(cause), 'confidence': conf.value} for cause, conf in prediction.entries
        ],
        'rationale': rationale,
    })
