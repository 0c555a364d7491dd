"""
Cohort CSV reader and writer.

Layout (UTF-8): id, site, age_group, age_value, sex, narrative, gs_text, then one
column per symptom question with cells "Yes", "No" or empty. This mirrors the flat
PHMRC export so released data can be dropped in after a column rename.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..core.codebook import CauseCodebook
from ..core.errors import RecordValidationError, ValidationError
from ..core.models import AgeGroup, Sex, SymptomAnswer, VARecord

logger = logging.getLogger(__name__)

FIXED_COLUMNS = ['id', 'site', 'age_group', 'age_value', 'sex', 'narrative', 'gs_text']

_ANSWERS = {'yes': SymptomAnswer.YES, 'no': SymptomAnswer.NO}
_CELL_TEXT = {SymptomAnswer.YES: 'Yes', SymptomAnswer.NO: 'No', SymptomAnswer.MISSING: ''}


@dataclass
class RecordLoadReport:
    """Outcome of reading a cohort file: accepted records plus explicit rejects."""

    records: List[VARecord] = field(default_factory=list)
    rejects: List[Tuple[int, str]] = field(default_factory=list)
    symptom_columns: List[str] = field(default_factory=list)
    rows_read: int = 0

    @property
    def is_complete(self) -> bool:
        return self.rows_read == len(self.records) + len(self.rejects)


def _parse_symptom(cell: str) -> SymptomAnswer:
    # "Don't Know", "Refused" and other PHMRC codes count as missing.
    return _ANSWERS.get(cell.strip().lower(), SymptomAnswer.MISSING)


def read_records(path: str, codebook: CauseCodebook) -> RecordLoadReport:
    """
    Parse a cohort file, collecting every bad row instead of stopping at the first.

    Args:
        path: CSV file in the documented layout
        codebook: Codebook used to resolve the gs_text column

    Returns:
        RecordLoadReport; line numbers in rejects count the header as line 1
    """
    if not os.path.exists(path):
        raise ValidationError(f"Records file not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise ValidationError(f"{path}: empty records file") from None
    except pd.errors.ParserError as e:
        raise ValidationError(f"{path}: malformed CSV ({e})") from None
    header = list(frame.columns)
    if header[:len(FIXED_COLUMNS)] != FIXED_COLUMNS:
        raise ValidationError(
            f"{path}: header must start with {', '.join(FIXED_COLUMNS)}; got {', '.join(header[:len(FIXED_COLUMNS)])}"
        )
    symptom_columns = header[len(FIXED_COLUMNS):]
    report = RecordLoadReport(symptom_columns=symptom_columns, rows_read=len(frame))
    seen_ids: Dict[str, int] = {}

    for offset, row in enumerate(frame.itertuples(index=False, name=None)):
        line = offset + 2
        cells = {col: (cell if isinstance(cell, str) else '') for col, cell in zip(header, row)}
        record_id = cells['id'].strip()
        try:
            if not record_id:
                raise ValidationError("empty id")
            if record_id in seen_ids:
                raise ValidationError(f"duplicate id {record_id!r} (first on line {seen_ids[record_id]})")

            age_group = AgeGroup.parse(cells['age_group'])
            if age_group is not codebook.age_group:
                raise ValidationError(
                    f"age group {age_group.value!r} does not match the {codebook.age_group.value} codebook"
                )
            try:
                age_value = float(cells['age_value'])
            except ValueError:
                raise ValidationError(f"age_value {cells['age_value']!r} is not a number") from None
            if not math.isfinite(age_value):
                raise ValidationError("age_value is not finite")

            true_cause: Optional[int] = None
            gold = cells['gs_text'].strip()
            if gold:
                true_cause = codebook.resolve(gold)
                if true_cause is None:
                    raise ValidationError(f"unresolvable cause label {gold!r}")

            symptoms = {col: _parse_symptom(cells[col]) for col in symptom_columns}
            record = VARecord(
                id=record_id,
                site=cells['site'].strip(),
                age_group=age_group,
                age_value=age_value,
                sex=Sex.parse(cells['sex']),
                symptoms=symptoms,
                narrative=cells['narrative'] or None,
                true_cause=true_cause,
            )
        except ValidationError as e:
            report.rejects.append((line, str(e)))
            continue

        seen_ids[record_id] = line
        report.records.append(record)

    logger.info("✓ Read %d records from %s (%d rejected)", len(report.records), path, len(report.rejects))
    return report


def load_records(path: str, codebook: CauseCodebook) -> List[VARecord]:
    """Load a cohort file; any rejected row aborts the load with every reject listed."""
    report = read_records(path, codebook)
    if report.rejects:
        raise RecordValidationError(f"{path}: {len(report.rejects)} rows rejected", report.rejects)
    return report.records


def write_records(
    path: str,
    records: Sequence[VARecord],
    codebook: CauseCodebook,
    symptom_columns: Optional[Sequence[str]] = None,
):
    """Write records in the layout read_records expects."""
    if symptom_columns is None:
        ordered: Dict[str, None] = {}
        for record in records:
            for question in record.symptoms:
                ordered.setdefault(question, None)
        symptom_columns = list(ordered)

    rows = []
    for record in records:
        row = {
            'id': record.id,
            'site': record.site,
            'age_group': record.age_group.value,
            'age_value': f"{record.age_value:g}",
            'sex': record.sex.value,
            'narrative': record.narrative or '',
            'gs_text': codebook.label(record.true_cause) if record.true_cause is not None else '',
        }
        for question in symptom_columns:
            row[question] = _CELL_TEXT[record.symptoms.get(question, SymptomAnswer.MISSING)]
        rows.append(row)

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame(rows, columns=FIXED_COLUMNS + list(symptom_columns))
    frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')
    logger.info("✓ Wrote %d records to %s", len(rows), path)
