"""
Domain types for LA-VA.

All types are immutable after construction and safe to share between threads.
Cause identity is always the integer index into the ordered codebook.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ProbabilityError, ValidationError

# Sum-to-one tolerance for validated vectors.
PROB_TOLERANCE = 1e-9
# Ingested vectors further than this from one are rejected instead of renormalised.
INGEST_TOLERANCE = 1e-6
MAX_RANK = 5


class AgeGroup(str, Enum):
    """PHMRC age module."""

    ADULT = 'adult'
    CHILD = 'child'
    NEONATE = 'neonate'

    @property
    def codebook_size(self) -> int:
        return {'adult': 34, 'child': 21, 'neonate': 6}[self.value]

    @property
    def plural(self) -> str:
        return {'adult': 'adults', 'child': 'children', 'neonate': 'neonates'}[self.value]

    @property
    def age_unit(self) -> str:
        return 'day' if self is AgeGroup.NEONATE else 'year'

    @classmethod
    def parse(cls, raw: str) -> 'AgeGroup':
        try:
            return cls(str(raw).strip().lower())
        except ValueError:
            raise ValidationError(f"Unknown age group: {raw!r}") from None


class Sex(str, Enum):
    MALE = 'male'
    FEMALE = 'female'
    UNKNOWN = 'unknown'

    @classmethod
    def parse(cls, raw: Optional[str]) -> 'Sex':
        value = (raw or '').strip().lower()
        if value in ('male', 'm', '1'):
            return cls.MALE
        if value in ('female', 'f', '2'):
            return cls.FEMALE
        return cls.UNKNOWN


class SymptomAnswer(str, Enum):
    YES = 'yes'
    NO = 'no'
    MISSING = 'missing'


class Confidence(str, Enum):
    HIGH = 'high'
    MEDIUM = 'medium'
    LOW = 'low'

    @classmethod
    def parse(cls, raw: Optional[str], default: 'Confidence' = None) -> 'Confidence':
        value = str(raw or '').strip().lower()
        for member in cls:
            if member.value == value:
                return member
        if default is not None:
            return default
        raise ValidationError(f"Unknown confidence level: {raw!r}")


STRATA: Tuple[Confidence, ...] = (Confidence.HIGH, Confidence.MEDIUM, Confidence.LOW)


def _frozen_array(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Dense probability vector over the C causes of a codebook."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.probs)
        if arr.ndim != 1 or arr.size == 0:
            raise ProbabilityError("Probability vector must be a nonempty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ProbabilityError("Probability vector contains non-finite values")
        if np.any(arr < 0):
            raise ProbabilityError("Probability vector contains negative entries")
        if abs(float(arr.sum()) - 1.0) > PROB_TOLERANCE:
            raise ProbabilityError(f"Probabilities sum to {arr.sum():.12g}, expected 1")
        object.__setattr__(self, 'probs', arr)

    def __len__(self) -> int:
        return int(self.probs.size)

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def to_list(self) -> List[float]:
        return [float(p) for p in self.probs]


class PrevalenceVector(ProbVector):
    """Cause distribution of a population (training prevalence or calibration target)."""


@dataclass(frozen=True)
class RankedPrediction:
    """Up to five ranked causes, each with a confidence label."""

    entries: Tuple[Tuple[int, Confidence], ...]

    def __post_init__(self):
        entries = tuple((int(c), Confidence(conf)) for c, conf in self.entries)
        if not 1 <= len(entries) <= MAX_RANK:
            raise ValidationError(f"Ranked prediction must hold 1..{MAX_RANK} causes, got {len(entries)}")
        causes = [c for c, _ in entries]
        if len(set(causes)) != len(causes):
            raise ValidationError(f"Ranked prediction repeats a cause: {causes}")
        if any(c < 0 for c in causes):
            raise ValidationError(f"Negative cause index in ranked prediction: {causes}")
        object.__setattr__(self, 'entries', entries)

    @property
    def causes(self) -> Tuple[int, ...]:
        return tuple(c for c, _ in self.entries)

    @property
    def top_cause(self) -> int:
        return self.entries[0][0]

    @property
    def top_confidence(self) -> Confidence:
        return self.entries[0][1]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PredictionEntry:
    """Prediction for one record: a probability vector, a ranking, or both."""

    probs: Optional[ProbVector] = None
    ranked: Optional[RankedPrediction] = None

    def __post_init__(self):
        if self.probs is None and self.ranked is None:
            raise ValidationError("Prediction entry needs probs or a ranked list")


@dataclass(frozen=True)
class PredictionSet:
    """Predictions of one method keyed by record id."""

    method: str
    by_id: Mapping[str, PredictionEntry] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'by_id', dict(self.by_id))

    def __len__(self) -> int:
        return len(self.by_id)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self.by_id

    def __getitem__(self, record_id: str) -> PredictionEntry:
        return self.by_id[record_id]

    def __iter__(self) -> Iterator[str]:
        return iter(self.by_id)

    @property
    def ids(self) -> List[str]:
        return list(self.by_id)

    @property
    def n_causes(self) -> Optional[int]:
        """Length of the stored probability vectors, if any entry has one."""
        for entry in self.by_id.values():
            if entry.probs is not None:
                return len(entry.probs)
        return None

    def subset(self, ids: Iterable[str]) -> 'PredictionSet':
        missing = [i for i in ids if i not in self.by_id]
        if missing:
            raise ValidationError(f"{self.method}: no prediction for ids {missing[:5]}")
        return PredictionSet(self.method, {i: self.by_id[i] for i in ids})

    def renamed(self, method: str) -> 'PredictionSet':
        return PredictionSet(method, self.by_id)

    def prob_matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Stack the probability vectors of `ids` into an (n, C) array."""
        rows = []
        for record_id in ids:
            entry = self.by_id.get(record_id)
            if entry is None:
                raise ValidationError(f"{self.method}: no prediction for id {record_id}")
            if entry.probs is None:
                raise ValidationError(f"{self.method}: id {record_id} has no probability vector")
            rows.append(entry.probs.probs)
        return np.vstack(rows) if rows else np.zeros((0, 0))


@dataclass(frozen=True)
class VARecord:
    """One verbal-autopsy interview."""

    id: str
    site: str
    age_group: AgeGroup
    age_value: float
    sex: Sex = Sex.UNKNOWN
    symptoms: Mapping[str, SymptomAnswer] = field(default_factory=dict)
    narrative: Optional[str] = None
    true_cause: Optional[int] = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("Record id must be nonempty")
        object.__setattr__(self, 'symptoms', dict(self.symptoms))
        if self.narrative is not None and not self.narrative.strip():
            object.__setattr__(self, 'narrative', None)
        if self.true_cause is not None:
            if not 0 <= int(self.true_cause) < self.age_group.codebook_size:
                raise ValidationError(
                    f"Record {self.id}: cause index {self.true_cause} out of range for {self.age_group.value}"
                )
            object.__setattr__(self, 'true_cause', int(self.true_cause))

    @property
    def is_labeled(self) -> bool:
        return self.true_cause is not None

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'site': self.site,
            'age_group': self.age_group.value,
            'age_value': self.age_value,
            'sex': self.sex.value,
            'symptoms': {k: v.value for k, v in self.symptoms.items()},
            'narrative': self.narrative,
            'true_cause': self.true_cause,
        }


def check_cohort(records: Sequence[VARecord]) -> None:
    """Raise if record ids repeat within a cohort."""
    seen = set()
    dupes = []
    for record in records:
        if record.id in seen:
            dupes.append(record.id)
        seen.add(record.id)
    if dupes:
        raise ValidationError(f"Duplicate record ids in cohort: {dupes[:10]}")


def labels_of(records: Sequence[VARecord]) -> np.ndarray:
    """True-cause indices of a labeled cohort."""
    unlabeled = [r.id for r in records if r.true_cause is None]
    if unlabeled:
        raise ValidationError(f"Records without a true cause: {unlabeled[:10]}")
    return np.array([r.true_cause for r in records], dtype=np.int64)
