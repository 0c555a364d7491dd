"""
Cause codebooks per age module.

Label order comes from the embedded resources (one label per line) and is the
canonical cause index. Alias tables map free-form names onto those indices.
"""
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import CodebookError
from .models import AgeGroup

logger = logging.getLogger(__name__)

_WHITESPACE = re.compile(r'\s+')
_NON_ALNUM = re.compile(r'[^0-9a-z]+')


def _fold(raw: str) -> str:
    """Trim, collapse inner whitespace and case-fold."""
    return _WHITESPACE.sub(' ', raw).strip().casefold()


def _strip_punctuation(raw: str) -> str:
    return _NON_ALNUM.sub('', _fold(raw))


@dataclass(frozen=True)
class CauseCodebook:
    """Ordered cause labels for one age module plus an alias table."""

    age_group: AgeGroup
    labels: Tuple[str, ...]
    aliases: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, 'labels', labels)
        if len(labels) != self.age_group.codebook_size:
            raise CodebookError(
                f"{self.age_group.value} codebook needs {self.age_group.codebook_size} labels, got {len(labels)}"
            )
        folded = [_fold(label) for label in labels]
        if len(set(folded)) != len(folded):
            raise CodebookError(f"{self.age_group.value} codebook labels are not unique (case-insensitive)")

        aliases: Dict[str, int] = {}
        for alias, index in dict(self.aliases).items():
            if not 0 <= int(index) < len(labels):
                raise CodebookError(f"Alias {alias!r} points at invalid index {index}")
            key = _fold(alias)
            if key in folded and folded.index(key) != int(index):
                raise CodebookError(f"Alias {alias!r} shadows the label {labels[folded.index(key)]!r}")
            aliases[key] = int(index)
        object.__setattr__(self, 'aliases', aliases)

        object.__setattr__(self, '_by_label', {key: i for i, key in enumerate(folded)})
        stripped: Dict[str, int] = {}
        for i, label in enumerate(labels):
            stripped.setdefault(_strip_punctuation(label), i)
        for alias, i in aliases.items():
            stripped.setdefault(_strip_punctuation(alias), i)
        object.__setattr__(self, '_by_stripped', stripped)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def label(self, index: int) -> str:
        if not 0 <= index < len(self.labels):
            raise CodebookError(f"Cause index {index} out of range for {self.age_group.value}")
        return self.labels[index]

    def resolve(self, raw: Optional[str]) -> Optional[int]:
        """
        Map a free-form cause name onto a codebook index.

        Pipeline: trim/collapse whitespace, case-insensitive exact match,
        alias table, punctuation-stripped match. Returns None when unresolved.
        """
        if raw is None:
            return None
        key = _fold(str(raw))
        if not key:
            return None
        if key in self._by_label:
            return self._by_label[key]
        if key in self.aliases:
            return self.aliases[key]
        return self._by_stripped.get(_strip_punctuation(key))

    def index(self, raw: str) -> int:
        """Like resolve, but raises CodebookError when the label is unknown."""
        resolved = self.resolve(raw)
        if resolved is None:
            raise CodebookError(f"Unknown {self.age_group.value} cause label: {raw!r}")
        return resolved

    def to_dict(self) -> Dict:
        return {
            'age_group': self.age_group.value,
            'labels': list(self.labels),
        }


def _read_lines(name: str) -> List[str]:
    text = resources.files(__package__).joinpath('resources').joinpath(name).read_text(encoding='utf-8')
    return [line.rstrip('\r') for line in text.split('\n') if line.strip()]


def parse_alias_lines(lines: Iterable[str], labels: Tuple[str, ...]) -> Dict[str, int]:
    """Parse `alias<TAB>canonical label` lines into an alias → index map."""
    folded = {_fold(label): i for i, label in enumerate(labels)}
    aliases: Dict[str, int] = {}
    for n, line in enumerate(lines, start=1):
        if line.lstrip().startswith('#'):
            continue
        parts = line.split('\t')
        if len(parts) != 2:
            raise CodebookError(f"Alias line {n} must be 'alias<TAB>label': {line!r}")
        alias, canonical = parts[0].strip(), parts[1].strip()
        if _fold(canonical) not in folded:
            raise CodebookError(f"Alias line {n}: {canonical!r} is not a codebook label")
        aliases[alias] = folded[_fold(canonical)]
    return aliases


@lru_cache(maxsize=None)
def load_codebook(age_group) -> CauseCodebook:
    """Load the shipped codebook for an age group."""
    group = age_group if isinstance(age_group, AgeGroup) else AgeGroup.parse(age_group)
    labels = tuple(_read_lines(f"{group.value}_causes.txt"))
    aliases = parse_alias_lines(_read_lines(f"{group.value}_aliases.txt"), labels)
    logger.debug("Loaded %s codebook: %d labels, %d aliases", group.value, len(labels), len(aliases))
    return CauseCodebook(group, labels, aliases)
