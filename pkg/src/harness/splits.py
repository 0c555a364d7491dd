"""
Fold construction: leave-one-site-out outer folds, stratified inner folds, and
conventional stratified random splits behind the same FoldPlan interface.

Folds are expressed as record-id lists so every downstream structure can be
checked against the held-out ids.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.model_selection import LeaveOneGroupOut, StratifiedKFold

from ..core.errors import LeakageError, ValidationError
from ..core.models import VARecord, labels_of

logger = logging.getLogger(__name__)

Split = Tuple[List[str], List[str]]


@dataclass
class Fold:
    """One outer fold with its inner (train, validation) splits over the training ids."""

    test_site: str
    train_ids: List[str]
    test_ids: List[str]
    inner: List[Split] = field(default_factory=list)


@dataclass
class FoldPlan:
    folds: List[Fold]
    seed: int
    mode: str = 'loso'

    def validate(self):
        """Raise LeakageError if any fold mixes training and held-out ids."""
        for fold in self.folds:
            assert_disjoint(fold.test_ids, fold.train_ids, f"fold {fold.test_site}: outer train")
            train = set(fold.train_ids)
            for i, (inner_train, inner_val) in enumerate(fold.inner):
                assert_disjoint(fold.test_ids, inner_train, f"fold {fold.test_site}: inner split {i} train")
                assert_disjoint(fold.test_ids, inner_val, f"fold {fold.test_site}: inner split {i} validation")
                assert_disjoint(inner_val, inner_train, f"fold {fold.test_site}: inner split {i}")
                if not set(inner_train) <= train or not set(inner_val) <= train:
                    raise LeakageError(f"fold {fold.test_site}: inner split {i} uses ids outside the training set")


def assert_disjoint(held_out: Sequence[str], used: Sequence[str], context: str):
    """Abort when a held-out id shows up in a training structure."""
    overlap = set(held_out) & set(used)
    if overlap:
        raise LeakageError(f"Leakage in {context}: {len(overlap)} held-out ids used, e.g. {sorted(overlap)[:5]}")


def stratified_kfold(ids: Sequence[str], labels: Sequence[int], k: int, seed: int) -> List[Split]:
    """
    Split ids into k stratified folds.

    Classes with fewer than k members are spread over as many folds as they
    have members.

    Args:
        ids: Record ids
        labels: Class per id
        k: Number of folds (>= 2, <= len(ids))
        seed: Shuffle seed

    Returns:
        k (train ids, validation ids) pairs, ids kept in input order
    """
    ids = list(ids)
    labels = np.asarray(labels)
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    if k > len(ids):
        raise ValidationError(f"Cannot make {k} folds from {len(ids)} ids")
    if labels.shape != (len(ids),):
        raise ValidationError("ids and labels differ in length")

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    try:
        with warnings.catch_warnings():
            warnings.filterwarnings('ignore', message='The least populated class', category=UserWarning)
            index_pairs = list(splitter.split(np.zeros(len(ids)), labels))
    except ValueError as e:
        raise ValidationError(f"Cannot make {k} stratified folds: {e}") from e

    return [([ids[i] for i in train], [ids[i] for i in val]) for train, val in index_pairs]


def _fold_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _inner_splits(records: Sequence[VARecord], inner_k: int, seed: int) -> List[Split]:
    return stratified_kfold([r.id for r in records], labels_of(records), inner_k, seed)


def loso_split(records: Sequence[VARecord], seed: int, inner_k: int = 5) -> FoldPlan:
    """
    One fold per site (sites in sorted order), with stratified inner splits.

    Raises:
        ValidationError: fewer than two sites
    """
    records = list(records)
    sites = np.asarray([r.site for r in records])
    splitter = LeaveOneGroupOut()
    n_sites = splitter.get_n_splits(groups=sites)
    if n_sites < 2:
        raise ValidationError(f"Leave-one-site-out needs at least 2 sites, found {sorted(set(sites.tolist()))}")

    folds = []
    for index, (train_idx, test_idx) in enumerate(splitter.split(np.zeros(len(records)), groups=sites)):
        train = [records[i] for i in train_idx]
        folds.append(Fold(
            test_site=str(sites[test_idx[0]]),
            train_ids=[r.id for r in train],
            test_ids=[records[i].id for i in test_idx],
            inner=_inner_splits(train, inner_k, _fold_seed(seed, index)),
        ))
    plan = FoldPlan(folds, seed, 'loso')
    plan.validate()
    logger.info("✓ LOSO plan: %d folds over %d records", len(folds), len(records))
    return plan


def random_split(records: Sequence[VARecord], seed: int, n_folds: int = 5, inner_k: int = 5) -> FoldPlan:
    """Stratified random outer folds, named split-1..split-k, with the same inner structure."""
    by_id: Dict[str, VARecord] = {r.id: r for r in records}
    outer = stratified_kfold([r.id for r in records], labels_of(records), n_folds, seed)
    folds = []
    for index, (train_ids, test_ids) in enumerate(outer):
        train = [by_id[i] for i in train_ids]
        folds.append(Fold(
            test_site=f"split-{index + 1}",
            train_ids=train_ids,
            test_ids=test_ids,
            inner=_inner_splits(train, inner_k, _fold_seed(seed, index)),
        ))
    plan = FoldPlan(folds, seed, 'random')
    plan.validate()
    logger.info("✓ Random split plan: %d folds over %d records", len(folds), len(records))
    return plan
