"""
Multi-site synthetic cohorts with controllable marginal and conditional shift.

Causes are drawn per site from that site's prevalence; symptoms come from a shared
per-cause Bernoulli profile in which each rate is flipped (p -> 1 - p) with the
site's flip probability; embeddings are cause-conditional isotropic Gaussians.
Everything is a deterministic function of the seed.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.codebook import CauseCodebook
from ..core.errors import ValidationError
from ..core.models import (
    AgeGroup, Confidence, PredictionEntry, PredictionSet, PrevalenceVector, RankedPrediction,
    Sex, SymptomAnswer, VARecord, MAX_RANK
)
from ..core.probability import normalize
from ..ingest.embedding_io import EmbeddingTable

logger = logging.getLogger(__name__)

_AGE_RANGES = {
    AgeGroup.ADULT: (15, 90),
    AgeGroup.CHILD: (1, 12),
    AgeGroup.NEONATE: (0, 28),
}


@dataclass(frozen=True)
class SiteSpec:
    """One synthetic site."""

    name: str
    n: int
    prevalence: PrevalenceVector
    flip_rate: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"Site {self.name}: n must be >= 1")
        if not 0.0 <= self.flip_rate <= 1.0:
            raise ValidationError(f"Site {self.name}: flip rate {self.flip_rate} outside [0, 1]")


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; see generate_cohort."""

    sites: Tuple[SiteSpec, ...]
    symptom_count: int
    base_symptom_profile: np.ndarray = field(repr=False)
    embedding_dim: int = 16
    class_separation: float = 2.0
    seed: int = 42
    missing_rate: float = 0.0
    narrative_rate: float = 1.0

    def validate(self, n_causes: int):
        if not self.sites:
            raise ValidationError("SynthConfig needs at least one site")
        names = [s.name for s in self.sites]
        if len(set(names)) != len(names):
            raise ValidationError(f"Duplicate site names: {names}")
        for site in self.sites:
            if len(site.prevalence) != n_causes:
                raise ValidationError(f"Site {site.name}: prevalence has {len(site.prevalence)} entries, need {n_causes}")
        profile = np.asarray(self.base_symptom_profile)
        if profile.shape != (n_causes, self.symptom_count):
            raise ValidationError(f"Symptom profile shape {profile.shape} != ({n_causes}, {self.symptom_count})")
        if np.any(profile < 0) or np.any(profile > 1):
            raise ValidationError("Symptom rates must lie in [0, 1]")
        if self.embedding_dim < 1 or self.class_separation < 0:
            raise ValidationError("embedding_dim must be >= 1 and class_separation >= 0")
        if not 0.0 <= self.missing_rate <= 1.0 or not 0.0 <= self.narrative_rate <= 1.0:
            raise ValidationError("missing_rate and narrative_rate must lie in [0, 1]")


def default_symptom_profile(n_causes: int, symptom_count: int, seed: int) -> np.ndarray:
    """Per-cause Bernoulli rates drawn uniformly from [0.05, 0.6]."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    return rng.uniform(0.05, 0.6, size=(n_causes, symptom_count))


def site_prevalence(setting, n_causes: int, seed: int, site_index: int) -> PrevalenceVector:
    """
    Resolve a configured prevalence: 'uniform', 'random' (flat Dirichlet draw
    seeded per site) or an explicit list of C nonnegative weights.
    """
    if isinstance(setting, str):
        if setting == 'uniform':
            return PrevalenceVector(np.full(n_causes, 1.0 / n_causes))
        if setting == 'random':
            rng = np.random.default_rng(np.random.SeedSequence([seed, 13, site_index]))
            return PrevalenceVector(rng.dirichlet(np.ones(n_causes)))
        raise ValidationError(f"Unknown prevalence {setting!r}")
    weights = np.asarray(setting, dtype=np.float64)
    if weights.shape != (n_causes,):
        raise ValidationError(f"Prevalence needs {n_causes} weights, got {weights.size}")
    return PrevalenceVector(normalize(weights).probs)


def synth_config_from_section(section, codebook: CauseCodebook, seed: int) -> SynthConfig:
    """Turn the `synth` section of an experiment config into a SynthConfig."""
    if not section.sites:
        raise ValidationError("synth.sites is empty")
    sites = tuple(
        SiteSpec(site.name, int(site.n), site_prevalence(site.prevalence, codebook.size, seed, i), float(site.flip_rate))
        for i, site in enumerate(section.sites)
    )
    return SynthConfig(
        sites=sites,
        symptom_count=int(section.symptom_count),
        base_symptom_profile=default_symptom_profile(codebook.size, int(section.symptom_count), seed),
        embedding_dim=int(section.embedding_dim),
        class_separation=float(section.class_separation),
        seed=seed,
        missing_rate=float(section.missing_rate),
        narrative_rate=float(section.narrative_rate),
    )


def symptom_ids(symptom_count: int) -> List[str]:
    return [f"s{j + 1:03d}" for j in range(symptom_count)]


def _narrative(record_site: str, sex: Sex, age: float, unit: str, positives: Sequence[str]) -> str:
    who = 'person' if sex is Sex.UNKNOWN else sex.value
    opening = f"The {who}, aged {age:g} {unit}s, died in {record_site}."
    if not positives:
        return opening + " The family reported no specific symptoms."
    return opening + " The family reported " + ", ".join(f"symptom {q}" for q in positives) + "."


def generate_cohort(config: SynthConfig, codebook: CauseCodebook) -> Tuple[List[VARecord], EmbeddingTable]:
    """
    Generate records and embeddings for every configured site.

    Args:
        config: Generator settings
        codebook: Codebook fixing the age group and C

    Returns:
        (records, embeddings) in site order
    """
    n_causes = codebook.size
    config.validate(n_causes)
    root = np.random.SeedSequence(config.seed)
    global_seq, *site_seqs = root.spawn(1 + len(config.sites))

    # Means sit at distance class_separation / sqrt(2) from the origin so that
    # nearly orthogonal pairs end up about class_separation apart.
    global_rng = np.random.default_rng(global_seq)
    directions = global_rng.standard_normal((n_causes, config.embedding_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = directions * (config.class_separation / np.sqrt(2.0))

    base = np.asarray(config.base_symptom_profile, dtype=np.float64)
    questions = symptom_ids(config.symptom_count)
    low, high = _AGE_RANGES[codebook.age_group]
    unit = codebook.age_group.age_unit

    records: List[VARecord] = []
    vectors = []
    for site, seq in zip(config.sites, site_seqs):
        rng = np.random.default_rng(seq)
        flip = rng.random(base.shape) < site.flip_rate
        profile = np.where(flip, 1.0 - base, base)

        causes = rng.choice(n_causes, size=site.n, p=site.prevalence.probs)
        draws = rng.random((site.n, config.symptom_count))
        missing = rng.random((site.n, config.symptom_count)) < config.missing_rate
        ages = rng.integers(low, high + 1, size=site.n)
        sexes = rng.integers(0, 2, size=site.n)
        has_narrative = rng.random(site.n) < config.narrative_rate
        noise = rng.standard_normal((site.n, config.embedding_dim))

        for i in range(site.n):
            cause = int(causes[i])
            positive = draws[i] < profile[cause]
            symptoms = {}
            for j, question in enumerate(questions):
                if missing[i, j]:
                    symptoms[question] = SymptomAnswer.MISSING
                else:
                    symptoms[question] = SymptomAnswer.YES if positive[j] else SymptomAnswer.NO
            sex = Sex.MALE if sexes[i] == 0 else Sex.FEMALE
            age = float(ages[i])
            positives = [q for q in questions if symptoms[q] is SymptomAnswer.YES]
            narrative = _narrative(site.name, sex, age, unit, positives) if has_narrative[i] else None
            records.append(VARecord(
                id=f"{site.name}-{i + 1:05d}",
                site=site.name,
                age_group=codebook.age_group,
                age_value=age,
                sex=sex,
                symptoms=symptoms,
                narrative=narrative,
                true_cause=cause,
            ))
            vectors.append(means[cause] + noise[i])

        logger.debug("Site %s: %d cases, %d flipped symptom rates", site.name, site.n, int(flip.sum()))

    table = EmbeddingTable(
        dim=config.embedding_dim,
        ids=[r.id for r in records],
        values=np.vstack(vectors),
    )
    logger.info("✓ Generated %d synthetic records across %d sites", len(records), len(config.sites))
    return records, table


def simulate_ranked_predictions(
    records: Sequence[VARecord],
    codebook: CauseCodebook,
    top1_accuracy: float = 0.5,
    seed: int = 42,
    list_length: int = MAX_RANK,
    biased_cause: Optional[int] = None,
    bias: float = 0.0,
    method: str = 'llm',
) -> PredictionSet:
    """
    Simulate an LLM-style ranked predictor over a labeled cohort.

    With probability `top1_accuracy` the true cause is ranked first. Otherwise
    rank 1 goes to `biased_cause` with probability `bias` (systematic rank-1 bias)
    or to a random wrong cause, and the true cause is placed at rank 2 half of
    the time. Correct rank-1 answers are mostly "high" confidence, wrong ones
    "medium" or "low".
    """
    if not 0.0 <= top1_accuracy <= 1.0 or not 0.0 <= bias <= 1.0:
        raise ValidationError("top1_accuracy and bias must lie in [0, 1]")
    n_causes = codebook.size
    length = max(1, min(list_length, MAX_RANK, n_causes))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    by_id = {}

    for record in records:
        if record.true_cause is None:
            raise ValidationError(f"Record {record.id} has no true cause to simulate from")
        truth = record.true_cause
        if rng.random() < top1_accuracy:
            first = truth
        elif biased_cause is not None and biased_cause != truth and rng.random() < bias:
            first = biased_cause
        else:
            wrong = [c for c in range(n_causes) if c != truth]
            first = int(rng.choice(wrong))

        ranked = [first]
        if first != truth and length > 1 and rng.random() < 0.5:
            ranked.append(truth)
        pool = [c for c in range(n_causes) if c not in ranked]
        extra = rng.permutation(pool)[:max(0, length - len(ranked))]
        ranked.extend(int(c) for c in extra)

        if first == truth:
            top_conf = Confidence.HIGH if rng.random() < 0.7 else Confidence.MEDIUM
        else:
            top_conf = Confidence.LOW if rng.random() < 0.6 else Confidence.MEDIUM
        entries = [(ranked[0], top_conf)] + [(c, Confidence.LOW) for c in ranked[1:]]
        by_id[record.id] = PredictionEntry(ranked=RankedPrediction(tuple(entries)))

    return PredictionSet(method, by_id)
