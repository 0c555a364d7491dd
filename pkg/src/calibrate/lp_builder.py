"""
Linear program for the confidence-stratified top-N reweighting.

Variables are the rank weights alpha (one block of top_n per stratum) followed by
one slack t_c per cause. The mean calibrated distribution q_bar is affine in alpha,
q_bar = A @ alpha + q0, so L1 matching of q_bar to the target r becomes

    minimize  sum_c t_c
    s.t.      t_c >= +(A alpha + q0 - r)_c
              t_c >= -(A alpha + q0 - r)_c
              alpha_{s,1} >= alpha_{s,2} >= ... >= alpha_{s,N} >= 0
              sum_j alpha_{s,j} <= 1
"""
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.optimize import linprog

from ..core.errors import LavaError, ValidationError
from ..core.models import MAX_RANK, STRATA, PredictionSet, PrevalenceVector

logger = logging.getLogger(__name__)

# Post-processing tolerance for solver round-off.
FEASIBILITY_TOLERANCE = 1e-9


@dataclass
class CalibrationLP:
    """Dense LP in linprog form plus the affine map alpha -> q_bar."""

    n_strata: int
    top_n: int
    n_causes: int
    objective: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    q_linear: np.ndarray = field(repr=False)
    q_offset: np.ndarray = field(repr=False)
    prevalence: PrevalenceVector = field(repr=False)
    target: PrevalenceVector = field(repr=False)
    stratum_counts: List[int] = field(default_factory=list)

    @property
    def n_alpha(self) -> int:
        return self.n_strata * self.top_n

    @property
    def n_variables(self) -> int:
        return self.n_alpha + self.n_causes

    @property
    def stratified(self) -> bool:
        return self.n_strata > 1

    def mean_distribution(self, alpha: np.ndarray) -> np.ndarray:
        """q_bar for a flat alpha vector (strata-major)."""
        return self.q_linear @ np.asarray(alpha, dtype=np.float64) + self.q_offset

    def l1_gap(self, alpha: np.ndarray) -> float:
        return float(np.abs(self.mean_distribution(alpha) - self.target.probs).sum())


def stratum_of(entry_ranked, stratify: bool) -> int:
    """Stratum index of a case: its rank-1 confidence, or 0 when unstratified."""
    if not stratify:
        return 0
    return STRATA.index(entry_ranked.top_confidence)


def residual_weights(ranked: Tuple[int, ...], prevalence: np.ndarray) -> np.ndarray:
    """
    Normalized prevalence over causes outside the ranked list.

    Falls back to a uniform spread over those causes when none of them has
    positive prevalence. When the list covers every cause the residual is spread
    uniformly over the whole list, which keeps q nonincreasing by rank.
    """
    n_causes = prevalence.size
    weights = np.zeros(n_causes, dtype=np.float64)
    outside = np.ones(n_causes, dtype=bool)
    outside[list(ranked)] = False
    if not outside.any():
        weights[:] = 1.0 / n_causes
        return weights
    mass = float(prevalence[outside].sum())
    if mass > 0:
        weights[outside] = prevalence[outside] / mass
    else:
        weights[outside] = 1.0 / outside.sum()
    return weights


def build_lp(
    preds: PredictionSet,
    prevalence: PrevalenceVector,
    target: PrevalenceVector,
    stratify: bool = True,
    top_n: int = MAX_RANK,
) -> CalibrationLP:
    """
    Build the calibration LP from ranked predictions.

    Args:
        preds: Predictions whose entries all carry a ranked form
        prevalence: Training prevalence pi (drives the residual spread)
        target: Distribution r the mean calibrated prediction should match
        stratify: One weight vector per confidence stratum instead of a pooled one
        top_n: Number of ranks that get their own weight (1..5)

    Returns:
        CalibrationLP with S*top_n + C variables
    """
    if len(preds) == 0:
        raise ValidationError("Cannot calibrate on an empty prediction set")
    if not 1 <= top_n <= MAX_RANK:
        raise ValidationError(f"top_n must lie in 1..{MAX_RANK}, got {top_n}")
    pi = prevalence.probs
    n_causes = pi.size
    if len(target) != n_causes:
        raise ValidationError(f"Target has {len(target)} causes, prevalence has {n_causes}")
    if int((pi > 0).sum()) < 2:
        raise ValidationError("Prevalence must be positive on at least two causes")

    n_strata = len(STRATA) if stratify else 1
    n_alpha = n_strata * top_n
    n_cases = len(preds)
    q_linear = np.zeros((n_causes, n_alpha), dtype=np.float64)
    q_offset = np.zeros(n_causes, dtype=np.float64)
    counts = [0] * n_strata

    for record_id, entry in preds.by_id.items():
        if entry.ranked is None:
            raise ValidationError(f"{preds.method}: record {record_id} has no ranked prediction")
        ranked = entry.ranked.causes[:top_n]
        if max(ranked) >= n_causes:
            raise ValidationError(f"{preds.method}: record {record_id} ranks a cause outside the codebook")
        s = stratum_of(entry.ranked, stratify)
        counts[s] += 1
        base = s * top_n

        for j, cause in enumerate(ranked):
            q_linear[cause, base + j] += 1.0 / n_cases

        spread = residual_weights(ranked, pi)
        q_offset += spread / n_cases
        for j in range(len(ranked)):
            q_linear[:, base + j] -= spread / n_cases

    r = target.probs
    eye = np.eye(n_causes)
    rows = [
        np.hstack([q_linear, -eye]),
        np.hstack([-q_linear, -eye]),
    ]
    rhs = [r - q_offset, q_offset - r]

    for s in range(n_strata):
        base = s * top_n
        for j in range(top_n - 1):
            row = np.zeros(n_alpha + n_causes)
            row[base + j + 1] = 1.0
            row[base + j] = -1.0
            rows.append(row[None, :])
            rhs.append(np.zeros(1))
        row = np.zeros(n_alpha + n_causes)
        row[base:base + top_n] = 1.0
        rows.append(row[None, :])
        rhs.append(np.ones(1))

    objective = np.concatenate([np.zeros(n_alpha), np.ones(n_causes)])
    lp = CalibrationLP(
        n_strata=n_strata,
        top_n=top_n,
        n_causes=n_causes,
        objective=objective,
        a_ub=np.vstack(rows),
        b_ub=np.concatenate(rhs),
        q_linear=q_linear,
        q_offset=q_offset,
        prevalence=prevalence,
        target=target,
        stratum_counts=counts,
    )
    logger.debug("Calibration LP: %d variables, %d constraints, strata counts %s",
                 lp.n_variables, lp.a_ub.shape[0], counts)
    return lp


def make_feasible(alpha: np.ndarray) -> np.ndarray:
    """Clip, enforce nonincreasing order and cap the sum at one."""
    alpha = np.maximum(np.asarray(alpha, dtype=np.float64), 0.0)
    alpha = np.minimum.accumulate(alpha)
    total = float(alpha.sum())
    if total > 1.0:
        alpha = alpha / total
    return alpha


def solve_alpha(lp: CalibrationLP) -> Tuple[np.ndarray, float]:
    """
    Solve the LP with the HiGHS dual simplex.

    Returns:
        (alpha as an (n_strata, top_n) array, exact L1 objective at that alpha)
    """
    result = linprog(
        lp.objective,
        A_ub=lp.a_ub,
        b_ub=lp.b_ub,
        bounds=[(0, None)] * lp.n_variables,
        method='highs-ds',
        options={'primal_feasibility_tolerance': 1e-10, 'dual_feasibility_tolerance': 1e-10},
    )
    if not result.success:
        raise LavaError(f"Calibration LP failed: {result.message}")

    alpha = result.x[:lp.n_alpha].reshape(lp.n_strata, lp.top_n)
    alpha = np.vstack([make_feasible(row) for row in alpha])
    objective = lp.l1_gap(alpha.ravel())
    if objective > float(result.fun) + 1e-7:
        logger.warning("⚠ Calibration objective moved from %.3g to %.3g after feasibility repair",
                       result.fun, objective)
    return alpha, objective
