"""Tests for the rank-weight calibration LP and its application."""
import numpy as np
import pytest

from src.calibrate.calibrator import (
    CalibrationParams, apply_calibration, calibrated_vector, fit_calibrator, load_params, save_params, solve_lp
)
from src.calibrate.lp_builder import build_lp, make_feasible, residual_weights
from src.core.errors import ValidationError
from src.core.models import (
    STRATA, AgeGroup, Confidence, PredictionEntry, PredictionSet, PrevalenceVector, ProbVector, RankedPrediction
)
from src.metrics.scoring import csmf_accuracy, top_k_accuracy
from src.synth.cohort_generator import simulate_ranked_predictions

_GRID = None


def _alpha_grid():
    """Every nonincreasing 4-vector on a 0.01 lattice with sum <= 1."""
    global _GRID
    if _GRID is None:
        units = 100
        chunks = []
        for a1 in range(units + 1):
            b = np.arange(a1 + 1)
            a2, a3, a4 = np.meshgrid(b, b, b, indexing='ij')
            keep = (a2 >= a3) & (a3 >= a4) & (a1 + a2 + a3 + a4 <= units)
            chunks.append(np.column_stack([np.full(int(keep.sum()), a1), a2[keep], a3[keep], a4[keep]]))
        _GRID = np.vstack(chunks) / units
    return _GRID


def _random_instance(seed, full_coverage=False):
    rng = np.random.default_rng(seed)
    n_causes = 4 if full_coverage else 4 + seed % 2
    n_cases = int(rng.integers(10, 51))
    labels = rng.integers(0, n_causes, size=n_cases)
    labels[:2] = [0, 1]
    by_id = {}
    for i in range(n_cases):
        length = n_causes if full_coverage else int(rng.integers(1, min(4, n_causes - 1) + 1))
        causes = rng.permutation(n_causes)[:length]
        by_id[f"c{i}"] = PredictionEntry(ranked=RankedPrediction(tuple((int(c), Confidence.HIGH) for c in causes)))
    prevalence = PrevalenceVector(np.bincount(labels, minlength=n_causes) / n_cases)
    return PredictionSet('llm', by_id), prevalence


def _mean_calibrated(preds, alpha, prevalence):
    rows = [calibrated_vector(preds[i].ranked.causes, alpha, prevalence.probs, 5) for i in preds.ids]
    return np.mean(rows, axis=0)


@pytest.mark.parametrize('full_coverage', [False, True])
@pytest.mark.parametrize('seed', range(20))
def test_lp_beats_exhaustive_grid(seed, full_coverage):
    preds, prevalence = _random_instance(seed, full_coverage)
    r = prevalence.probs

    # affine map rebuilt from calibrated_vector, independent of the LP matrices
    q0 = _mean_calibrated(preds, np.zeros(5), prevalence)
    columns = []
    for j in range(4):
        basis = np.zeros(5)
        basis[j] = 1.0
        columns.append(_mean_calibrated(preds, basis, prevalence) - q0)
    linear = np.column_stack(columns)
    grid_gaps = np.abs(_alpha_grid() @ linear.T + q0 - r).sum(axis=1)

    params = solve_lp(build_lp(preds, prevalence, prevalence, stratify=False))
    alpha = params.alpha_for(Confidence.HIGH)
    assert params.objective <= grid_gaps.min() + 1e-6
    direct = np.abs(_mean_calibrated(preds, alpha, prevalence) - r).sum()
    assert abs(direct - params.objective) <= 1e-9


def test_calibrated_vector_example():
    prevalence = np.array([0.4, 0.3, 0.2, 0.1])
    q = calibrated_vector((0, 1), np.array([0.5, 0.3, 0, 0, 0]), prevalence, 5)
    assert np.allclose(q, [0.5, 0.3, 0.2 * 2 / 3, 0.2 / 3], atol=1e-12)
    assert abs(q.sum() - 1.0) <= 1e-12


def test_calibrated_vector_extremes():
    prevalence = np.array([0.4, 0.3, 0.2, 0.1])
    one_hot = calibrated_vector((2, 0, 1), np.array([1.0, 0, 0, 0, 0]), prevalence, 5)
    assert one_hot.tolist() == [0.0, 0.0, 1.0, 0.0]
    residual = calibrated_vector((2, 0), np.zeros(5), prevalence, 5)
    assert np.allclose(residual, [0, 0.75, 0, 0.25])
    assert np.allclose(residual_weights((0, 1), np.array([0.5, 0.5, 0, 0])), [0, 0, 0.5, 0.5])
    with pytest.raises(ValidationError):
        calibrated_vector((7,), np.zeros(5), prevalence, 5)


def test_full_coverage_spreads_residual_over_the_list():
    prevalence = np.array([0.4, 0.3, 0.2, 0.1])
    assert np.allclose(residual_weights((3, 1, 0, 2), prevalence), [0.25] * 4)
    q = calibrated_vector((3, 1, 0, 2), np.array([0.4, 0.2, 0.2, 0.0, 0.0]), prevalence, 5)
    assert np.allclose(q, [0.25, 0.25, 0.05, 0.45], atol=1e-12)
    assert abs(q.sum() - 1.0) <= 1e-12
    by_rank = q[[3, 1, 0, 2]]
    assert np.all(np.diff(by_rank) <= 1e-12)
    assert np.allclose(calibrated_vector((2, 0, 1, 3), np.zeros(5), prevalence, 5), [0.25] * 4)


def test_full_coverage_objective_is_the_applied_gap():
    rng = np.random.default_rng(5)
    target = PrevalenceVector(np.array([0.4, 0.3, 0.2, 0.1]))
    by_id = {
        f"c{i}": PredictionEntry(ranked=RankedPrediction(tuple((int(c), Confidence.HIGH) for c in rng.permutation(4))))
        for i in range(20)
    }
    preds = PredictionSet('llm', by_id)
    params = solve_lp(build_lp(preds, target, target, stratify=False))
    calibrated = apply_calibration(preds, params)
    mean_q = np.mean([calibrated[i].probs.probs for i in calibrated.ids], axis=0)
    assert abs(np.abs(mean_q - target.probs).sum() - params.objective) <= 1e-9


def test_top_n_limits_weighted_ranks():
    prevalence = np.array([0.25, 0.25, 0.25, 0.25])
    q = calibrated_vector((0, 1, 2), np.array([0.4, 0.3, 0.2, 0, 0]), prevalence, 1)
    assert np.allclose(q, [0.4, 0.2, 0.2, 0.2])


def test_lp_dimensions(ranked_set):
    preds = ranked_set({'a': [0, 1], 'b': [2], 'c': [3, 0, 1]}, confidence={'a': 'high', 'b': 'low', 'c': 'low'})
    prevalence = PrevalenceVector(np.array([0.4, 0.3, 0.2, 0.1]))
    pooled = build_lp(preds, prevalence, prevalence, stratify=False)
    stratified = build_lp(preds, prevalence, prevalence, stratify=True)
    assert pooled.n_variables == 5 + 4
    assert stratified.n_variables == 15 + 4
    assert stratified.a_ub.shape == (2 * 4 + 3 * 5, 19)
    assert stratified.stratum_counts == [1, 0, 2]


def test_zero_objective_when_rank_one_is_always_right(ranked_set):
    preds = ranked_set({'a': [0, 1], 'b': [1, 2], 'c': [2, 0], 'd': [0, 3]})
    prevalence = PrevalenceVector(np.array([0.5, 0.25, 0.25, 0.0]))
    params = solve_lp(build_lp(preds, prevalence, prevalence, stratify=False))
    assert params.objective <= 1e-9


def test_degenerate_inputs_rejected(ranked_set):
    preds = ranked_set({'a': [0, 1]})
    with pytest.raises(ValidationError):
        build_lp(preds, PrevalenceVector(np.array([1.0, 0, 0])), PrevalenceVector(np.array([1.0, 0, 0])))
    prevalence = PrevalenceVector(np.array([0.5, 0.5, 0]))
    with pytest.raises(ValidationError):
        build_lp(preds, prevalence, PrevalenceVector(np.array([0.5, 0.5])))
    with pytest.raises(ValidationError):
        build_lp(preds, prevalence, prevalence, top_n=6)
    with pytest.raises(ValidationError):
        build_lp(PredictionSet('llm', {}), prevalence, prevalence)
    probs_only = PredictionSet('x', {'a': PredictionEntry(probs=ProbVector(np.array([0.5, 0.5, 0])))})
    with pytest.raises(ValidationError):
        build_lp(probs_only, prevalence, prevalence)


def test_make_feasible():
    assert make_feasible([0.5, 0.6, -0.1]).tolist() == [0.5, 0.5, 0.0]
    assert np.allclose(make_feasible([0.8, 0.8]), [0.5, 0.5])


def test_params_validation():
    prevalence = PrevalenceVector(np.array([0.5, 0.5]))
    good = {s: np.array([0.6, 0.2]) for s in STRATA}
    params = CalibrationParams(good, prevalence, prevalence)
    assert params.alpha_for(Confidence.LOW).tolist() == [0.6, 0.2, 0, 0, 0]
    with pytest.raises(ValidationError):
        CalibrationParams({s: np.array([0.2, 0.6]) for s in STRATA}, prevalence, prevalence)
    with pytest.raises(ValidationError):
        CalibrationParams({Confidence.HIGH: np.array([0.5])}, prevalence, prevalence)


def _neonate_cohort(make_records, n, seed):
    causes = np.random.default_rng(seed).integers(0, 6, size=n)
    return make_records([int(c) for c in causes], age_group=AgeGroup.NEONATE)


def test_calibration_keeps_rankings(make_records, neonate):
    records = _neonate_cohort(make_records, 400, seed=1)
    preds = simulate_ranked_predictions(records, neonate, top1_accuracy=0.5, seed=3)
    params = fit_calibrator(preds, records, neonate)
    calibrated = apply_calibration(preds, params)
    assert calibrated.method == 'llm_calibrated'
    for k in (1, 3, 5):
        assert top_k_accuracy(calibrated, records, k) == top_k_accuracy(preds, records, k)
    for record_id in calibrated.ids:
        assert abs(calibrated[record_id].probs.probs.sum() - 1.0) <= 1e-9
    with pytest.raises(ValidationError):
        apply_calibration(PredictionSet('x', {'a': PredictionEntry(probs=ProbVector(np.ones(6) / 6))}), params)


def test_single_stratum_matches_pooled_fit(make_records, neonate, ranked_set):
    records = _neonate_cohort(make_records, 120, seed=2)
    rng = np.random.default_rng(4)
    lists = {r.id: [int(c) for c in rng.permutation(6)[:3]] for r in records}
    preds = ranked_set(lists, confidence=Confidence.HIGH)
    stratified = fit_calibrator(preds, records, neonate, stratify=True)
    pooled = fit_calibrator(preds, records, neonate, stratify=False)
    assert abs(stratified.objective - pooled.objective) <= 1e-8
    # empty strata fall back to the pooled weights
    assert np.allclose(stratified.alphas[Confidence.LOW], pooled.alphas[Confidence.LOW])


def test_params_file(tmp_path, make_records, neonate):
    records = _neonate_cohort(make_records, 200, seed=5)
    preds = simulate_ranked_predictions(records, neonate, top1_accuracy=0.6, seed=6)
    params = fit_calibrator(preds, records, neonate)
    path = str(tmp_path / 'cal' / 'calibration.json')
    save_params(path, params)
    loaded = load_params(path)
    for stratum in STRATA:
        assert np.array_equal(loaded.alphas[stratum], params.alphas[stratum])
    assert loaded.prevalence == params.prevalence
    with pytest.raises(ValidationError):
        load_params(str(tmp_path / 'nope.json'))


def test_calibration_removes_rank_one_bias(make_records, neonate):
    records = _neonate_cohort(make_records, 3000, seed=7)
    preds = simulate_ranked_predictions(records, neonate, top1_accuracy=0.4, seed=8, biased_cause=0, bias=0.9)
    params = fit_calibrator(preds, records, neonate)
    one_hot = CalibrationParams({s: np.array([1.0, 0, 0, 0, 0]) for s in STRATA}, params.prevalence, params.target)
    calibrated_csmf = csmf_accuracy(apply_calibration(preds, params), records)
    one_hot_csmf = csmf_accuracy(apply_calibration(preds, one_hot), records)
    assert calibrated_csmf >= one_hot_csmf + 0.02
