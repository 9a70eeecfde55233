import math

import numpy as np
import pytest

from probcal.errors import ContractError
from probcal.metrics import (
    Prediction,
    PredictionSet,
    compute_bins,
    decompose_brier,
    full_report,
    score_accuracy,
    score_balance,
    score_brier,
    score_ece,
    score_mce,
)
from probcal.synthetic import ProbDistribution, SyntheticModel, generate_batch

import oracles

HAND = [(0.15, 0), (0.25, 1), (0.85, 1), (0.95, 1)]


def ps(pairs):
    return PredictionSet.from_items(pairs)


# --- construction -----------------------------------------------------------

@pytest.mark.parametrize("p", [-0.01, 1.0000001, float("nan"), float("inf")])
def test_prediction_rejects_out_of_range(p):
    with pytest.raises(ContractError):
        Prediction(p, 1)
    with pytest.raises(ContractError):
        PredictionSet([p], [1])


@pytest.mark.parametrize("y", [2, -1, 0.5, "1"])
def test_prediction_rejects_bad_outcome(y):
    with pytest.raises(ContractError):
        Prediction(0.5, y)


def test_prediction_set_is_immutable():
    s = ps([(0.2, 0)])
    with pytest.raises(ValueError):
        s.p_hat[0] = 0.9
    assert s.items == [Prediction(0.2, 0)]
    assert s.n == len(s) == 1


@pytest.mark.parametrize(
    "fn", [score_accuracy, score_brier, score_balance, decompose_brier, lambda s: score_ece(s, 10)]
)
def test_empty_set_is_an_error(fn):
    with pytest.raises(ContractError, match="empty prediction set"):
        fn(PredictionSet([], []))


# --- accuracy ----------------------------------------------------------------

def test_accuracy_examples():
    assert score_accuracy(ps([(0.7, 1)])) == 1.0
    assert score_accuracy(ps([(0.7, 0)])) == 0.0
    # 0.5 counts as a class-1 call
    assert score_accuracy(ps([(0.5, 1)])) == 1.0
    assert score_accuracy(ps([(0.5, 0)])) == 0.0


# --- brier -------------------------------------------------------------------

def test_brier_examples():
    assert score_brier(ps([(0.0, 0), (1.0, 1), (1.0, 1)])) == 0.0
    assert score_brier(ps([(0.7, 1), (0.3, 0)])) == pytest.approx(0.09, abs=1e-15)


def test_decompose_brier_hand_example():
    d = decompose_brier(ps([(0.7, 1), (0.3, 0)]))
    assert d.total == pytest.approx(0.09, abs=1e-15)
    assert d.calibration_term == pytest.approx(-0.12, abs=1e-15)
    assert d.sharpness_term == pytest.approx(0.21, abs=1e-15)


def test_decompose_brier_certainty():
    d = decompose_brier(ps([(1.0, 1)]))
    assert (d.total, d.calibration_term, d.sharpness_term) == (0.0, 0.0, 0.0)


def test_calibration_term_vanishes_for_optimal_model():
    batch = generate_batch(ProbDistribution.uniform(), SyntheticModel.optimal(), 100_000, 11)
    assert abs(decompose_brier(batch.predictions).calibration_term) < 0.005


# --- balance -----------------------------------------------------------------

@pytest.mark.parametrize(
    "pair, expected",
    [
        ((0.5, 1), 0.5),
        ((0.5, 0), -0.5),
        ((0.7, 1), 0.3),
        ((0.7, 0), -0.7),
        ((0.3, 0), 0.3),
        ((0.3, 1), -0.7),
    ],
)
def test_balance_branches(pair, expected):
    assert score_balance(ps([pair])) == pytest.approx(expected, abs=1e-15)


# --- bins / ECE / MCE --------------------------------------------------------

def test_bins_hand_example():
    bins = compute_bins(ps(HAND), 10)
    occupied = [b for b in bins if not b.empty]
    assert [b.bin_index for b in occupied] == [2, 3, 9, 10]
    assert [b.gap for b in occupied] == pytest.approx([0.15, 0.75, 0.15, 0.05], abs=1e-15)
    assert sum(b.count for b in bins) == 4
    empty = [b for b in bins if b.empty]
    assert all(b.mean_outcome is None and b.mean_p_hat is None and b.gap is None for b in empty)


def test_bins_partition_unit_interval():
    bins = compute_bins(ps(HAND), 7)
    assert bins[0].lower == 0.0 and bins[-1].upper == 1.0
    for a, b in zip(bins, bins[1:]):
        assert a.upper == b.lower
    widths = [b.upper - b.lower for b in bins]
    assert widths == pytest.approx([1 / 7] * 7)


def test_one_lands_in_last_bin():
    bins = compute_bins(ps([(1.0, 1)]), 10)
    assert bins[9].count == 1 and sum(b.count for b in bins) == 1


def test_left_edges_are_closed():
    bins = compute_bins(ps([(0.0, 0), (0.5, 1)]), 2)
    assert [b.count for b in bins] == [1, 1]


def test_bins_match_exact_rational_assignment():
    rng = np.random.default_rng(3)
    grid = np.concatenate([np.arange(101) / 100, np.arange(0, 1, 1 / 7), rng.random(200)])
    grid = np.clip(grid, 0, 1)
    for m in (1, 3, 7, 10, 13, 100):
        s = PredictionSet(grid, np.zeros(grid.size, dtype=int))
        counts = [b.count for b in compute_bins(s, m)]
        expected = [0] * m
        for p in grid:
            expected[oracles.exact_bin(float(p), m) - 1] += 1
        assert counts == expected, m


def test_single_bin_is_global_gap():
    pairs = [(0.1, 1), (0.9, 0), (0.4, 1)]
    gap = abs(2 / 3 - (0.1 + 0.9 + 0.4) / 3)
    assert score_ece(ps(pairs), 1) == pytest.approx(gap, abs=1e-15)
    assert score_mce(ps(pairs), 1) == pytest.approx(gap, abs=1e-15)


def test_ece_examples():
    assert score_ece(ps(HAND), 10) == pytest.approx(0.275, abs=1e-15)
    assert score_ece(ps([(1.0, 1), (0.0, 0)]), 10) == 0.0


def test_mce_examples():
    assert score_mce(ps(HAND), 10) == pytest.approx(0.75, abs=1e-15)
    assert score_mce(ps([(1.0, 1), (0.0, 0)]), 10) == 0.0


@pytest.mark.parametrize("m", [0, -3, 2.5, True])
def test_bad_bin_count(m):
    with pytest.raises(ContractError):
        score_ece(ps(HAND), m)


def test_ece_matches_oracle_on_random_sets():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(1, 300))
        p = rng.random(n)
        y = (rng.random(n) < p).astype(int)
        pairs = list(zip(p.tolist(), y.tolist()))
        for m in (1, 5, 10, 37):
            ece, mce = oracles.ece_mce(pairs, m)
            s = PredictionSet(p, y)
            assert score_ece(s, m) == pytest.approx(ece, rel=1e-12, abs=1e-15)
            assert score_mce(s, m) == pytest.approx(mce, rel=1e-12, abs=1e-15)


# --- full report -------------------------------------------------------------

def test_full_report_hand_example():
    r = full_report(ps([(0.7, 1), (0.3, 0)]), 10)
    assert r.accuracy == 1.0
    assert r.brier == pytest.approx(0.09, abs=1e-15)
    assert r.ece == pytest.approx(0.3, abs=1e-15)
    assert r.balance == pytest.approx(0.3, abs=1e-15)
    assert r.n == 2 and r.ece_bins == 10


def test_full_report_certainty():
    r = full_report(ps([(1.0, 1)]), 10)
    assert (r.accuracy, r.brier, r.ece, r.balance) == (1.0, 0.0, 0.0, 0.0)


def test_full_report_matches_individual_ops_exactly():
    s = generate_batch(ProbDistribution(2, 2), SyntheticModel.optimal(), 50_000, 2).predictions
    r = full_report(s, 10)
    assert r.accuracy == score_accuracy(s)
    assert r.brier == score_brier(s)
    assert r.brier_decomposition == decompose_brier(s)
    assert r.ece == score_ece(s, 10)
    assert r.mce == score_mce(s, 10)
    assert r.balance == score_balance(s)


def test_means_match_oracle_loops():
    rng = np.random.default_rng(8)
    p = rng.random(500)
    y = (rng.random(500) < 0.5).astype(int)
    pairs = list(zip(p.tolist(), y.tolist()))
    s = PredictionSet(p, y)
    assert score_balance(s) == pytest.approx(oracles.mean_rule(pairs, "balance"), rel=1e-13, abs=1e-15)
    assert score_brier(s) == pytest.approx(oracles.mean_rule(pairs, "brier"), rel=1e-13)
    assert score_accuracy(s) == oracles.mean_rule(pairs, "accuracy")


def test_large_mean_is_stable():
    # pairwise summation of 1e6 terms keeps >= 10 significant digits
    p = np.full(1_000_000, 0.1)
    s = PredictionSet(p, np.zeros(p.size, dtype=int))
    assert math.isclose(score_brier(s), 0.01, rel_tol=1e-10)
    assert math.isclose(score_balance(s), 0.1, rel_tol=1e-10)
