import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from probcal.errors import ContractError
from probcal.metrics import full_report, score_balance
from probcal.synthetic import (
    CHUNK_SIZE,
    ProbDistribution,
    SyntheticModel,
    apply_model,
    chunk_rng,
    generate_batch,
    sample_probs,
)


def test_uniform_mean():
    x = sample_probs(ProbDistribution.uniform(), 100_000, 1)
    assert abs(x.mean() - 0.5) <= 0.005


def test_beta22_variance():
    # Var Beta(a, a) = 1 / (4 (2a + 1)) = 0.05 at a = 2
    x = sample_probs(ProbDistribution(2, 2), 100_000, 1)
    assert abs(x.var() - 0.05) <= 0.002


def test_beta_half_is_u_shaped():
    x = sample_probs(ProbDistribution(0.5, 0.5), 100_000, 1)
    counts, _ = np.histogram(x, bins=10, range=(0, 1))
    assert counts[0] == counts.max() or counts[-1] == counts.max()
    assert min(counts[0], counts[-1]) > counts[1:-1].max()


def test_samples_in_unit_interval():
    for d in (ProbDistribution(0.3, 0.3), ProbDistribution(5, 1)):
        x = sample_probs(d, 10_000, 4)
        assert x.min() >= 0 and x.max() <= 1


@pytest.mark.parametrize("a,b", [(0, 1), (-1, 2), (float("nan"), 1), (1, float("inf"))])
def test_bad_distribution(a, b):
    with pytest.raises(ContractError):
        ProbDistribution(a, b)


def test_bad_n():
    with pytest.raises(ContractError):
        sample_probs(ProbDistribution(), 0, 1)


@pytest.mark.parametrize(
    "text, expected",
    [("uniform", (1, 1)), ("Beta(0.5, 0.5)", (0.5, 0.5)), ("beta(2,2)", (2, 2)), ("3,1", (3, 1))],
)
def test_parse_distribution(text, expected):
    d = ProbDistribution.parse(text)
    assert (d.alpha, d.beta) == expected


def test_apply_model_worked_examples():
    m = SyntheticModel(0.1)
    assert apply_model(m, 0.6) == pytest.approx(0.64, abs=1e-15)
    assert apply_model(m, 0.2) == pytest.approx(0.18, abs=1e-15)


@given(st.floats(0, 1))
def test_optimal_is_identity(p):
    assert apply_model(SyntheticModel.optimal(), p) == p


def test_underconfident_shrinks_to_half():
    m = SyntheticModel(-0.2)
    assert apply_model(m, 1.0) == pytest.approx(0.9)
    assert apply_model(m, 0.0) == pytest.approx(0.1)
    assert apply_model(m, 0.5) == 0.5


@pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
def test_apply_model_range(p):
    with pytest.raises(ContractError):
        apply_model(SyntheticModel(0.1), p)


@pytest.mark.parametrize("t", [-1.5, 1.01, float("nan")])
def test_bad_tendency(t):
    with pytest.raises(ContractError):
        SyntheticModel(t)


@given(st.floats(-1, 1))
def test_model_map_properties(t):
    m = SyntheticModel(t)
    lo = np.linspace(0, 0.5, 200, endpoint=False)
    hi = np.linspace(0.5, 1, 200)
    for seg in (lo, hi):
        out = m(seg)
        assert np.all(np.diff(out) >= 0)
        assert out.min() >= 0 and out.max() <= 1
    if t > 0:
        assert np.all(m(hi) >= hi - 1e-15)
        assert np.all(m(lo) <= lo + 1e-15)


def test_generate_batch_optimal_report():
    b = generate_batch(ProbDistribution.uniform(), SyntheticModel.optimal(), 100_000, 0)
    r = full_report(b.predictions, 10)
    assert abs(r.accuracy - 0.75) <= 0.005
    assert abs(r.brier - 1 / 6) <= 0.003
    np.testing.assert_array_equal(b.true_p, b.predictions.p_hat)


def test_generate_batch_biased_balance():
    b = generate_batch(ProbDistribution.uniform(), SyntheticModel(0.1), 10_000, 0)
    assert abs(score_balance(b.predictions) + 0.025) <= 0.005 + 4 * 0.0045


def test_model_change_keeps_truth_and_outcomes():
    a = generate_batch(ProbDistribution(2, 2), SyntheticModel(0.0), 5_000, (3, 1))
    b = generate_batch(ProbDistribution(2, 2), SyntheticModel(0.3), 5_000, (3, 1))
    np.testing.assert_array_equal(a.true_p, b.true_p)
    np.testing.assert_array_equal(a.predictions.outcome, b.predictions.outcome)
    assert not np.array_equal(a.predictions.p_hat, b.predictions.p_hat)


def test_outcome_frequency_matches_truth_per_decile():
    b = generate_batch(ProbDistribution(0.5, 0.5), SyntheticModel.optimal(), 100_000, 9)
    edges = np.quantile(b.true_p, np.linspace(0, 1, 11))
    idx = np.clip(np.searchsorted(edges, b.true_p, side="right") - 1, 0, 9)
    y = b.predictions.outcome
    for k in range(10):
        sel = idx == k
        p = b.true_p[sel]
        sigma = np.sqrt(np.sum(p * (1 - p))) / sel.sum()
        assert abs(y[sel].mean() - p.mean()) <= 3 * sigma + 1e-12


def test_seed_reproducibility():
    a = generate_batch(ProbDistribution(), SyntheticModel(0.1), 1000, (7, 2))
    b = generate_batch(ProbDistribution(), SyntheticModel(0.1), 1000, (7, 2))
    c = generate_batch(ProbDistribution(), SyntheticModel(0.1), 1000, (7, 3))
    assert a.predictions == b.predictions and np.array_equal(a.true_p, b.true_p)
    assert not np.array_equal(a.true_p, c.true_p)


def test_partition_parallel_is_bitwise_identical():
    n = 3 * CHUNK_SIZE + 123
    serial = generate_batch(ProbDistribution(0.5, 0.5), SyntheticModel(0.1), n, 5)
    parallel = generate_batch(ProbDistribution(0.5, 0.5), SyntheticModel(0.1), n, 5, workers=4)
    assert serial.predictions == parallel.predictions
    assert np.array_equal(serial.true_p, parallel.true_p)
    # each chunk is regenerable on its own
    chunk2 = ProbDistribution(0.5, 0.5).sample(chunk_rng(5, 0, 2), CHUNK_SIZE)
    np.testing.assert_array_equal(serial.true_p[2 * CHUNK_SIZE : 3 * CHUNK_SIZE], chunk2)


def test_prefix_stability():
    small = generate_batch(ProbDistribution(), SyntheticModel(), 1000, 1)
    large = generate_batch(ProbDistribution(), SyntheticModel(), CHUNK_SIZE + 10, 1)
    np.testing.assert_array_equal(small.true_p, large.true_p[:1000])
    np.testing.assert_array_equal(small.predictions.outcome, large.predictions.outcome[:1000])


@pytest.mark.parametrize("seed", [-1, (1, -2), 1.5, ()])
def test_bad_seed(seed):
    with pytest.raises(ContractError):
        sample_probs(ProbDistribution(), 10, seed)
