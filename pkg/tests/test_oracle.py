import numpy as np
import pytest

from gossipopt.errors import ConfigurationError, ContractViolationError
from gossipopt.objective import RegularizedLogisticObjective, local_gradient
from gossipopt.oracle import (
    AbsoluteGaussianMean,
    AdditiveGaussian,
    Exact,
    MiniBatch,
    NoBias,
    OracleSpec,
    RelativeScale,
    TopK,
    agent_streams,
    bias_bounds,
    check_spec,
    mean_shift,
    measure_oracle,
    sample,
)


@pytest.fixture
def obj():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((40, 6))
    y = rng.choice([-1.0, 1.0], size=40)
    return RegularizedLogisticObjective(A, y, alpha=0.01)


def test_identity_oracle_is_exact(obj):
    spec = OracleSpec()
    x = np.linspace(-1, 1, 6)
    g = sample(spec, obj, x, np.random.default_rng(1))
    assert np.array_equal(g, local_gradient(obj, x))


def test_identity_oracle_measures_zero(obj):
    spec = OracleSpec()
    var, bias_sq = measure_oracle(spec, obj, np.zeros(6), trials=5, rng=np.random.default_rng(1))
    assert var == pytest.approx(0.0, abs=1e-30)
    assert bias_sq == pytest.approx(0.0, abs=1e-30)


def test_relative_scale_bias(obj):
    delta = 0.03
    spec = OracleSpec(noise=Exact(), bias=RelativeScale(delta))
    x = np.full(6, 0.3)
    g = local_gradient(obj, x)
    tilde = sample(spec, obj, x, np.random.default_rng(2))
    assert np.allclose(tilde, (1.0 + delta) * g, atol=1e-15)
    diff = tilde - g
    assert float(diff @ diff) == pytest.approx(delta**2 * float(g @ g), rel=1e-12)


def test_absolute_shift_without_spread(obj):
    mu = mean_shift(0.25, 6)
    spec = OracleSpec(noise=Exact(), bias=AbsoluteGaussianMean(mu, sigma_e=0.0))
    x = np.zeros(6)
    tilde = sample(spec, obj, x, np.random.default_rng(3))
    assert np.allclose(tilde, local_gradient(obj, x) + mu, atol=1e-15)
    assert float(mu @ mu) == pytest.approx(0.25**2, rel=1e-14)


def test_topk_keeps_largest_and_bounds_error(obj):
    rng = np.random.default_rng(4)
    spec = OracleSpec(noise=Exact(), bias=TopK(k=2))
    for _ in range(20):
        x = rng.standard_normal(6)
        g = local_gradient(obj, x)
        tilde = sample(spec, obj, x, rng)
        assert np.count_nonzero(tilde) <= 2
        kept = np.abs(g)[tilde != 0]
        dropped = np.abs(g)[tilde == 0]
        if kept.size and dropped.size:
            assert kept.min() >= dropped.max() - 1e-15
        err = tilde - g
        assert float(err @ err) <= (1.0 - 2.0 / 6.0) * float(g @ g) + 1e-15


def test_minibatch_is_unbiased(obj):
    spec = OracleSpec(batch_size=8, noise=MiniBatch())
    x = np.full(6, 0.2)
    trials = 10_000
    rng = np.random.default_rng(5)
    draws = np.array([sample(spec, obj, x, rng) for _ in range(trials)])
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(trials)
    target = local_gradient(obj, x)
    assert np.all(np.abs(mean - target) <= 5.0 * se + 1e-12)


def test_minibatch_full_batch_is_exact(obj):
    spec = OracleSpec(batch_size=obj.n_samples, noise=MiniBatch())
    x = np.full(6, -0.4)
    tilde = sample(spec, obj, x, np.random.default_rng(6))
    assert np.allclose(tilde, local_gradient(obj, x), atol=1e-12)


def test_additive_gaussian_variance_level(obj):
    sigma = 0.3
    spec = OracleSpec(noise=AdditiveGaussian(sigma))
    var, bias_sq = measure_oracle(
        spec, obj, np.zeros(6), trials=10_000, rng=np.random.default_rng(7)
    )
    level = 6 * sigma**2
    assert 0.9 * level <= var <= 1.1 * level
    assert bias_sq <= 1e-3  # mean error shrinks like sigma^2 d / trials


def test_absolute_bias_level_measured(obj):
    mu = mean_shift(0.5, 6)
    spec = OracleSpec(noise=Exact(), bias=AbsoluteGaussianMean(mu, sigma_e=0.1))
    var, bias_sq = measure_oracle(
        spec, obj, np.zeros(6), trials=10_000, rng=np.random.default_rng(8)
    )
    assert 0.9 * 0.25 <= bias_sq <= 1.1 * 0.25
    level = 6 * 0.1**2
    assert 0.9 * level <= var <= 1.1 * level


def test_bias_bounds_per_model(obj):
    assert bias_bounds(OracleSpec(), 6) == (0.0, 0.0)
    assert bias_bounds(OracleSpec(bias=RelativeScale(0.1)), 6) == (pytest.approx(0.01), 0.0)
    m_f, s_f = bias_bounds(OracleSpec(bias=TopK(4)), 6)
    assert m_f == pytest.approx(1.0 - 4.0 / 6.0)
    assert s_f == 0.0
    m_f, s_f = bias_bounds(OracleSpec(bias=AbsoluteGaussianMean(mean_shift(0.2, 6), 0.5)), 6)
    assert m_f == 0.0
    assert s_f == pytest.approx(0.04)


def test_same_seed_same_stream(obj):
    spec = OracleSpec(batch_size=4, noise=MiniBatch(), bias=AbsoluteGaussianMean(mean_shift(0.1, 6), 0.2))
    x = np.full(6, 0.1)
    a = [sample(spec, obj, x, np.random.default_rng(9)) for _ in range(1)]
    rng1 = np.random.default_rng(99)
    rng2 = np.random.default_rng(99)
    seq1 = [sample(spec, obj, x, rng1) for _ in range(5)]
    seq2 = [sample(spec, obj, x, rng2) for _ in range(5)]
    assert all(np.array_equal(u, v) for u, v in zip(seq1, seq2))
    assert a is not None


def test_agent_streams_independent_and_reproducible():
    a = agent_streams(7, 3)
    b = agent_streams(7, 3)
    draws_a = [rng.standard_normal(4) for rng in a]
    draws_b = [rng.standard_normal(4) for rng in b]
    assert all(np.array_equal(u, v) for u, v in zip(draws_a, draws_b))
    assert not np.array_equal(draws_a[0], draws_a[1])


def test_check_spec_errors(obj):
    with pytest.raises(ConfigurationError):
        check_spec(OracleSpec(batch_size=0), obj)
    with pytest.raises(ConfigurationError):
        check_spec(OracleSpec(batch_size=100, noise=MiniBatch()), obj)
    with pytest.raises(ConfigurationError):
        check_spec(OracleSpec(noise=AdditiveGaussian(-1.0)), obj)
    with pytest.raises(ConfigurationError):
        check_spec(OracleSpec(bias=TopK(9)), obj)
    with pytest.raises(ConfigurationError):
        check_spec(OracleSpec(bias=AbsoluteGaussianMean(np.zeros(2), 0.1)), obj)
    with pytest.raises(ConfigurationError):
        check_spec(OracleSpec(bias=AbsoluteGaussianMean(np.zeros(6), -0.5)), obj)


def test_oversized_batch_fails_at_sample_time(obj):
    spec = OracleSpec(batch_size=100, noise=MiniBatch())
    with pytest.raises(ConfigurationError):
        sample(spec, obj, np.zeros(6), np.random.default_rng(0))


def test_large_relative_bias_warns(obj):
    with pytest.warns(UserWarning, match="relative bias"):
        check_spec(OracleSpec(bias=RelativeScale(0.5)), obj)
    with pytest.warns(UserWarning):
        check_spec(OracleSpec(bias=TopK(1)), obj)  # 1 - 1/6 >> 1/256


def test_small_relative_bias_does_not_warn(obj):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_spec(OracleSpec(bias=RelativeScale(0.01)), obj)
        check_spec(OracleSpec(noise=MiniBatch(), batch_size=40), obj)


def test_measure_oracle_needs_trials(obj):
    with pytest.raises(ContractViolationError):
        measure_oracle(OracleSpec(), obj, np.zeros(6), trials=1, rng=np.random.default_rng(0))


def test_mean_shift_norm():
    for c in (0.0, 0.1, 2.5):
        mu = mean_shift(c, 9)
        assert np.linalg.norm(mu) == pytest.approx(c, abs=1e-14)
    with pytest.raises(ContractViolationError):
        mean_shift(1.0, 0)
