import numpy as np
import pytest

from bgconv.conv import SignalShape
from bgconv.errors import ConfigurationError
from bgconv.sampling import (
    InputDistribution,
    SeedSpec,
    TrialOperators,
    WeightInit,
    init_standard_conv,
    sample_input,
    sample_input_pool,
)


def test_normal_moments():
    x = sample_input(SignalShape(100, 1000), "normal", SeedSpec(7)).data.ravel()
    assert x.size == 10**5
    assert -0.02 <= x.mean() <= 0.02
    assert 0.97 <= x.var() <= 1.03


def test_uniform_range_and_variance():
    x = sample_input(SignalShape(100, 1000), InputDistribution.UNIFORM, SeedSpec(7)).data.ravel()
    assert np.all((x > -1) & (x < 1))
    assert abs(x.var() - 1 / 3) <= 0.01


@pytest.mark.parametrize("dist", list(InputDistribution))
def test_inputs_deterministic(dist):
    a = sample_input(SignalShape(3, 17), dist, SeedSpec(99, 4)).data
    b = sample_input(SignalShape(3, 17), dist, SeedSpec(99, 4)).data
    assert np.array_equal(a, b)


def test_he_variance_and_mean():
    # 256 x 256 x 3 = 196608 taps
    W = init_standard_conv(256, 256, 3, "he", SeedSpec(1)).weight.ravel()
    target = 2 / (3 * 256)
    assert abs(W.var() / target - 1) <= 0.05
    assert abs(W.mean()) <= 4 * np.sqrt(target / W.size)


def test_glorot_variance():
    W = init_standard_conv(128, 512, 3, WeightInit.GLOROT, SeedSpec(1)).weight.ravel()
    target = 2 / (3 * 512 + 3 * 128)
    assert abs(W.var() / target - 1) <= 0.05


def test_weights_deterministic():
    a = init_standard_conv(8, 4, 5, "glorot", SeedSpec(3, 11)).weight
    b = init_standard_conv(8, 4, 5, "glorot", SeedSpec(3, 11)).weight
    assert np.array_equal(a, b)


def test_streams_uncorrelated():
    shape = SignalShape(1, 10**5)
    a = sample_input(shape, "normal", SeedSpec(5, 0)).data.ravel()
    b = sample_input(shape, "normal", SeedSpec(5, 1)).data.ravel()
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_inputs_and_weights_use_separate_streams():
    x = sample_input(SignalShape(1, 10**5), "normal", SeedSpec(5, 0)).data.ravel()
    w = init_standard_conv(1, 1, 1, "he", SeedSpec(5, 0)).weight.ravel()
    assert not np.isclose(x[0] * np.sqrt(2), w[0])
    W = init_standard_conv(1000, 100, 1, "he", SeedSpec(5, 0)).weight.ravel() / np.sqrt(2 / 100)
    assert abs(np.corrcoef(x, W)[0, 1]) < 0.02


def test_pool_and_trials_are_per_stream():
    shape = SignalShape(4, 6)
    pool = sample_input_pool(shape, 5, "uniform", seed=8)
    assert np.array_equal(pool[3], sample_input(shape, "uniform", SeedSpec(8, 3)).data)
    trials = TrialOperators(2, 4, 3, 6, "he", seed=8)
    assert len(trials) == 6
    assert np.array_equal(trials[4].weight, init_standard_conv(2, 4, 3, "he", SeedSpec(8, 4)).weight)
    with pytest.raises(IndexError):
        trials[6]


def test_seed_validation():
    with pytest.raises(ConfigurationError):
        SeedSpec(-1)
    with pytest.raises(ConfigurationError):
        SeedSpec(2**64)
    SeedSpec(2**64 - 1)
    with pytest.raises(ConfigurationError):
        init_standard_conv(0, 2, 3)
