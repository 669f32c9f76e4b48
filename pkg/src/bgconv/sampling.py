"""Random inputs and weight initializations with reproducible per-stream seeding.

Draws come from numpy's counter-based ``Philox`` bit generator.  Each
``(seed, stream)`` pair is mapped to its own key through ``SeedSequence`` with
``spawn_key=(domain, stream)``, so trial ``t`` can be regenerated on its own
and inputs and weights drawn under the same ``SeedSpec`` never collide.
The generator choice is fixed for this release: changing it changes every
published number.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .conv import MultiChannelSignal, SignalShape, StandardConv
from .errors import ConfigurationError

_INPUT_DOMAIN = 0
_WEIGHT_DOMAIN = 1


class InputDistribution(enum.Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown input distribution {value!r}; expected 'normal' or 'uniform'"
            ) from None


class WeightInit(enum.Enum):
    HE = "he"
    GLOROT = "glorot"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown weight init {value!r}; expected 'he' or 'glorot'"
            ) from None

    def variance(self, m: int, n: int, K: int) -> float:
        """Tap variance with ``fan_in = K n`` and ``fan_out = K m``."""
        if self is WeightInit.HE:
            return 2.0 / (K * n)
        return 2.0 / (K * n + K * m)


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if int(self.stream) < 0:
            raise ConfigurationError(f"stream id must be non-negative, got {self.stream}")


def generator(seed: SeedSpec, domain: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed.seed), spawn_key=(domain, int(seed.stream)))
    return np.random.Generator(np.random.Philox(seq))


def _draw(rng: np.random.Generator, dist: InputDistribution, size) -> np.ndarray:
    if dist is InputDistribution.NORMAL:
        return rng.standard_normal(size)
    return rng.uniform(-1.0, 1.0, size)


def sample_input(shape: SignalShape, dist=InputDistribution.NORMAL, seed=SeedSpec(0)) -> MultiChannelSignal:
    """One signal with i.i.d. N(0, 1) or U(-1, 1) entries."""
    dist = InputDistribution.parse(dist)
    rng = generator(seed, _INPUT_DOMAIN)
    return MultiChannelSignal(_draw(rng, dist, (shape.channels, shape.length)))


def sample_input_pool(shape: SignalShape, count: int, dist=InputDistribution.NORMAL, seed: int = 0) -> np.ndarray:
    """``count`` independent inputs stacked as a ``(count, n, D)`` array; input ``s`` uses stream ``s``."""
    if count < 1:
        raise ConfigurationError("input pool must contain at least one signal")
    return np.stack([sample_input(shape, dist, SeedSpec(seed, s)).data for s in range(count)])


def init_standard_conv(m: int, n: int, K: int, init=WeightInit.HE, seed=SeedSpec(0)) -> StandardConv:
    """Gaussian He or Glorot taps: variance ``2/(K n)`` or ``2/(K n + K m)``."""
    if min(m, n, K) < 1:
        raise ConfigurationError(f"m, n, K must be >= 1, got ({m}, {n}, {K})")
    init = WeightInit.parse(init)
    rng = generator(seed, _WEIGHT_DOMAIN)
    std = np.sqrt(init.variance(m, n, K))
    return StandardConv(std * rng.standard_normal((m, n, K)))


class TrialOperators:
    """Lazy, indexable sequence of ``count`` standard convolutions; trial ``t`` uses stream ``t``.

    Only the trial currently being evaluated is held in memory, which matters
    at 256 x 256 channels with hundreds of trials.
    """

    def __init__(self, m, n, K, count, init=WeightInit.HE, seed=0):
        if count < 1:
            raise ConfigurationError("at least one weight trial is required")
        self.m, self.n, self.K = m, n, K
        self.count = count
        self.init = WeightInit.parse(init)
        self.seed = seed

    def __len__(self):
        return self.count

    def __getitem__(self, t):
        if not 0 <= t < self.count:
            raise IndexError(t)
        return init_standard_conv(self.m, self.n, self.K, self.init, SeedSpec(self.seed, t))
