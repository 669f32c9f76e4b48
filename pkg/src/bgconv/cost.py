"""Analytical parameter and arithmetic-operation counts for one convolutional layer.

One operation unit is one tap applied at one output sample, so a standard
layer costs ``K D m n``.  A 2-D layer maps onto this model with ``K`` equal
to the number of kernel taps (9 for 3x3) and ``D`` the number of spatial
positions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigurationError


class LayerVariant(enum.Enum):
    STANDARD = "standard"
    GC = "gc"
    BGC = "bgc"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown layer variant {value!r}; expected standard, gc or bgc"
            ) from None


@dataclass(frozen=True)
class LayerSpec:
    m: int
    n: int
    K: int
    D: int
    N: int = 1
    variant: LayerVariant = LayerVariant.STANDARD

    def __post_init__(self):
        object.__setattr__(self, "variant", LayerVariant.parse(self.variant))
        for name in ("m", "n", "K", "D", "N"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.variant is LayerVariant.STANDARD:
            if self.N != 1:
                object.__setattr__(self, "N", 1)
        elif self.m % self.N or self.n % self.N:
            raise ConfigurationError(
                f"N={self.N} must divide both m={self.m} and n={self.n}"
            )


@dataclass(frozen=True)
class CostBreakdown:
    conv_ops: int
    mean_ops: int
    total_ops: int
    param_count: int


def param_count(spec: LayerSpec) -> int:
    if spec.variant is LayerVariant.STANDARD:
        return spec.K * spec.m * spec.n
    per_group = spec.K * (spec.m // spec.N) * (spec.n // spec.N) * spec.N
    return per_group if spec.variant is LayerVariant.GC else 2 * per_group


def op_count(spec: LayerSpec) -> CostBreakdown:
    """Standard ``KDmn``; GC ``KDmn/N``; BGC ``2KDmn/N`` plus ``Dn`` for the intergroup mean."""
    conv = spec.D * param_count(spec)
    mean = spec.D * spec.n if spec.variant is LayerVariant.BGC else 0
    return CostBreakdown(conv, mean, conv + mean, param_count(spec))
