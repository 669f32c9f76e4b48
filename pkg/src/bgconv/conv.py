"""Standard, group and balanced group convolutions on multi-channel 1-D signals.

Every operator is stored as a dense tap array and evaluated exactly.  A signal
with ``n`` channels of length ``D`` is an ``(n, D)`` array; a standard
convolution mapping ``n`` channels to ``m`` channels with ``K`` taps per
single-channel kernel is an ``(m, n, K)`` array whose entry ``[i, j]`` is the
kernel carrying input channel ``j`` into output channel ``i``.

Channels are split into ``N`` contiguous, equally sized groups.  Taps are
centered: tap ``k`` of a ``K``-tap kernel acts at offset ``k - (K - 1) // 2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import ConfigurationError, DimensionError

__all__ = [
    "PaddingMode",
    "SignalShape",
    "MultiChannelSignal",
    "StandardConv",
    "GroupedConv",
    "BalancedConv",
    "YoungCheck",
    "unfold",
    "conv_single",
    "forward_standard",
    "forward_group",
    "forward_balanced",
    "intergroup_mean",
    "extract_block_diagonal",
    "balanced_from_standard",
    "param_l2_norm",
    "check_young",
    "YOUNG_SLACK",
]

# relative slack for the Young-type inequality check
YOUNG_SLACK = 1e-9


class PaddingMode(enum.Enum):
    ZERO = "zero"
    CIRCULAR = "circular"

    @classmethod
    def parse(cls, value: Union[str, "PaddingMode"]) -> "PaddingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown padding mode {value!r}; expected 'zero' or 'circular'"
            ) from None


@dataclass(frozen=True)
class SignalShape:
    channels: int
    length: int

    def __post_init__(self):
        if int(self.channels) < 1 or int(self.length) < 1:
            raise ConfigurationError(
                f"signal shape needs channels >= 1 and length >= 1, got "
                f"({self.channels}, {self.length})"
            )


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MultiChannelSignal:
    """An ``(n, D)`` array of finite samples."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim == 1:
            data = _frozen(data[None, :])
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(f"signal must be a non-empty (channels, length) array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("signal contains non-finite samples")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> SignalShape:
        return SignalShape(*self.data.shape)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]

    def norm(self) -> float:
        return float(np.linalg.norm(self.data.ravel()))


def _check_kernel_size(K: int) -> None:
    if K < 1 or K % 2 == 0:
        raise ConfigurationError(f"kernel size must be odd and >= 1, got {K}")


def _check_groups(N: int, *counts: int) -> None:
    if N < 1:
        raise ConfigurationError(f"number of groups must be >= 1, got {N}")
    for c in counts:
        if c % N:
            raise ConfigurationError(f"{N} groups do not divide {c} channels")


@dataclass(frozen=True, eq=False)
class StandardConv:
    """Dense convolution; ``weight[i, j]`` is the kernel from input ``j`` to output ``i``."""

    weight: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weight)
        if w.ndim != 3 or min(w.shape) < 1:
            raise DimensionError(f"standard convolution weight must be (m, n, K), got {w.shape}")
        _check_kernel_size(w.shape[2])
        object.__setattr__(self, "weight", w)

    out_channels = property(lambda self: self.weight.shape[0])
    in_channels = property(lambda self: self.weight.shape[1])
    kernel_size = property(lambda self: self.weight.shape[2])

    @property
    def num_params(self) -> int:
        return self.weight.size

    def block(self, k: int, l: int, N: int) -> np.ndarray:
        """Block ``W^{kl}`` of the ``N x N`` partition (0-based group indices)."""
        _check_groups(N, self.out_channels, self.in_channels)
        mg, ng = self.out_channels // N, self.in_channels // N
        return self.weight[k * mg:(k + 1) * mg, l * ng:(l + 1) * ng]


@dataclass(frozen=True, eq=False)
class GroupedConv:
    """Block-diagonal convolution; ``blocks[k]`` is the ``(m/N, n/N, K)`` block ``W^{kk}``."""

    blocks: np.ndarray

    def __post_init__(self):
        b = _frozen(self.blocks)
        if b.ndim != 4 or min(b.shape) < 1:
            raise DimensionError(f"grouped convolution blocks must be (N, m/N, n/N, K), got {b.shape}")
        _check_kernel_size(b.shape[3])
        object.__setattr__(self, "blocks", b)

    groups = property(lambda self: self.blocks.shape[0])
    out_channels = property(lambda self: self.blocks.shape[0] * self.blocks.shape[1])
    in_channels = property(lambda self: self.blocks.shape[0] * self.blocks.shape[2])
    kernel_size = property(lambda self: self.blocks.shape[3])

    @property
    def num_params(self) -> int:
        return self.blocks.size

    def to_standard(self) -> StandardConv:
        """The equivalent dense operator with zero off-diagonal blocks."""
        N, mg, ng, K = self.blocks.shape
        w = np.zeros((N * mg, N * ng, K))
        for k in range(N):
            w[k * mg:(k + 1) * mg, k * ng:(k + 1) * ng] = self.blocks[k]
        return StandardConv(w)


@dataclass(frozen=True, eq=False)
class BalancedConv:
    """Group convolution plus per-group kernels applied to the intergroup mean."""

    base: GroupedConv
    balance: np.ndarray

    def __post_init__(self):
        b = _frozen(self.balance)
        if b.shape != self.base.blocks.shape:
            raise DimensionError(
                f"balance blocks {b.shape} do not match group blocks {self.base.blocks.shape}"
            )
        object.__setattr__(self, "balance", b)

    groups = property(lambda self: self.base.groups)
    out_channels = property(lambda self: self.base.out_channels)
    in_channels = property(lambda self: self.base.in_channels)
    kernel_size = property(lambda self: self.base.kernel_size)

    @property
    def num_params(self) -> int:
        return self.base.num_params + self.balance.size

    def to_standard(self) -> StandardConv:
        """Dense equivalent: block ``(k, l)`` is ``W^{kk}[k == l] + W̄^k / N``."""
        N, mg, ng, K = self.balance.shape
        dense = np.zeros((N * mg, N * ng, K))
        for k in range(N):
            for l in range(N):
                dense[k * mg:(k + 1) * mg, l * ng:(l + 1) * ng] = self.balance[k] / N
            dense[k * mg:(k + 1) * mg, k * ng:(k + 1) * ng] += self.base.blocks[k]
        return StandardConv(dense)


def _as_array(x) -> np.ndarray:
    if isinstance(x, MultiChannelSignal):
        return x.data
    return np.asarray(x, dtype=np.float64)


def unfold(x, K: int, padding=PaddingMode.ZERO) -> np.ndarray:
    """Shifted copies of a signal: ``out[..., j, k, d] = x[..., j, d + k - (K-1)//2]``.

    Works on any array whose last axis is position.  Out-of-range samples are
    zero (``ZERO``) or wrap around (``CIRCULAR``).
    """
    _check_kernel_size(K)
    padding = PaddingMode.parse(padding)
    x = np.asarray(x, dtype=np.float64)
    D = x.shape[-1]
    half = (K - 1) // 2
    if padding is PaddingMode.CIRCULAR:
        idx = (np.arange(D)[None, :] + np.arange(-half, half + 1)[:, None]) % D
        return x[..., idx]
    padded = np.zeros(x.shape[:-1] + (D + 2 * half,))
    padded[..., half:half + D] = x
    return np.stack([padded[..., k:k + D] for k in range(K)], axis=-2)


def conv_single(taps, channel, padding=PaddingMode.ZERO) -> np.ndarray:
    """Single-channel convolution ``out[d] = sum_k taps[k] * channel[d + offset_k]``."""
    taps = np.asarray(taps, dtype=np.float64).ravel()
    channel = np.asarray(channel, dtype=np.float64).ravel()
    if channel.size < 1:
        raise DimensionError("channel must have at least one sample")
    return taps @ unfold(channel, taps.size, padding)


def _signal_in(x, expected: int) -> np.ndarray:
    data = _as_array(x)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2:
        raise DimensionError(f"signal must be (channels, length), got {data.shape}")
    if data.shape[0] != expected:
        raise DimensionError(f"operator expects {expected} input channels, signal has {data.shape[0]}")
    return data


def _apply(weight: np.ndarray, data: np.ndarray, padding) -> np.ndarray:
    cols = unfold(data, weight.shape[-1], padding)          # (n, K, D)
    return np.einsum("ijk,jkd->id", weight, cols)


def forward_standard(W: StandardConv, x, padding=PaddingMode.ZERO) -> MultiChannelSignal:
    data = _signal_in(x, W.in_channels)
    return MultiChannelSignal(_apply(W.weight, data, padding))


def forward_group(Wg: GroupedConv, x, padding=PaddingMode.ZERO) -> MultiChannelSignal:
    data = _signal_in(x, Wg.in_channels)
    N, _, ng, _ = Wg.blocks.shape
    out = [_apply(Wg.blocks[k], data[k * ng:(k + 1) * ng], padding) for k in range(N)]
    return MultiChannelSignal(np.concatenate(out, axis=0))


def intergroup_mean(x, N: int) -> MultiChannelSignal:
    """Channel-wise average of the ``N`` input groups, an ``(n/N, D)`` signal."""
    data = _as_array(x)
    if data.ndim == 1:
        data = data[None, :]
    _check_groups(N, data.shape[0])
    return MultiChannelSignal(data.reshape(N, data.shape[0] // N, data.shape[1]).mean(axis=0))


def forward_balanced(Wb: BalancedConv, x, padding=PaddingMode.ZERO) -> MultiChannelSignal:
    data = _signal_in(x, Wb.in_channels)
    N = Wb.groups
    grouped = forward_group(Wb.base, data, padding).data
    xbar = intergroup_mean(data, N).data
    extra = np.concatenate([_apply(Wb.balance[k], xbar, padding) for k in range(N)], axis=0)
    return MultiChannelSignal(grouped + extra)


def extract_block_diagonal(W: StandardConv, N: int) -> GroupedConv:
    _check_groups(N, W.out_channels, W.in_channels)
    return GroupedConv(np.stack([W.block(k, k, N) for k in range(N)]))


def balanced_from_standard(W: StandardConv, N: int) -> BalancedConv:
    """Keep the diagonal blocks and sum each block row's off-diagonal kernels.

    This is the construction under which the residual for group ``k`` is
    ``sum_{l != k} W^{kl} (x^l - xbar)``.
    """
    base = extract_block_diagonal(W, N)
    balance = np.zeros_like(base.blocks)
    for k in range(N):
        for l in range(N):
            if l != k:
                balance[k] += W.block(k, l, N)
    return BalancedConv(base, balance)


def param_l2_norm(op) -> float:
    if isinstance(op, StandardConv):
        taps = op.weight
    elif isinstance(op, GroupedConv):
        taps = op.blocks
    elif isinstance(op, BalancedConv):
        taps = np.concatenate([op.base.blocks.ravel(), op.balance.ravel()])
    else:
        raise TypeError(f"not a convolution operator: {type(op).__name__}")
    return float(np.linalg.norm(np.ravel(taps)))


class YoungCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def check_young(W: StandardConv, x, padding=PaddingMode.ZERO, slack: float = YOUNG_SLACK) -> YoungCheck:
    """Compare ``||Wx||`` with ``sqrt(K) * ||W||_param * ||x||``."""
    data = _signal_in(x, W.in_channels)
    lhs = float(np.linalg.norm(forward_standard(W, data, padding).data.ravel()))
    rhs = float(np.sqrt(W.kernel_size) * param_l2_norm(W) * np.linalg.norm(data.ravel()))
    return YoungCheck(lhs, rhs, lhs <= rhs * (1.0 + slack))
