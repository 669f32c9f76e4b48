"""Least-squares approximability of group and balanced group convolutions.

For a pool of inputs ``x^(1..S)`` and weight trials ``W^(1..T)`` the measure is

    E = (1/T) sum_t  min_{W_m} (1/S) sum_s ||W^(t) x^(s) - W_m x^(s)||^2

where ``W_m`` ranges over group convolutions (GC) or balanced group
convolutions (BGC) with ``N`` groups.  The output of ``W_m`` is linear in its
taps, so for every group ``k`` the minimization is an ordinary least-squares
problem whose regressor matrix depends only on the input pool.  That matrix
and the Cholesky factor of its Gram matrix are built once per ``(N, variant,
k)`` and reused for every trial and every output channel of the group; only
the right-hand sides change.
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import linalg as sla

from .conv import MultiChannelSignal, PaddingMode, SignalShape, StandardConv, forward_standard, unfold
from .errors import ConfigurationError, InsufficientPointsError, NumericalFailure, UnderdeterminedError
from .sampling import InputDistribution, SeedSpec, WeightInit, init_standard_conv, sample_input

# Cholesky pivots below this fraction of the mean Gram diagonal trigger the SVD path.
PIVOT_TOL = 1e-12
# Points with E below this multiple of the norm factors are left out of slope fits.
EPS_LOG = 1e-14


class Variant(enum.Enum):
    GC = "gc"
    BGC = "bgc"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown variant {value!r}; expected 'gc' or 'bgc'") from None

    @property
    def label(self) -> str:
        return self.name

    @property
    def bound_power(self) -> int:
        """Exponent of ``(1 - 1/N)`` in the sharpened bound (zero-mean i.i.d. weights)."""
        return 1 if self is Variant.GC else 2

    @property
    def loose_power(self) -> int:
        """Exponent of ``(1 - 1/N)`` in the bound that needs identically distributed weights only."""
        return 2 if self is Variant.GC else 3

    def unknowns_per_channel(self, n: int, N: int, K: int) -> int:
        base = K * (n // N)
        return base if self is Variant.GC else 2 * base


def theorem_bound(variant, N: int, K: int, n: int, sharpened: bool = True) -> float:
    """Coefficient multiplying ``mean||W||^2 * mean||x||^2`` in the approximability bound."""
    variant = Variant.parse(variant)
    q = 1.0 - 1.0 / N
    if sharpened:
        return K / n * q ** variant.bound_power
    return K * q ** variant.loose_power


class InputPool:
    """A fixed pool of ``S`` inputs together with their unfolded regressor columns.

    ``columns`` has one row per (input, position) pair and ``n * K`` columns
    ordered channel-major, so the taps of channel ``j`` occupy columns
    ``j*K .. j*K + K - 1`` and every channel group is a contiguous column range.
    """

    def __init__(self, inputs, K: int, padding=PaddingMode.ZERO):
        data = _stack_inputs(inputs)
        self.data = data
        self.data.setflags(write=False)
        self.K = int(K)
        self.padding = PaddingMode.parse(padding)
        self.size, self.channels, self.length = data.shape
        self.columns = _regressors(data, self.K, self.padding)
        self.columns.setflags(write=False)
        self.mean_norm_sq = math.fsum(np.einsum("snd,snd->s", data, data)) / self.size

    @property
    def rows(self) -> int:
        return self.size * self.length

    def outputs(self, W: StandardConv) -> np.ndarray:
        """Stacked ``W x^(s)`` as a ``(S*D, m)`` array, rows ordered by (input, position)."""
        if W.in_channels != self.channels or W.kernel_size != self.K:
            raise ConfigurationError(
                f"operator (n={W.in_channels}, K={W.kernel_size}) does not match pool "
                f"(n={self.channels}, K={self.K})"
            )
        return self.columns @ W.weight.reshape(W.out_channels, -1).T


def _stack_inputs(inputs) -> np.ndarray:
    if isinstance(inputs, InputPool):
        return inputs.data
    if isinstance(inputs, np.ndarray):
        data = np.array(inputs, dtype=np.float64)
        if data.ndim == 2:
            data = data[None]
    else:
        items = list(inputs)
        if not items:
            raise ConfigurationError("input pool is empty")
        data = np.stack([x.data if isinstance(x, MultiChannelSignal) else np.asarray(x, float) for x in items])
    if data.ndim != 3 or data.shape[0] < 1:
        raise ConfigurationError(f"inputs must stack to (S, n, D), got {data.shape}")
    return data


def _regressors(data: np.ndarray, K: int, padding) -> np.ndarray:
    S, c, D = data.shape
    cols = unfold(data, K, padding)                       # (S, c, K, D)
    return np.ascontiguousarray(cols.transpose(0, 3, 1, 2).reshape(S * D, c * K))


def _as_pool(inputs, K, padding) -> InputPool:
    if isinstance(inputs, InputPool):
        if inputs.K != K or inputs.padding is not PaddingMode.parse(padding):
            return InputPool(inputs.data, K, padding)
        return inputs
    return InputPool(inputs, K, padding)


@dataclass(frozen=True, eq=False)
class DesignSystem:
    """Regressors for one output group; shared by all its output channels and all trials."""

    group: int
    groups: int
    variant: Variant
    padding: PaddingMode
    matrix: np.ndarray
    gram: np.ndarray
    cholesky: Optional[tuple] = None
    # minimum-norm path, used when the Gram matrix is numerically singular
    svd: Optional[tuple] = None
    rank: int = 0

    @property
    def unknowns(self) -> int:
        return self.matrix.shape[1]

    @property
    def rank_deficient(self) -> bool:
        return self.cholesky is None

    def solve(self, targets: np.ndarray):
        """Least-squares fit of every column of ``targets``; returns ``(coef, residual_sq)``."""
        targets = np.asarray(targets, dtype=np.float64)
        if self.cholesky is not None:
            coef = sla.cho_solve(self.cholesky, self.matrix.T @ targets, check_finite=False)
        else:
            U, s, Vt = self.svd
            coef = Vt.T @ ((U.T @ targets) / s[:, None])
        resid = targets - self.matrix @ coef
        return coef, np.einsum("ij,ij->j", resid, resid)


def build_design(inputs, N: int, variant, k: int, padding=PaddingMode.ZERO, K: int = 3) -> DesignSystem:
    """Regressor matrix for group ``k``: the ``K`` shifts of each group-``k`` input channel
    (and, for BGC, of each intergroup-mean channel), stacked over all inputs and positions."""
    variant = Variant.parse(variant)
    pool = _as_pool(inputs, K, padding)
    n = pool.channels
    if N < 1 or n % N:
        raise ConfigurationError(f"{N} groups do not divide {n} input channels")
    if not 0 <= k < N:
        raise ConfigurationError(f"group index {k} outside 0..{N - 1}")
    width = n // N * K
    unknowns = variant.unknowns_per_channel(n, N, K)
    if pool.rows < unknowns:
        raise UnderdeterminedError(
            f"{pool.size} inputs x {pool.length} positions = {pool.rows} rows < {unknowns} unknowns "
            f"per output channel ({variant.label}, N={N}); increase the number of inputs or the signal length"
        )
    A = pool.columns[:, k * width:(k + 1) * width]
    if variant is Variant.BGC:
        mean = pool.data.reshape(pool.size, N, n // N, pool.length).mean(axis=1)
        A = np.hstack([A, _regressors(mean, K, pool.padding)])
    A = np.ascontiguousarray(A)
    A.setflags(write=False)
    gram = A.T @ A
    scale = np.trace(gram) / gram.shape[0]
    chol = None
    try:
        L, lower = sla.cho_factor(gram, lower=True, check_finite=False)
        if np.min(np.diag(L)) ** 2 >= PIVOT_TOL * scale:
            chol = (L, lower)
    except np.linalg.LinAlgError:
        pass
    if chol is not None:
        return DesignSystem(k, N, variant, pool.padding, A, gram, cholesky=chol, rank=A.shape[1])
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD of the {variant.label} design for N={N}, group {k} failed") from exc
    if not np.all(np.isfinite(s)):
        raise NumericalFailure(f"non-finite singular values in the {variant.label} design for N={N}")
    r = int(np.sum(s > s[0] * max(A.shape) * np.finfo(float).eps))
    return DesignSystem(k, N, variant, pool.padding, A, gram, svd=(U[:, :r], s[:r], Vt[:r]), rank=r)


@dataclass
class TrialResult:
    trial: int
    group_residuals: list
    total: float
    flagged: bool = False

    def __post_init__(self):
        if self.total < 0:
            raise ValueError("trial error must be non-negative")


def solve_trial(designs, W_t: StandardConv, inputs, trial: int = 0, outputs=None) -> TrialResult:
    """Minimized mean squared residual of trial ``W_t`` over the groups in ``designs``.

    ``designs`` is one ``DesignSystem`` or a sequence of them (normally one
    per group).  ``outputs`` may carry precomputed ``InputPool.outputs(W_t)``.
    """
    if isinstance(designs, DesignSystem):
        designs = [designs]
    N = designs[0].groups
    pool = _as_pool(inputs, W_t.kernel_size, designs[0].padding)
    if W_t.out_channels % N:
        raise ConfigurationError(f"{N} groups do not divide {W_t.out_channels} output channels")
    if outputs is None:
        outputs = pool.outputs(W_t)
    mg = W_t.out_channels // N
    residuals = []
    for design in designs:
        k = design.group
        _, res = design.solve(outputs[:, k * mg:(k + 1) * mg])
        residuals.append(math.fsum(res))
    total = math.fsum(residuals) / pool.size
    return TrialResult(trial, residuals, total, flagged=any(d.rank_deficient for d in designs))


@dataclass
class CellEstimate:
    """Approximability for one (variant, N) cell."""

    variant: Variant
    N: int
    E: float
    rel_E: float
    weight_norm_sq: float
    input_norm_sq: float
    trials: list = field(default_factory=list, repr=False)
    runtime_ms: float = 0.0
    rank_deficient: bool = False
    rank: int = 0
    unknowns: int = 0

    @property
    def norm_factor(self) -> float:
        return self.weight_norm_sq * self.input_norm_sq

    @property
    def flagged_trials(self) -> list:
        return [r.trial for r in self.trials if r.flagged]


def evaluate_cells(trials: Sequence[StandardConv], inputs, cells, padding=PaddingMode.ZERO,
                   workers: int = 1) -> dict:
    """Estimate every ``(variant, N)`` cell, computing each trial's targets once.

    Trials run on ``workers`` threads.  Each trial is evaluated by the same
    code path whatever the worker count, and results are reduced in trial
    order with exactly rounded sums, so the estimates are bit-reproducible.
    """
    T = len(trials)
    if T < 1:
        raise ConfigurationError("no weight trials given")
    cells = [(Variant.parse(v), int(N)) for v, N in cells]
    first = trials[0]
    pool = _as_pool(inputs, first.kernel_size, padding)
    m, n = first.out_channels, first.in_channels
    for v, N in cells:
        if m % N or n % N:
            raise ConfigurationError(f"{N} groups do not divide m={m} and n={n}")

    designs, build_ms = {}, {}
    for cell in cells:
        v, N = cell
        t0 = time.perf_counter()
        designs[cell] = [build_design(pool, N, v, k, pool.padding, pool.K) for k in range(N)]
        build_ms[cell] = 1e3 * (time.perf_counter() - t0)

    def run(t):
        W = trials[t]
        if (W.out_channels, W.in_channels, W.kernel_size) != (m, n, pool.K):
            raise ConfigurationError(f"trial {t} has shape {W.weight.shape}, expected {(m, n, pool.K)}")
        outputs = pool.outputs(W)
        per_cell, ms = {}, {}
        for cell in cells:
            t0 = time.perf_counter()
            per_cell[cell] = solve_trial(designs[cell], W, pool, trial=t, outputs=outputs)
            ms[cell] = 1e3 * (time.perf_counter() - t0)
        return per_cell, float(np.sum(W.weight * W.weight)), ms

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, range(T)))
    else:
        results = [run(t) for t in range(T)]

    wnorm = math.fsum(r[1] for r in results) / T
    out = {}
    for cell in cells:
        v, N = cell
        per_trial = [r[0][cell] for r in results]
        E = math.fsum(tr.total for tr in per_trial) / T
        denom = wnorm * pool.mean_norm_sq
        ds = designs[cell]
        out[cell] = CellEstimate(
            variant=v, N=N, E=E, rel_E=E / denom if denom > 0 else 0.0,
            weight_norm_sq=wnorm, input_norm_sq=pool.mean_norm_sq, trials=per_trial,
            runtime_ms=build_ms[cell] + sum(r[2][cell] for r in results),
            rank_deficient=any(d.rank_deficient for d in ds),
            rank=min(d.rank for d in ds), unknowns=ds[0].unknowns,
        )
    return out


def estimate_E(trials: Sequence[StandardConv], inputs, N: int, variant, padding=PaddingMode.ZERO,
               workers: int = 1) -> CellEstimate:
    if len(trials) < 1:
        raise ConfigurationError("no weight trials given")
    if not isinstance(inputs, InputPool) and len(inputs) < 1:
        raise ConfigurationError("input pool is empty")
    variant = Variant.parse(variant)
    return evaluate_cells(trials, inputs, [(variant, N)], padding, workers)[(variant, N)]


class SlopeFit(NamedTuple):
    C: float
    gamma: float
    intercept: float
    used: list
    excluded: list


def fit_slope(points, norm_factor: float = 1.0, eps_log: float = EPS_LOG) -> SlopeFit:
    """OLS fit of ``log E = log(C * norm_factor) + gamma * log(1 - 1/N)``.

    ``N = 1`` and points with ``E < eps_log * norm_factor`` (exact
    representability) are excluded and listed in ``excluded``.
    """
    used, excluded = [], []
    seen = set()
    for N, E in points:
        N, E = int(N), float(E)
        if N in seen:
            raise ValueError(f"duplicate group count N={N} in slope fit")
        seen.add(N)
        if N < 2 or not E >= eps_log * norm_factor:
            excluded.append((N, E))
        else:
            used.append((N, E))
    if len(used) < 2:
        raise InsufficientPointsError(
            f"need at least 2 points with N >= 2 and E >= {eps_log:g} x norm factor; "
            f"excluded {excluded}", excluded)
    x = np.log1p(-1.0 / np.array([p[0] for p in used], dtype=float))
    y = np.log([p[1] for p in used])
    gamma, intercept = np.polyfit(x, y, 1)
    return SlopeFit(float(np.exp(intercept) / norm_factor), float(gamma), float(intercept), used, excluded)


def bound_ratio(rel_E: float, N: int, p: int) -> float:
    """``rel_E / (1 - 1/N)**p``; undefined for a single group."""
    if N < 2:
        raise ValueError(f"bound ratio needs N >= 2, got N={N}")
    if p not in (1, 2):
        raise ValueError(f"bound exponent must be 1 or 2, got {p}")
    return rel_E / (1.0 - 1.0 / N) ** p


@dataclass
class NRecord:
    N: int
    E: float
    rel_E: float
    bound_ratio: Optional[float]
    runtime_ms: float = 0.0


@dataclass
class ApproximabilityReport:
    variant: Variant
    records: list
    slope: Optional[SlopeFit]
    metadata: dict
    diagnostics: list = field(default_factory=list)

    def record(self, N: int) -> NRecord:
        for r in self.records:
            if r.N == N:
                return r
        raise KeyError(N)


def build_report(variant, estimates, metadata=None) -> ApproximabilityReport:
    """Collect per-N cell estimates of one variant into a report with a slope fit."""
    variant = Variant.parse(variant)
    cells = sorted(estimates, key=lambda c: c.N)
    if not cells:
        raise ConfigurationError("report needs at least one cell")
    records, diagnostics = [], []
    for c in cells:
        ratio = bound_ratio(c.rel_E, c.N, variant.bound_power) if c.N >= 2 else None
        records.append(NRecord(c.N, c.E, c.rel_E, ratio, c.runtime_ms))
        if c.rank_deficient:
            diagnostics.append(
                f"variant={variant.label} N={c.N}: rank-deficient design (rank {c.rank} of "
                f"{c.unknowns} columns); {len(c.flagged_trials)} trials solved by minimum norm")
    norm = cells[0].norm_factor
    try:
        slope = fit_slope([(c.N, c.E) for c in cells], norm_factor=norm)
        if slope.excluded:
            diagnostics.append(
                f"variant={variant.label}: excluded from slope fit {[N for N, _ in slope.excluded]}")
    except InsufficientPointsError as exc:
        slope = None
        diagnostics.append(f"warning: variant={variant.label} no slope: {exc}")
    return ApproximabilityReport(variant, records, slope, dict(metadata or {}), diagnostics)


class Lemma2Check(NamedTuple):
    lhs: float
    rhs: float
    margin: float
    stderr: float


def check_lemma2_montecarlo(m: int, n: int, K: int, D: int, S: int, seed: int = 0,
                            dist=InputDistribution.NORMAL, init=WeightInit.HE,
                            padding=PaddingMode.ZERO) -> Lemma2Check:
    """Monte Carlo check of ``E||Wx||^2 <= (K/n) E||W||^2 E||x||^2`` over ``S`` fresh (W, x) draws."""
    if S < 2:
        raise ConfigurationError("need at least two draws for a standard error")
    shape = SignalShape(n, D)
    out_sq, w_sq, x_sq = np.empty(S), np.empty(S), np.empty(S)
    for s in range(S):
        spec = SeedSpec(seed, s)
        W = init_standard_conv(m, n, K, init, spec)
        x = sample_input(shape, dist, spec).data
        y = forward_standard(W, x, padding).data
        out_sq[s] = np.sum(y * y)
        w_sq[s] = np.sum(W.weight * W.weight)
        x_sq[s] = np.sum(x * x)
    lhs = math.fsum(out_sq) / S
    rhs = K / n * (math.fsum(w_sq) / S) * (math.fsum(x_sq) / S)
    stderr = float(np.std(out_sq, ddof=1) / math.sqrt(S))
    return Lemma2Check(lhs, rhs, rhs - lhs, stderr)
