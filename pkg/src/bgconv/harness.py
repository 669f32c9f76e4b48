"""Experiment driver: group-count sweeps, CSV/SVG output and lemma checks."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np
import yaml

from .conv import PaddingMode, SignalShape, check_young
from .errors import ConfigurationError
from .estimator import (
    InputPool,
    Variant,
    build_report,
    check_lemma2_montecarlo,
    evaluate_cells,
)
from .sampling import (
    InputDistribution,
    SeedSpec,
    TrialOperators,
    WeightInit,
    init_standard_conv,
    sample_input,
    sample_input_pool,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("variant", "N", "E", "rel_E", "bound_ratio", "gamma", "runtime_ms")
DEFAULT_GROUPS = (4, 8, 16, 32, 64)


@dataclass
class ExperimentConfig:
    m: int = 256
    n: int = 256
    K: int = 3
    D: int = 32
    S_trials: int = 100
    S_inputs: int = 100
    groups: tuple = DEFAULT_GROUPS
    variants: tuple = (Variant.GC, Variant.BGC)
    distribution: InputDistribution = InputDistribution.NORMAL
    init: WeightInit = WeightInit.HE
    padding: PaddingMode = PaddingMode.ZERO
    seed: int = 0
    # run-time options; never part of the echoed config since they cannot change results
    out: Optional[str] = field(default=None, compare=False)
    svg: Optional[str] = field(default=None, compare=False)
    workers: int = field(default=1, compare=False)
    timings: bool = field(default=False, compare=False)

    ECHO_KEYS = ("m", "n", "K", "D", "S_trials", "S_inputs", "groups", "variants",
                 "distribution", "init", "padding", "seed")

    def __post_init__(self):
        self.groups = tuple(int(g) for g in _as_list(self.groups))
        self.variants = tuple(Variant.parse(v) for v in _as_list(self.variants))
        self.distribution = InputDistribution.parse(self.distribution)
        self.init = WeightInit.parse(self.init)
        self.padding = PaddingMode.parse(self.padding)

    def validate(self) -> "ExperimentConfig":
        for name in ("m", "n", "K", "D", "S_trials", "S_inputs", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.K % 2 == 0:
            raise ConfigurationError(f"K must be odd, got {self.K}")
        if not self.groups:
            raise ConfigurationError("no group counts given")
        if len(set(self.groups)) != len(self.groups):
            raise ConfigurationError(f"duplicate group counts in {list(self.groups)}")
        if not self.variants:
            raise ConfigurationError("no variants given")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        for N in self.groups:
            if N < 1 or self.m % N or self.n % N:
                raise ConfigurationError(f"N={N} must divide both m={self.m} and n={self.n}")
        rows = self.S_inputs * self.D
        worst = max(v.unknowns_per_channel(self.n, N, self.K) for v in self.variants for N in self.groups)
        if rows < worst:
            raise ConfigurationError(
                f"S_inputs*D = {rows} rows is below the {worst} unknowns of the largest design; "
                f"increase S_inputs or D")
        return self

    def echo(self) -> list:
        """``key: value`` lines that reproduce this configuration when loaded back."""
        lines = []
        for key in self.ECHO_KEYS:
            value = getattr(self, key)
            if key == "groups":
                value = ",".join(str(g) for g in value)
            elif key == "variants":
                value = ",".join(v.value for v in value)
            elif hasattr(value, "value"):
                value = value.value
            lines.append(f"{key}: {value}")
        return lines

    @classmethod
    def from_mapping(cls, mapping: dict, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        aliases = {"S": "S_trials", "S-inputs": "S_inputs", "variant": "variants", "dist": "distribution"}
        known = {f.name for f in fields(cls)}
        updates = {}
        for key, value in mapping.items():
            key = aliases.get(key, key)
            if key not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            if value is not None:
                updates[key] = value
        if "S_trials" in updates and "S_inputs" not in updates and "S" in mapping:
            updates["S_inputs"] = updates["S_trials"]
        return replace(base or cls(), **updates)


def _as_list(value):
    if isinstance(value, str):
        return [v for v in value.replace(" ", "").split(",") if v]
    if isinstance(value, (int, np.integer)) or hasattr(value, "value"):
        return [value]
    return list(value)


def load_config(path) -> dict:
    """Read a flat ``key: value`` config file, or the echoed header of a results CSV."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith("#"):
        header = []
        for line in text.splitlines():
            if not line.startswith("#"):
                break
            header.append(line[1:].strip())
        keys = set(ExperimentConfig.ECHO_KEYS)
        text = "\n".join(l for l in header if l.split(":", 1)[0].strip() in keys)
    try:
        mapping = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse config file {path}: {exc}") from None
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"config file {path} must hold a flat key: value mapping")
    return mapping


@dataclass
class SweepResult:
    config: ExperimentConfig
    reports: dict
    experiment: str = "scale"

    def summary(self) -> str:
        parts = []
        for v, rep in self.reports.items():
            g = "nan" if rep.slope is None else f"{rep.slope.gamma:.4f}"
            parts.append(f"variant={v.label} gamma={g}")
        return " ".join(parts)

    def diagnostics(self) -> list:
        return [d for rep in self.reports.values() for d in rep.diagnostics]

    def max_bound_ratio(self, variant) -> float:
        ratios = [r.bound_ratio for r in self.reports[Variant.parse(variant)].records if r.bound_ratio is not None]
        return max(ratios) if ratios else float("nan")

    def bounds_exceeded(self) -> list:
        """(variant, N, ratio) for every bound ratio above ``K/n``."""
        ceiling = self.config.K / self.config.n
        return [(v, r.N, r.bound_ratio) for v, rep in self.reports.items()
                for r in rep.records if r.bound_ratio is not None and r.bound_ratio > ceiling]

    def to_csv(self) -> str:
        cfg = self.config
        buf = io.StringIO()
        buf.write(f"# bgconv {self.experiment} experiment\n")
        for line in cfg.echo():
            buf.write(f"# {line}\n")
        if self.experiment == "bound":
            buf.write(f"# reference_K_over_n: {_fmt(cfg.K / cfg.n)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for v, rep in self.reports.items():
            gamma = None if rep.slope is None else rep.slope.gamma
            for r in rep.records:
                writer.writerow([v.label, r.N, _fmt(r.E), _fmt(r.rel_E), _fmt(r.bound_ratio), _fmt(gamma),
                                 _fmt(r.runtime_ms) if cfg.timings else ""])
        for line in self.diagnostics():
            buf.write(f"# diagnostic: {line}\n")
        return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def run_sweep(config: ExperimentConfig, experiment: str = "scale") -> SweepResult:
    config.validate()
    shape = SignalShape(config.n, config.D)
    pool = InputPool(sample_input_pool(shape, config.S_inputs, config.distribution, config.seed),
                     config.K, config.padding)
    trials = TrialOperators(config.m, config.n, config.K, config.S_trials, config.init, config.seed)
    cells = [(v, N) for v in config.variants for N in sorted(config.groups)]
    log.info("evaluating %d cells over %d trials", len(cells), config.S_trials)
    estimates = evaluate_cells(trials, pool, cells, config.padding, config.workers)
    meta = {k: v for k, v in asdict(config).items() if k in config.ECHO_KEYS}
    reports = {v: build_report(v, [estimates[(v, N)] for N in sorted(config.groups)], meta)
               for v in config.variants}
    return SweepResult(config, reports, experiment)


def _write(text: str, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from None


def run_scale_experiment(config: ExperimentConfig) -> SweepResult:
    result = run_sweep(config, "scale")
    if config.out:
        emit_plot_data(result, config.out, "csv")
    if config.svg:
        emit_plot_data(result, config.svg, "svg")
    return result


def run_bound_experiment(config: ExperimentConfig) -> SweepResult:
    if 1 in config.groups:
        raise ConfigurationError("bound experiment needs N >= 2; remove 1 from the group list")
    result = run_sweep(config, "bound")
    if config.out:
        emit_plot_data(result, config.out, "csv")
    if config.svg:
        emit_plot_data(result, config.svg, "svg")
    return result


def emit_plot_data(result: SweepResult, path, format: str = "csv") -> None:
    if not result.reports:
        raise ConfigurationError("nothing to write: empty report")
    if format == "csv":
        _write(result.to_csv(), path)
    elif format == "svg":
        _write(render_svg(result), path)
    else:
        raise ConfigurationError(f"unknown output format {format!r}")


def parse_results_csv(text: str):
    """Inverse of ``SweepResult.to_csv``: returns ``(config_mapping, rows)``."""
    header = [l[1:].strip() for l in text.splitlines() if l.startswith("#")]
    keys = set(ExperimentConfig.ECHO_KEYS) | {"reference_K_over_n"}
    config = yaml.safe_load("\n".join(l for l in header if l.split(":", 1)[0] in keys)) or {}
    body = [l for l in text.splitlines() if l and not l.startswith("#")]
    rows = []
    for rec in csv.DictReader(body):
        row = {"variant": rec["variant"], "N": int(rec["N"])}
        for key in CSV_COLUMNS[2:]:
            row[key] = float(rec[key]) if rec[key] != "" else None
        rows.append(row)
    return config, rows


def render_svg(result: SweepResult) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg = result.config
    with matplotlib.rc_context({"svg.fonttype": "none", "svg.hashsalt": "bgconv"}):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        for v, rep in result.reports.items():
            pts = [(r.N, r.E) for r in rep.records if r.N >= 2 and r.E > 0]
            if pts:
                x = np.log1p(-1.0 / np.array([p[0] for p in pts], float))
                y = np.log([p[1] for p in pts])
                label = v.label if rep.slope is None else f"{v.label} (slope {rep.slope.gamma:.2f})"
                line = ax1.plot(x, y, "o", label=label, gid=f"scale-{v.label}")[0]
                if rep.slope is not None:
                    xs = np.linspace(x.min(), x.max(), 2)
                    ax1.plot(xs, rep.slope.intercept + rep.slope.gamma * xs, "-", color=line.get_color())
            ratios = [(r.N, r.bound_ratio) for r in rep.records if r.bound_ratio is not None]
            if ratios:
                ax2.plot([r[0] for r in ratios], [r[1] for r in ratios], "o-",
                         label=f"{v.label} (p={v.bound_power})", gid=f"bound-{v.label}")
        ax2.axhline(cfg.K / cfg.n, color="gray", linestyle="--", label="K/n")
        ax1.set_xlabel("log(1 - 1/N)")
        ax1.set_ylabel("log E")
        ax2.set_xscale("log", base=2)
        ax2.set_xlabel("N")
        ax2.set_ylabel("Rel.E / (1 - 1/N)^p")
        ax1.legend()
        ax2.legend()
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()


# -- lemma checks -------------------------------------------------------------

YOUNG_SHAPES = ((1, 1), (4, 4), (256, 256))
YOUNG_KERNELS = (1, 3, 5)


@dataclass
class YoungSweep:
    draws: int
    violations: list
    worst_ratio: float


def young_sweep(draws: int = 10_000, shapes=YOUNG_SHAPES, kernel_sizes=YOUNG_KERNELS, D: int = 16,
                seed: int = 0, padding=PaddingMode.ZERO) -> YoungSweep:
    """Check the Young-type inequality on ``draws`` He-initialized operators and normal inputs,
    spread round-robin over every (shape, K) combination."""
    combos = [(m, n, K) for m, n in shapes for K in kernel_sizes]
    violations, worst = [], 0.0
    for i in range(draws):
        m, n, K = combos[i % len(combos)]
        spec = SeedSpec(seed, i)
        W = init_standard_conv(m, n, K, WeightInit.HE, spec)
        x = sample_input(SignalShape(n, D), InputDistribution.NORMAL, spec)
        res = check_young(W, x, padding)
        if res.rhs > 0:
            worst = max(worst, res.lhs / res.rhs)
        if not res.holds:
            violations.append((i, m, n, K, res.lhs, res.rhs))
    return YoungSweep(draws, violations, worst)


def lemma_check(m=256, n=256, K=3, D=32, S=1000, seed=0, dist="normal", init="he",
                padding="zero", young_draws=10_000):
    sweep = young_sweep(young_draws, D=min(D, 16), seed=seed, padding=padding)
    mc = check_lemma2_montecarlo(m, n, K, D, S, seed, dist, init, padding)
    return sweep, mc
