"""Command line entry point: ``bgconv {scale,bound,cost,lemma-check}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .cost import LayerSpec, op_count
from .errors import ConfigurationError, NumericalFailure
from .harness import (
    ExperimentConfig,
    lemma_check,
    load_config,
    run_bound_experiment,
    run_scale_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BOUNDS = 4


def _groups(text):
    try:
        return [int(g) for g in text.split(",") if g.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _experiment_flags(p):
    p.add_argument("--config", help="flat key: value config file (or a previous results CSV)")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--D", type=int)
    p.add_argument("--S", type=int, help="weight trials; also the input count unless --S-inputs is given")
    p.add_argument("--S-inputs", dest="S_inputs", type=int)
    p.add_argument("--groups", type=_groups, help="e.g. 4,8,16,32,64")
    p.add_argument("--variant", dest="variants", help="gc, bgc or gc,bgc")
    p.add_argument("--dist", dest="distribution", choices=["normal", "uniform"])
    p.add_argument("--init", choices=["he", "glorot"])
    p.add_argument("--padding", choices=["zero", "circular"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--svg", help="also render an SVG plot to this path")
    p.add_argument("--workers", type=int, help="threads used across weight trials")
    p.add_argument("--timings", action="store_true", default=None,
                   help="fill the runtime_ms column (makes the CSV run-dependent)")
    p.add_argument("--assert-bounds", action="store_true",
                   help="exit with status 4 if any bound ratio exceeds K/n")


def build_parser():
    parser = argparse.ArgumentParser(prog="bgconv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _experiment_flags(sub.add_parser("scale", help="log E against log(1 - 1/N) with fitted slopes"))
    _experiment_flags(sub.add_parser("bound", help="Rel.E / (1 - 1/N)^p against N"))

    c = sub.add_parser("cost", help="parameter and operation counts of one layer")
    c.add_argument("--variant", default="bgc", choices=["standard", "gc", "bgc"])
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--K", type=int, required=True)
    c.add_argument("--D", type=int, required=True)
    c.add_argument("--N", type=int, default=1)

    lc = sub.add_parser("lemma-check", help="Young-type inequality sweep and Monte Carlo K/n check")
    lc.add_argument("--m", type=int, default=256)
    lc.add_argument("--n", type=int, default=256)
    lc.add_argument("--K", type=int, default=3)
    lc.add_argument("--D", type=int, default=32)
    lc.add_argument("--S", type=int, default=1000)
    lc.add_argument("--seed", type=int, default=0)
    lc.add_argument("--dist", default="normal", choices=["normal", "uniform"])
    lc.add_argument("--init", default="he", choices=["he", "glorot"])
    lc.add_argument("--padding", default="zero", choices=["zero", "circular"])
    lc.add_argument("--young-draws", type=int, default=10_000)
    lc.add_argument("--assert-bounds", action="store_true")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    base = ExperimentConfig()
    if args.config:
        base = ExperimentConfig.from_mapping(load_config(args.config), base)
    flags = {k: getattr(args, k) for k in
             ("m", "n", "K", "D", "S", "S_inputs", "groups", "variants", "distribution", "init",
              "padding", "seed", "out", "svg", "workers", "timings")}
    return ExperimentConfig.from_mapping(flags, base)


def _run_experiment(args) -> int:
    config = _resolve_config(args).validate()
    runner = run_scale_experiment if args.command == "scale" else run_bound_experiment
    result = runner(config)
    if not config.out:
        sys.stdout.write(result.to_csv())
    print(result.summary())
    for line in result.diagnostics():
        print(line, file=sys.stderr)
    if args.assert_bounds:
        exceeded = result.bounds_exceeded()
        for v, N, ratio in exceeded:
            print(f"bound exceeded: variant={v.label} N={N} ratio={ratio:.6g} > K/n={config.K / config.n:.6g}",
                  file=sys.stderr)
        if exceeded:
            return EXIT_BOUNDS
    return EXIT_OK


def _run_cost(args) -> int:
    spec = LayerSpec(args.m, args.n, args.K, args.D, args.N, args.variant)
    cost = op_count(spec)
    print(f"variant   {spec.variant.value}")
    print(f"m n K D N {spec.m} {spec.n} {spec.K} {spec.D} {spec.N}")
    print(f"params    {cost.param_count:,}")
    print(f"conv_ops  {cost.conv_ops:,}")
    print(f"mean_ops  {cost.mean_ops:,}")
    print(f"total_ops {cost.total_ops:,}")
    return EXIT_OK


def _run_lemma_check(args) -> int:
    sweep, mc = lemma_check(args.m, args.n, args.K, args.D, args.S, args.seed, args.dist, args.init,
                            args.padding, args.young_draws)
    print(f"young: draws={sweep.draws} violations={len(sweep.violations)} "
          f"max lhs/rhs={sweep.worst_ratio:.6f}")
    print(f"lemma2: lhs={mc.lhs:.6g} rhs={mc.rhs:.6g} margin={mc.margin:.6g} stderr={mc.stderr:.6g}")
    failed = bool(sweep.violations) or mc.lhs > mc.rhs + 4 * mc.stderr
    if failed:
        print("lemma check failed", file=sys.stderr)
    return EXIT_BOUNDS if failed and args.assert_bounds else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("scale", "bound"):
            return _run_experiment(args)
        if args.command == "cost":
            return _run_cost(args)
        return _run_lemma_check(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
