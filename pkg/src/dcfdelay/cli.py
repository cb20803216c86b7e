"""Command-line entry point: ``dcfdelay <subcommand> [options]``.

Exit codes: 0 success, 1 a ``--strict`` comparison failed, 2 usage error,
3 unstable load, 4 a solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import delay as dm
from .experiments import ExperimentSpec, run_experiment, write_csv
from .macmodel import ConvergenceError, saturation_capacity
from .params import bundled_profile, load_profile
from .sim import QueueOverflowError, SimConfig, TraceWriter, occupancy_bound_check, run_simulation

log = logging.getLogger("dcfdelay")

EXIT_STRICT, EXIT_UNSTABLE, EXIT_CONVERGENCE = 1, 3, 4


def parse_grid(text: str, cast=float) -> tuple:
    """``"1,2,5"`` or ``"start:stop[:step]"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        start, stop, step = parts
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be > 0")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(cast(round(start + i * step, 12)) for i in range(count))
    return tuple(cast(p) for p in text.split(",") if p.strip())


def parse_rates(text: str) -> tuple[float, ...]:
    rates = tuple(float(p) for p in text.split(",") if p.strip())
    if not rates:
        raise argparse.ArgumentTypeError("empty rate vector")
    return rates


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="MAC/PHY profile file (default: bundled dot11b-1mbps)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--reps", type=int, default=30, help="replications per point")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--out", default="-", help="CSV output path ('-' for stdout)")
    p.add_argument("--measure-time", type=float, default=2000.0, help="measured virtual seconds per run")
    p.add_argument("--warmup", type=float, default=None, help="warmup seconds (default: max(10%%, 50k slots))")
    p.add_argument("--n-ref", type=int, default=10, help="n at which capacity C is read off S(n)")
    p.add_argument("--threshold", type=float, default=0.15, help="relative-error pass threshold")
    p.add_argument("--jobs", type=int, default=1, help="parallel simulation threads")
    p.add_argument(
        "--backoff-on-arrival",
        action="store_true",
        help="packets reaching an idle node always draw a backoff (no immediate access)",
    )
    p.add_argument("--strict", action="store_true", help="exit 1 if any row fails the threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcfdelay", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("throughput", help="analytic S(n) and simulated saturation throughput")
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=50)
    _common(p)

    p = sub.add_parser("delay-sweep", help="mean delay versus lambda at fixed n")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--lambda-grid", type=parse_grid, default=parse_grid("1:14"))
    _common(p)

    p = sub.add_parser("n-sweep", help="mean delay versus n at fixed lambda")
    p.add_argument("--lambda", dest="lam", type=float, default=5.0)
    p.add_argument("--n-grid", type=lambda s: parse_grid(s, int), default=parse_grid("2:14", int))
    _common(p)

    p = sub.add_parser("table-check", help="reproduce the published 10%%-error table")
    _common(p)

    p = sub.add_parser("nonhom", help="per-node delays under unequal arrival rates")
    p.add_argument("--rates", type=parse_rates, action="append", required=True, help="comma-separated rates; repeatable")
    _common(p)

    p = sub.add_parser("analyze", help="analytic delay report only")
    p.add_argument("--rates", type=parse_rates, help="comma-separated per-node rates")
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--config")
    p.add_argument("--n-ref", type=int, default=10)

    p = sub.add_parser("simulate", help="one simulation run, optionally dumping a slot trace")
    p.add_argument("--rates", type=parse_rates)
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--saturated", action="store_true")
    p.add_argument("--trace", help="write the slot-event trace here")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--measure-time", type=float, default=100.0)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--n-ref", type=int, default=10)
    p.add_argument("--backoff-on-arrival", action="store_true")
    return parser


def _params(args):
    if args.config:
        return load_profile(args.config), args.config
    return bundled_profile(), "dot11b-1mbps (bundled)"


def _rates(args) -> tuple[float, ...]:
    if args.rates:
        return args.rates
    if args.n is None or args.lam is None:
        raise SystemExit("give either --rates or both --n and --lambda")
    return (args.lam,) * args.n


def _spec(args, mode: str, **kw) -> ExperimentSpec:
    params, name = _params(args)
    return ExperimentSpec(
        mode=mode,
        replications=args.reps,
        confidence=args.confidence,
        params=params,
        measure_time=args.measure_time,
        warmup_time=args.warmup,
        seed=args.seed,
        immediate_access=not args.backoff_on_arrival,
        n_ref=args.n_ref,
        error_threshold=args.threshold,
        jobs=args.jobs,
        profile_name=name,
        **kw,
    )


def _cmd_analyze(args) -> int:
    params, _ = _params(args)
    c = saturation_capacity(params, args.n_ref)
    report = dm.analyze(_rates(args), c)
    print(f"capacity_c      {report.capacity_c:.9g} pkts/s")
    print(f"utilization     {report.utilization:.9g}")
    print(f"m_avg_bound     {report.m_avg_bound:.9g} pkts/s")
    for i, (p0, d) in enumerate(zip(report.p_empty, report.per_node_delay_bound)):
        print(f"node {i:<3d} p_empty {p0:.9g}  delay_bound {d:.9g} s")
    return 0


def _cmd_simulate(args) -> int:
    params, _ = _params(args)
    rates = (0.0,) * args.n if args.saturated and args.n else _rates(args)
    cfg = SimConfig(
        rates,
        mac_phy=params,
        measure_time=args.measure_time,
        warmup_time=args.warmup,
        seed=args.seed,
        saturated=args.saturated,
        immediate_access=not args.backoff_on_arrival,
    )
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("# time_us, event, winner, n_nonempty\n")
            m = run_simulation(cfg, trace=TraceWriter(fh))
    else:
        m = run_simulation(cfg)
    c = saturation_capacity(params, args.n_ref)
    print(f"backend          {m.backend}")
    print(f"delivered        {m.delivered}")
    print(f"sim_throughput   {m.sim_throughput:.9g} pkts/s")
    print(f"mean_delay       {m.mean_delay:.9g} s")
    print(f"busy_fraction    {m.busy_fraction:.9g}")
    print("occupancy        " + " ".join(f"{x:.6f}" for x in m.occupancy))
    if m.busy_fraction > 0:
        chk = occupancy_bound_check(m, c)
        print(f"jensen           lhs={chk.lhs:.9g} rhs={chk.rhs:.9g} holds={chk.holds}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "throughput":
            spec = _spec(args, "throughput_vs_n", grid=tuple(range(args.n_min, args.n_max + 1)))
        elif args.command == "delay-sweep":
            spec = _spec(args, "delay_vs_lambda", grid=args.lambda_grid, n=args.n)
        elif args.command == "n-sweep":
            spec = _spec(args, "delay_vs_n", grid=args.n_grid, lam=args.lam)
        elif args.command == "table-check":
            spec = _spec(args, "table_check")
        else:
            for rates in args.rates:
                c = saturation_capacity(_params(args)[0], args.n_ref)
                report = dm.stability_check(rates, c)
                if not report.stable:
                    raise dm.UnstableLoadError(f"rates {rates} give utilization {report.utilization:.4f} >= 1")
            spec = _spec(args, "nonhomogeneous", grid=tuple(args.rates))
        log.info("running %s with %d replications per point", spec.mode, spec.replications)
        rows, text = run_experiment(spec)
        write_csv(args.out, text)
    except (dm.UnstableLoadError, QueueOverflowError) as exc:
        print(f"dcfdelay: unstable load: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ConvergenceError as exc:
        print(f"dcfdelay: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    if args.strict and spec.mode != "throughput_vs_n":
        if any(r.passed is False for r in rows):
            return EXIT_STRICT
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
