"""Command-line entry point: ``sta <subcommand> ...`` or ``python -m sta``.

Exit codes: 0 success or convergence, 2 best-response cycle, 3 round limit,
64 usage error, 65 invalid input data, 74 file I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path as FsPath

from . import busline, io, metrics, optima
from .engine import VARIANT_ALIASES, DynamicsConfig, Variant, run_dynamics
from .fixtures import fig2_instance, fig3_instance, grid_instance
from .game import SelfishShare, ValidationError, validate_path

EX_USAGE = 64
EX_DATAERR = 65
EX_IOERR = 74


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _variant(name: str) -> Variant:
    try:
        return Variant.parse(name)
    except ValueError:
        choices = ", ".join(list(VARIANT_ALIASES) + [v.value for v in Variant])
        raise argparse.ArgumentTypeError(f"unknown variant {name!r} (choose from {choices})") from None


def _unit_interval(text: str) -> float:
    x = float(text)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return x


def _non_negative(text: str) -> float:
    x = float(text)
    if x < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return x


def _positive_int(text: str) -> int:
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return x


def _outdir(path: str) -> FsPath:
    out = FsPath(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_assign(args) -> int:
    network = io.load_network(args.graph)
    demand = io.load_demand(args.demand, network)
    if args.costs:
        model = io.load_step_tables(args.costs, network.m)
    else:
        model = SelfishShare(args.r, network.d)
    config = DynamicsConfig(variant=args.variant, max_rounds=args.max_rounds, backend=args.backend,
                            check_invariants=not args.no_checks)
    start = time.perf_counter()
    result = run_dynamics(network, demand, model, config)
    elapsed = time.perf_counter() - start
    out = _outdir(args.out)
    io.save_loads(result.loads, out / "loads.csv")
    io.save_paths(result.profile, out / "paths.csv")
    io.save_trace(result.trace, out / "trace.csv")
    o = result.outcome
    io.save_table(out / "outcome.csv", ["status", "rounds", "period", "seconds"],
                  [[o.status, o.rounds, o.period if o.period is not None else "", f"{elapsed:.3f}"]])
    print(f"{o.status} after {o.rounds} rounds" + (f" (period {o.period})" if o.period else "")
          + f" in {elapsed:.2f} s")
    return o.exit_code


def _check_paths(profile, network) -> None:
    """Each path must be simple and contiguous; its endpoints define the O-D pair."""
    for i, p in enumerate(profile):
        try:
            if not p or any(not 0 <= e < network.m for e in p):
                raise ValidationError("empty path or unknown edge id")
            validate_path(p, network, network.tail[p[0]], network.head[p[-1]])
        except ValidationError as exc:
            raise ValidationError(f"agent {i}: {exc}") from None


def _cmd_metrics(args) -> int:
    network = io.load_network(args.graph)
    profile = io.load_paths(args.paths)
    _check_paths(profile, network)
    baseline = io.load_paths(args.baseline_paths) if args.baseline_paths else None
    fm = metrics.flow_metrics(profile, network, baseline)
    out = _outdir(args.out)
    rows = [["average_stretch", fm.average_stretch], ["average_sharing", fm.average_sharing]]
    if fm.normalized_average_sharing is not None:
        rows.append(["normalized_average_sharing", fm.normalized_average_sharing])
    io.save_table(out / "metrics.csv", ["metric", "value"], rows)
    for threshold in args.curve or ():
        curve = metrics.sharing_fraction_curve(profile, network, threshold)
        io.save_table(out / f"curve_{threshold}.csv", ["x", "fraction"], curve)
    for name, value in rows:
        print(f"{name}: {value:.6f}")
    return 0


def _cmd_buslines(args) -> int:
    network = io.load_network(args.graph)
    paths = io.load_paths(args.paths)
    _check_paths(paths, network)
    lines = busline.build_lines(paths, network, args.capacity)
    plan = busline.select_lines(lines, args.budget_h, args.freq_per_min, args.window_min)
    total = busline.tvot(plan, paths, network)
    baseline = sum(network.travel_time(p) for p in paths) / busline.MS_PER_HOUR
    out = _outdir(args.out)
    io.save_table(out / "lines.csv", ["line_id", "edges", "tau_ms", "riders"],
                  ([i, " ".join(map(str, L.edges)), L.tau, len(L.assignments)] for i, L in enumerate(lines)))
    chosen = set(plan.selected)
    io.save_table(out / "plan.csv", ["line_id", "selected", "tau_s", "bus_time_h", "coverage_h"],
                  ([i, int(i in chosen), L.tau / 1000.0, L.vehicle_time_h(args.freq_per_min, args.window_min),
                    L.coverage_ms / busline.MS_PER_HOUR] for i, L in enumerate(lines)))
    io.save_table(out / "tvot.csv", ["budget_h", "bus_time_h", "baseline_h", "coverage_h", "tvot_h"],
                  [[args.budget_h, plan.bus_time_h, baseline, plan.coverage_h, total]])
    print(f"{len(plan.selected)}/{len(lines)} lines selected, TVOT {total:.3f} h (baseline {baseline:.3f} h)")
    return 0


def _label(instance, profile) -> str:
    for name, (config, _) in instance.configurations.items():
        if tuple(config) == tuple(profile):
            return name
    return "-"


def _cmd_dynamics(args) -> int:
    instance = fig2_instance(args.epsilon) if args.fixture == "fig2" else fig3_instance()
    config = DynamicsConfig(variant=args.variant, max_rounds=args.max_rounds)
    result = run_dynamics(instance.network, instance.demand, instance.model, config)
    print("round  config  phi  switches  agent_costs")
    for r in result.trace:
        costs = ", ".join(f"{c:g}" for c in r.agent_costs or ())
        print(f"{r.round:5d}  {_label(instance, r.profile):6s}  {r.phi_after:g}  {r.switches:8d}  ({costs})")
    o = result.outcome
    if o.status == "cycle":
        print(f"cycle: period {o.period}, first repeat at round {o.first_repeat_round}")
    else:
        print(f"{o.status} after {o.rounds} rounds, final configuration {_label(instance, result.profile)}")
    return o.exit_code


def _cmd_reduce_sat(args) -> int:
    with open(args.cnf, encoding="utf-8") as fh:
        sat = optima.parse_dimacs(fh.read())
    reduced = optima.reduce_sat(sat, args.gadget)
    out = _outdir(args.out)
    io.export_instance(reduced, out)
    print(f"reduced {sat.n} variables, {len(sat.clauses)} clauses -> "
          f"{reduced.network.n} vertices, {reduced.network.m} edges, {len(reduced.demand)} agents")
    if args.solve_optimum:
        profile, total = optima.brute_force_optimum(*reduced)
        verdict = optima.satisfiable(sat)
        io.save_paths(profile, out / "optimum_paths.csv")
        io.save_table(out / "optimum.csv", ["total_cost", "threshold", "satisfiable"],
                      [[total, 3 * sat.n, "SAT" if verdict else "UNSAT"]])
        print(f"optimum total {total:g} (threshold {3 * sat.n}); formula {'SAT' if verdict else 'UNSAT'}")
    return 0


def _cmd_export_fixture(args) -> int:
    if args.fixture == "fig2":
        instance = fig2_instance(args.epsilon)
    elif args.fixture == "fig3":
        instance = fig3_instance()
    else:
        instance = grid_instance(args.width, args.height, args.agents, args.pattern, args.seed)
    files = io.export_instance(instance, args.out)
    print(" ".join(str(p) for p in files.values()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sta", description="Synergistic traffic assignment toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("assign", help="run best-response dynamics on a network and demand")
    p.add_argument("--graph", required=True)
    p.add_argument("--demand", required=True)
    cost = p.add_mutually_exclusive_group(required=True)
    cost.add_argument("--r", type=_unit_interval, help="selfishness parameter of the sharing cost")
    cost.add_argument("--costs", help="step-table cost file (edge_id,threshold,cost)")
    p.add_argument("--variant", type=_variant, default=Variant.SIMULTANEOUS_BLIND)
    p.add_argument("--max-rounds", type=_positive_int, default=1000)
    p.add_argument("--backend", choices=["auto", "cch", "dijkstra"], default="auto")
    p.add_argument("--no-checks", action="store_true", help="skip per-round invariant assertions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("metrics", help="stretch and sharing statistics of a path file")
    p.add_argument("--graph", required=True)
    p.add_argument("--paths", required=True)
    p.add_argument("--baseline-paths")
    p.add_argument("--curve", type=_positive_int, nargs="+", metavar="L",
                   help="co-rider thresholds for sharing-fraction curves")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("buslines", help="plan trunk lines over a path file")
    p.add_argument("--graph", required=True)
    p.add_argument("--paths", required=True)
    p.add_argument("--budget-h", type=_non_negative, required=True)
    p.add_argument("--freq-per-min", type=_non_negative, default=busline.DEFAULT_FREQ_PER_MIN)
    p.add_argument("--window-min", type=_non_negative, default=busline.DEFAULT_WINDOW_MIN)
    p.add_argument("--capacity", type=_positive_int, default=busline.DEFAULT_CAPACITY)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_buslines)

    p = sub.add_parser("dynamics", help="replay a counterexample fixture")
    p.add_argument("--fixture", choices=["fig2", "fig3"], required=True)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--variant", type=_variant, required=True)
    p.add_argument("--max-rounds", type=_positive_int, default=100)
    p.set_defaults(func=_cmd_dynamics)

    p = sub.add_parser("reduce-sat", help="build the traffic instance of a CNF formula")
    p.add_argument("--cnf", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gadget", choices=["occurrence", "shared"], default="occurrence")
    p.add_argument("--solve-optimum", action="store_true")
    p.set_defaults(func=_cmd_reduce_sat)

    p = sub.add_parser("export-fixture", help="write a fixture or synthetic grid as CSV input files")
    p.add_argument("--fixture", choices=["fig2", "fig3", "grid"], required=True)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--agents", type=_positive_int, default=5000)
    p.add_argument("--pattern", choices=["uniform", "clustered"], default="clustered")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_fixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"sta: {exc}", file=sys.stderr)
        return EX_IOERR
    except (ValidationError, ValueError) as exc:
        print(f"sta: {exc}", file=sys.stderr)
        return EX_DATAERR


if __name__ == "__main__":
    sys.exit(main())
