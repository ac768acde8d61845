"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 no zero-collision layout
found, 3 collisions present in a checked layout.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .architecture import Architecture
from .config import ConfigError, RunConfig, layout_document, load_layout, write_json
from .constraints import ThresholdTable, evaluate, instantiate_constraints
from .graph import DeviceGraph, GraphError, LatticeSpec, build_lattice
from .solver import solve
from .yields import DispersionModel, scale_yield, sweep_csv, yield_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_COLLISIONS = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="run configuration JSON")
    parser.add_argument("--seed", type=int, default=d, help="random seed")
    parser.add_argument("--output", "-o", default=d, help="output directory")
    parser.add_argument("--quiet", "-q", action="store_true", default=d or False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="freqalloc", description=__doc__.splitlines()[0])
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        _globals(p, suppress=True)
        return p

    p = command("generate", "write a lattice graph as JSON")
    p.add_argument("--kind", required=True, help="chain, square, hexagon or heavy-hexagon")
    p.add_argument("--cells", type=int, help="number of nodes (default: standard cell)")
    p.add_argument("--periodic", action="store_true", help="wrap the boundaries")
    p.add_argument("--file", default="graph.json", help="file name inside the output directory")

    def graph_args(p):
        p.add_argument("--graph", help="graph JSON (default: from layout or config)")
        p.add_argument("--arch", help="cr-qubit, cr-qutrit or cz-qubit")
        p.add_argument("--thresholds", help="threshold table JSON")

    p = command("solve", "optimize a frequency layout")
    graph_args(p)
    p.add_argument("--kind", help="lattice kind, instead of --graph")
    p.add_argument("--cells", type=int)
    p.add_argument("--periodic", action="store_true")
    p.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"), help="allocation band in MHz")
    p.add_argument("--alpha", type=float, help="anharmonicity in MHz")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--fallback", choices=("none", "anneal"))
    p.add_argument("--file", default="layout.json")

    p = command("check", "evaluate every constraint on a layout")
    graph_args(p)
    p.add_argument("--layout", required=True)
    p.add_argument("--file", default="collisions.csv")

    p = command("yield", "Monte-Carlo yield sweep of a layout")
    graph_args(p)
    p.add_argument("--layout", required=True)
    p.add_argument("--sigmas", type=float, nargs="+", help="dispersions in MHz")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int, default=1, help="threads for trial blocks")
    p.add_argument("--scale-N", dest="scale_n", type=int, help="add a scaled-yield column")
    p.add_argument("--file", default="yield.csv")

    p = command("scale", "unit-cell yield scaling")
    p.add_argument("y_m", type=float)
    p.add_argument("n_m", type=int)
    p.add_argument("N", type=int)
    return parser


def _say(args, *msg) -> None:
    if not args.quiet:
        print(*msg)


def _run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.output is not None:
        cfg.output_dir = Path(args.output)
    return cfg


def _table(args, cfg: RunConfig, fallback_arch: Architecture | None) -> ThresholdTable:
    table = ThresholdTable.load(args.thresholds) if args.thresholds else cfg.thresholds
    # --arch, then the architecture recorded in the layout, then the config
    if args.arch:
        arch = Architecture.parse(args.arch)
    elif fallback_arch is not None:
        arch = fallback_arch
    else:
        arch = cfg.architecture
    return table.with_architecture(arch)


def cmd_generate(args) -> int:
    cfg = _run_config(args)
    cells = args.cells
    spec = LatticeSpec(args.kind, 0, args.periodic)
    if cells is None:
        cells = LatticeSpec.standard(spec.kind).unit_cell_size
    graph = build_lattice(LatticeSpec(spec.kind, cells, args.periodic))
    path = cfg.output_dir / args.file
    path.parent.mkdir(parents=True, exist_ok=True)
    graph.save(path)
    _say(args, f"nodes={graph.node_count} edges={len(graph.edges)} -> {path}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _run_config(args)
    if args.graph:
        graph = DeviceGraph.load(args.graph)
    elif args.kind:
        spec = LatticeSpec(args.kind, 0, args.periodic)
        cells = args.cells or LatticeSpec.standard(spec.kind).unit_cell_size
        graph = build_lattice(LatticeSpec(spec.kind, cells, args.periodic))
    else:
        graph = cfg.graph()
    table = _table(args, cfg, None)
    solver = cfg.solver
    overrides = {
        "band": tuple(args.band) if args.band else None,
        "alpha": args.alpha,
        "node_limit": args.node_limit,
        "fallback": args.fallback,
        "seed": args.seed,
    }
    solver = replace(solver, **{k: v for k, v in overrides.items() if v is not None})
    result = solve(graph, table, solver)
    path = cfg.output_dir / args.file
    write_json(path, layout_document(result, graph, table))
    _say(args, f"status: {result.status}")
    _say(args, f"R: {result.R:.3f} MHz   min margin: {result.min_margin:.3f} MHz")
    if result.R_type:
        _say(args, "per-type radii: " + ", ".join(f"{t}={r:.2f}" for t, r in result.R_type.items()))
    for note in result.notes:
        _say(args, f"note: {note}")
    _say(args, f"layout -> {path}")
    if not result.ok:
        print("no zero-collision layout found", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _layout_and_graph(args, cfg):
    layout = load_layout(args.layout)
    if args.graph:
        graph = DeviceGraph.load(args.graph)
    elif layout.graph is not None:
        graph = layout.graph
    else:
        graph = cfg.graph()
    if graph.node_count != len(layout.assignment.freqs):
        raise UsageError(
            f"layout has {len(layout.assignment.freqs)} frequencies but the graph has "
            f"{graph.node_count} nodes"
        )
    return layout, graph


def cmd_check(args) -> int:
    cfg = _run_config(args)
    layout, graph = _layout_and_graph(args, cfg)
    table = _table(args, cfg, layout.architecture)
    report = evaluate(layout.assignment, instantiate_constraints(graph, table))
    path = cfg.output_dir / args.file
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_csv())
    counts = ", ".join(f"{t}={c}" for t, c in report.counts.items())
    _say(args, f"collisions: {report.total_collisions} ({counts})")
    _say(args, f"min margin: {report.min_margin:.3f} MHz")
    _say(args, f"margins -> {path}")
    return EXIT_OK if report.zero_collision else EXIT_COLLISIONS


def cmd_yield(args) -> int:
    cfg = _run_config(args)
    layout, graph = _layout_and_graph(args, cfg)
    table = _table(args, cfg, layout.architecture)
    sigmas = args.sigmas if args.sigmas else [cfg.dispersion.sigma]
    trials = args.trials if args.trials is not None else cfg.dispersion.trials
    seed = args.seed if args.seed is not None else cfg.dispersion.seed
    DispersionModel(min(sigmas), trials, seed)  # validates
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    rows = yield_sweep(layout.assignment, graph, table, sigmas, trials, seed, workers=args.workers)
    text = sweep_csv(rows, args.scale_n, graph.node_count)
    path = cfg.output_dir / args.file
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    for sigma, est in rows:
        lo, hi = est.confidence_interval()
        _say(args, f"sigma={sigma:g} MHz  yield={est.value:.4f}  95% CI [{lo:.4f}, {hi:.4f}]")
    _say(args, f"sweep -> {path}")
    return EXIT_OK


def cmd_scale(args) -> int:
    print(repr(scale_yield(args.y_m, args.n_m, args.N)))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "check": cmd_check,
    "yield": cmd_yield,
    "scale": cmd_scale,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GraphError, UsageError, ValueError, OSError) as exc:
        print(f"freqalloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
