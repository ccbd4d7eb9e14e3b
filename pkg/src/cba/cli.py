"""Command-line front end.

Subcommands: ``generate`` (write graph + label files), ``basis`` (write a
basis file and print stats), ``run`` (execute an experiment into CSV) and
``plot`` (render aggregate curves into SVG).

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bases, harness, svgplot
from .engine import NumericsError
from .environments import ParseError, save_graph_files


def _add_common(parser):
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cba",
        description="Contextual bandits with abstention: experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="emit graph and label files")
    _add_common(gen)

    bas = sub.add_parser("basis", help="emit the basis file and stats")
    _add_common(bas)

    runp = sub.add_parser("run", help="execute the experiment, write CSV")
    _add_common(runp)
    runp.add_argument("--seed-offset", type=int, default=0)
    runp.add_argument("--threads", type=int, default=1)

    plot = sub.add_parser("plot", help="render the results CSV into SVG")
    _add_common(plot)
    plot.add_argument("--metric", choices=("mistakes", "reward"),
                      default="mistakes")
    return parser


def _out_dir(args, config) -> Path:
    target = args.out or config.out_dir
    if target is None:
        raise harness.ConfigError("no output directory (use --out or 'out =')")
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_generate(args) -> int:
    config = harness.load_config(args.config)
    out = _out_dir(args, config)
    lg = harness.build_environment(config)
    save_graph_files(lg, out / "edges.txt", out / "labels.txt")
    print(f"wrote {out / 'edges.txt'} ({lg.graph.n_edges} edges) and "
          f"{out / 'labels.txt'} ({lg.n_nodes} nodes, {lg.n_classes} classes)")
    return 0


def cmd_basis(args) -> int:
    config = harness.load_config(args.config)
    out = _out_dir(args, config)
    instance = harness.build_instance(config)
    basis = instance.basis
    if basis is None:
        metric = harness.build_metric(config, instance.lg)
        basis = bases.metric_ball_basis(metric)
    bases.write_basis_file(out / "basis.txt", basis)
    sizes = np.array([len(el) for el in basis.elements])
    print(f"wrote {out / 'basis.txt'}: {len(basis)} elements "
          f"(sizes min {sizes.min()} / mean {sizes.mean():.1f} / max {sizes.max()})")
    return 0


def cmd_run(args) -> int:
    config = harness.load_config(args.config)
    out = _out_dir(args, config)
    records = harness.run(config, threads=args.threads,
                          seed_offset=args.seed_offset, out_dir=out)
    print(f"wrote {out / 'results.csv'} ({len(records)} runs x "
          f"{config.horizon} trials)")
    return 0


def cmd_plot(args) -> int:
    config = harness.load_config(args.config)
    out = _out_dir(args, config)
    csv_path = out / "results.csv"
    if not csv_path.exists():
        raise harness.ConfigError(f"{csv_path} not found (run first)")
    records = harness.read_results_csv(csv_path)
    column = "cum_mistakes" if args.metric == "mistakes" else "cum_reward"
    ylabel = ("cumulative mistakes" if args.metric == "mistakes"
              else "cumulative reward")
    curves = harness.aggregate(records, column=column)
    svg = svgplot.render_svg(curves, ylabel=ylabel)
    (out / "curves.svg").write_text(svg)
    print(f"wrote {out / 'curves.svg'}")
    return 0


_COMMANDS = {"generate": cmd_generate, "basis": cmd_basis,
             "run": cmd_run, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (harness.ConfigError, ParseError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
