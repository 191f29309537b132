"""Command-line driver: run the pipeline, compare strategies, or generate
synthetic datasets."""
from __future__ import annotations

import argparse
import json
import os
import sys

from .datasets import KINDS, DatasetError, gen_synthetic
from .geometry import GeometryError
from .layout_init import STRATEGIES
from .optimizer import OptimizerConfig
from .pipeline import PipelineError, RunConfig, compare, format_compare, run, table_row
from .render import RenderOptions
from .similarity import SIMILARITY_KINDS, SimilarityError
from .tree_model import TreeValidationError

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="simmap",
        description="Similarity-driven, neighborhood-preserving Voronoi treemaps.",
    )
    parser.add_argument("--input", help="input dataset document (JSON)")
    parser.add_argument("--out", help="output path prefix (<out>.svg, <out>.metrics.json)")
    parser.add_argument("--init", choices=STRATEGIES, default="match_swap")
    parser.add_argument("--sim", choices=SIMILARITY_KINDS, default="cosine")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (falls back to SIMMAP_SEED, then 0)")
    parser.add_argument("--iters", type=int, default=150, help="optimization iterations per level")
    parser.add_argument("--max-neighbors", type=int, default=6)
    parser.add_argument("--boundary", default="circle",
                        help="root boundary: square, circle, or polygon:N")
    parser.add_argument("--boundary-size", type=float, default=1000.0)
    parser.add_argument("--emit-trace", action="store_true")
    parser.add_argument("--emit-constraints", action="store_true")
    parser.add_argument("--emit-geometry", action="store_true")
    parser.add_argument("--show-unrealized", action="store_true")
    parser.add_argument("--show-disconnect", action="store_true")
    parser.add_argument("--compare", help="comma-separated init strategies to compare")
    parser.add_argument("--seeds", help="comma-separated seeds for --compare")
    parser.add_argument("--gen", choices=KINDS, help="generate a synthetic dataset instead of running")
    parser.add_argument("--leaves", type=int, default=None, help="synthetic leaf count")
    parser.add_argument("--parents", type=int, default=None, help="synthetic parent count")
    parser.add_argument("--density", type=float, default=None, help="synthetic constraint density")
    return parser


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SIMMAP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise TreeValidationError(f"SIMMAP_SEED is not an integer: {env!r}") from exc
    return 0


def _make_config(args) -> RunConfig:
    return RunConfig(
        input=args.input,
        out_prefix=args.out,
        boundary=args.boundary,
        boundary_size=args.boundary_size,
        init=args.init,
        sim=args.sim,
        seed=_resolve_seed(args),
        optimizer=OptimizerConfig(max_iter=args.iters, max_neighbor_count=args.max_neighbors),
        render=RenderOptions(
            show_unrealized=args.show_unrealized,
            show_disconnect_icon=args.show_disconnect,
        ),
        emit_trace=args.emit_trace,
        emit_constraints=args.emit_constraints,
        emit_geometry=args.emit_geometry,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        if args.gen:
            params = {}
            if args.leaves is not None:
                params["leaves"] = args.leaves
            if args.parents is not None:
                params["parents"] = args.parents
            if args.density is not None:
                params["density"] = args.density
            doc = gen_synthetic(args.gen, params, _resolve_seed(args))
            text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
            if args.out:
                with open(f"{args.out}.json", "w", encoding="utf-8") as fh:
                    fh.write(text)
                print(f"wrote {args.out}.json")
            else:
                print(text, end="")
            return 0

        if args.input is None:
            parser.print_usage(sys.stderr)
            print("error: --input is required unless --gen is given", file=sys.stderr)
            return EXIT_USAGE

        config = _make_config(args)
        if args.compare:
            strategies = [s for s in args.compare.split(",") if s]
            if not strategies:
                print("error: --compare needs at least one strategy", file=sys.stderr)
                return EXIT_USAGE
            unknown = [s for s in strategies if s not in STRATEGIES]
            if unknown:
                print(f"error: unknown strategies {unknown}", file=sys.stderr)
                return EXIT_USAGE
            seeds = [int(s) for s in (args.seeds or str(config.seed)).split(",") if s]
            rows = compare(config, strategies, seeds)
            print(format_compare(rows))
            return 0

        result = run(config)
        print(table_row(args.input, result))
        if args.out:
            print(f"wrote {args.out}.svg and {args.out}.metrics.json")
        return 0
    except (GeometryError, PipelineError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TreeValidationError, SimilarityError, DatasetError, FileNotFoundError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
