#!/usr/bin/env python3
"""Sweep the three initialization strategies over several seeds and print a
summary table per dataset, mirroring the CLI's --compare output."""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from simmap.pipeline import RunConfig, compare, format_compare

DATASETS = pathlib.Path(__file__).resolve().parents[1] / "datasets"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--datasets", nargs="*", default=["m_n.json", "two_level.json"])
    ap.add_argument("--seeds", type=int, nargs="*", default=list(range(10)))
    ap.add_argument("--iters", type=int, default=150)
    args = ap.parse_args()

    for name in args.datasets:
        path = DATASETS / name
        print(f"== {name} ==")
        cfg = RunConfig(input=str(path))
        cfg.optimizer.max_iter = args.iters
        rows = compare(cfg, ["match_swap", "random_cvt", "proj_scale"], args.seeds)
        print(format_compare(rows))
        print()


if __name__ == "__main__":
    main()
