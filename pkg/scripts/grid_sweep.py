"""Sweep n x d x algorithm and print a summary table (CSV on stdout).

    python scripts/grid_sweep.py --trials 3 --dt 0.05 --out results/grid
"""

import argparse
import csv
import sys

from balance.harness import ALGORITHMS, BRUTE_FORCE, grid_sweep


def ints(text):
    return [int(x) for x in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", type=ints, default=[64, 128, 256])
    ap.add_argument("--ds", type=ints, default=[4, 8, 16])
    ap.add_argument("--algorithms", default="FULL_ASI,SI_ONLY,RANDOM")
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--out", default="results/grid")
    args = ap.parse_args()

    algorithms = args.algorithms.split(",")
    for alg in algorithms:
        if alg not in ALGORITHMS or alg == BRUTE_FORCE:
            ap.error(f"unsupported algorithm for a grid sweep: {alg}")
    table = grid_sweep(args.ns, args.ds, algorithms, args.trials, args.out, dt=args.dt)
    writer = csv.DictWriter(sys.stdout, fieldnames=list(table[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(table)


if __name__ == "__main__":
    main()
