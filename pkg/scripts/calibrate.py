"""Fit the constants C (l2 bound shape) and C' (l-infinity shape) on a calibration batch.

The batch uses instance/walk seeds disjoint from the acceptance seeds (0..9).
The printed constants are then frozen by hand in tests/test_acceptance.py.

    python scripts/calibrate.py --seeds 100-109 --out calibration.json
"""

import argparse
import json
import statistics
import time

from balance.harness import baseline_random
from balance.instance import L2_UNIT, generate_random
from balance.walk import L2_TO_L2, ModeParams, bound_shape, linf_shape, run


def parse_range(text):
    lo, _, hi = text.partition("-")
    return list(range(int(lo), int(hi or lo) + 1))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--seeds", default="100-109")
    ap.add_argument("--random-trials", type=int, default=100)
    ap.add_argument("--out")
    args = ap.parse_args()

    shape = bound_shape(L2_TO_L2, args.n, args.d)
    lshape = linf_shape(args.n)
    params = ModeParams.default(L2_TO_L2, args.n, args.d, dt=args.dt)
    rows = []
    for seed in parse_range(args.seeds):
        inst = generate_random(args.n, args.d, L2_UNIT, seed)
        start = time.perf_counter()
        rep = run(inst, params, seed)
        rows.append({"seed": seed, "l2": rep.final_max_l2, "linf": rep.final_max_linf,
                     "failed": rep.failed, "seconds": round(time.perf_counter() - start, 1)})
        print(json.dumps(rows[-1]), flush=True)

    anchor_inst = generate_random(args.n, args.d, L2_UNIT, 0)
    anchor = statistics.mean(baseline_random(anchor_inst, s).max_l2
                             for s in range(args.random_trials))
    result = {
        "n": args.n, "d": args.d, "dt": args.dt,
        "C": statistics.median(r["l2"] for r in rows) / shape,
        "C_linf": max(r["linf"] for r in rows) / lshape,
        "random_anchor_mean_l2": anchor,
        "runs": rows,
    }
    print(json.dumps({k: v for k, v in result.items() if k != "runs"}, indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(result, fh, indent=2)


if __name__ == "__main__":
    main()
