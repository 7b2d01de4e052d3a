"""Command-line entry point: ``balance run | gen | steinitz | oracle | experiment``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import TooLarge, ExperimentConfig, brute_force_prefix_opt, run_experiment
from .instance import (
    L2_UNIT,
    LINF_UNIT,
    DimensionMismatch,
    NormViolation,
    ParseError,
    VectorInstance,
    balance_to_zero_sum,
    generate_random,
    generate_zero_sum,
    load_instance,
    save_instance,
)
from .steinitz import NotZeroSum, steinitz_order
from .walk import HALT, L2_TO_L2, LINF_TO_L2, ModeParams, SdpFailure, run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HALT = 2
EXIT_SDP = 3

RUN_KEYS = ("mode", "dt", "seed", "abort_policy", "C_tau", "C_lambda", "resolve_tol",
            "max_sdp_iter")


def _instance_from_config(cfg: dict, base: Path) -> VectorInstance:
    if "input" in cfg:
        path = Path(cfg["input"])
        return load_instance(path if path.is_absolute() else base / path)
    source = cfg.get("instance")
    if source is None:
        raise ParseError("config needs an 'input' path or an 'instance' generator block")
    return generate_random(int(source["n"]), int(source["d"]), source.get("norm_mode", L2_UNIT),
                           int(source.get("seed", 0)))


def cmd_run(args) -> int:
    cfg_path = Path(args.config)
    cfg = json.loads(cfg_path.read_text())
    for key in RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if args.input:
        cfg["input"] = str(Path(args.input).resolve())
    inst = _instance_from_config(cfg, cfg_path.parent)
    mode = cfg.get("mode") or (LINF_TO_L2 if inst.norm_mode == LINF_UNIT else L2_TO_L2)
    overrides = {k: cfg[k] for k in ("dt", "abort_policy", "resolve_tol", "max_sdp_iter") if k in cfg}
    if args.debug_dir:
        overrides["debug_dir"] = args.debug_dir
    params = ModeParams.default(mode, inst.n, inst.d, C_tau=cfg.get("C_tau", 5.0),
                                C_lambda=cfg.get("C_lambda", 5.0), **overrides)
    states = []
    report = run(inst, params, int(cfg.get("seed", 0)), state_out=states)
    if args.trajectory:
        report.write_csv(args.trajectory)
    if args.merge_log:
        states[0].asi_tree.export_log(args.merge_log)
    summary = report.summary()
    summary["coloring"] = [int(c) for c in report.coloring]
    print(json.dumps(summary, indent=2))
    if report.failed:
        return EXIT_SDP
    if report.aborted and params.abort_policy == HALT:
        return EXIT_HALT
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.zero_sum and args.mode == L2_UNIT:
        inst = generate_zero_sum(args.n, args.d, args.seed)
    else:
        inst = generate_random(args.n, args.d, args.mode, args.seed)
        if args.zero_sum:
            inst = balance_to_zero_sum(inst)
    save_instance(inst, args.out)
    return EXIT_OK


def cmd_steinitz(args) -> int:
    inst = load_instance(args.input)
    params = ModeParams.default(L2_TO_L2, inst.n, inst.d, dt=args.dt)
    try:
        result = steinitz_order(inst, params, args.seed)
    except SdpFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SDP
    print(json.dumps(result.permutation.tolist()))
    print(json.dumps({"max_prefix_norm": result.max_prefix_norm,
                      "recursion_depth": result.recursion_depth,
                      "level_discrepancies": result.level_discrepancies}))
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = load_instance(args.input)
    best, signs = brute_force_prefix_opt(inst, return_coloring=True)
    print(json.dumps({"optimum": best, "coloring": [int(s) for s in signs]}))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    if args.out:
        cfg.output = args.out
    result = run_experiment(cfg)
    print(json.dumps(result["summary"]["aggregate"], indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balance", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the walk on one instance")
    p.add_argument("--config", required=True)
    p.add_argument("--input", help="instance JSON, overriding the config")
    p.add_argument("--mode", choices=[LINF_TO_L2, L2_TO_L2])
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--abort-policy", dest="abort_policy", choices=["HALT", "WARN_CONTINUE"])
    p.add_argument("--C-tau", dest="C_tau", type=float)
    p.add_argument("--C-lambda", dest="C_lambda", type=float)
    p.add_argument("--resolve-tol", dest="resolve_tol", type=float)
    p.add_argument("--max-sdp-iter", dest="max_sdp_iter", type=int)
    p.add_argument("--trajectory", help="write the per-step CSV here")
    p.add_argument("--merge-log", help="write the interval-tree event log (JSON lines) here")
    p.add_argument("--debug-dir", help="dump failing SDP problems into this directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=[L2_UNIT, LINF_UNIT], default=L2_UNIT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-sum", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("steinitz", help="order a zero-sum instance")
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.01)
    p.set_defaults(func=cmd_steinitz)

    p = sub.add_parser("oracle", help="exact optimum by enumeration (n <= 16)")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("experiment", help="run a batch of trials from an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, NormViolation, DimensionMismatch, NotZeroSum, TooLarge, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
