"""Baselines, the exact oracle for small inputs, and seeded experiment sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .instance import L2_UNIT, LINF_UNIT, VectorInstance, generate_random, load_instance
from .walk import (
    L2_TO_L2,
    LINF_TO_L2,
    ModeParams,
    RunReport,
    bound_shape,
    linf_shape,
    prefix_discrepancy,
    run,
)

FULL_ASI = "FULL_ASI"
SI_ONLY = "SI_ONLY"
RANDOM = "RANDOM"
BRUTE_FORCE = "BRUTE_FORCE"
ALGORITHMS = (FULL_ASI, SI_ONLY, RANDOM, BRUTE_FORCE)

BRUTE_FORCE_MAX_N = 16

TRIAL_COLUMNS = [
    "trial", "seed", "algorithm", "n", "d", "mode", "max_l2", "max_linf", "ratio_l2",
    "ratio_linf", "steps", "aborted", "failed", "n_violations", "clip_events",
    "fallback_events", "sdp_checks", "sdp_passes",
]


class TooLarge(ValueError):
    pass


@dataclass
class BaselineResult:
    coloring: np.ndarray
    max_l2: float
    max_linf: float


def baseline_random(inst: VectorInstance, seed: int) -> BaselineResult:
    rng = np.random.default_rng(seed)
    coloring = rng.choice(np.array([-1.0, 1.0]), size=inst.n)
    l2, linf = prefix_discrepancy(inst.A, coloring)
    return BaselineResult(coloring, l2, linf)


def baseline_si_only(inst: VectorInstance, params: ModeParams, seed: int) -> RunReport:
    """The same walk with the ASI rows left out of every SDP."""
    return run(inst, dataclasses.replace(params, use_asi=False), seed)


def brute_force_prefix_opt(inst: VectorInstance, return_coloring: bool = False):
    """Exact minimum over all sign vectors of the largest prefix l2 norm.

    Flipping every sign leaves all prefix norms unchanged, so the first sign
    is fixed to +1 and the remaining 2^(n-1) patterns are scanned in chunks.
    """
    n = inst.n
    if n > BRUTE_FORCE_MAX_N:
        raise TooLarge(f"n={n} exceeds the brute-force limit {BRUTE_FORCE_MAX_N}")
    V = inst.A.T  # (n, d)
    best, best_signs = np.inf, None
    rest = n - 1
    chunk = 1 << min(rest, 12)
    for start in range(0, 1 << rest, chunk):
        codes = np.arange(start, min(start + chunk, 1 << rest))
        bits = (codes[:, None] >> np.arange(rest)) & 1
        signs = np.hstack([np.ones((len(codes), 1)), 1.0 - 2.0 * bits])
        S = np.cumsum(signs[:, :, None] * V[None, :, :], axis=1)
        worst = np.sqrt(np.max(np.einsum("kjd,kjd->kj", S, S), axis=1))
        k = int(np.argmin(worst))
        if worst[k] < best:
            best, best_signs = float(worst[k]), signs[k]
    if return_coloring:
        return best, best_signs
    return best


@dataclass
class ExperimentConfig:
    """One batch of trials on one instance.

    ``instance`` is either ``{"file": path}`` or generator parameters
    ``{"n", "d", "norm_mode", "seed"}``. Seeds shorter than ``trials`` are
    extended with consecutive integers after the last one given.
    """

    instance: dict
    algorithm: str = FULL_ASI
    trials: int = 1
    seeds: list = field(default_factory=list)
    output: str = "results"
    mode: str | None = None
    dt: float = 0.01
    C_tau: float = 5.0
    C_lambda: float = 5.0
    abort_policy: str = "WARN_CONTINUE"
    resolve_tol: float = 1e-6
    max_sdp_iter: int = 5000
    write_trajectories: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.trials < 0:
            raise ValueError("trials must be non-negative")
        if self.algorithm == BRUTE_FORCE and self.load().n > BRUTE_FORCE_MAX_N:
            raise TooLarge(f"BRUTE_FORCE needs n <= {BRUTE_FORCE_MAX_N}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def load(self) -> VectorInstance:
        source = self.instance
        if "file" in source:
            return load_instance(source["file"])
        return generate_random(int(source["n"]), int(source["d"]), source.get("norm_mode", L2_UNIT),
                               int(source.get("seed", 0)))

    def trial_seeds(self) -> list:
        seeds = [int(s) for s in self.seeds[: self.trials]]
        nxt = seeds[-1] + 1 if seeds else 0
        while len(seeds) < self.trials:
            seeds.append(nxt)
            nxt += 1
        return seeds

    def walk_mode(self, inst: VectorInstance) -> str:
        if self.mode is not None:
            return self.mode
        return LINF_TO_L2 if inst.norm_mode == LINF_UNIT else L2_TO_L2

    def params(self, inst: VectorInstance) -> ModeParams:
        return ModeParams.default(
            self.walk_mode(inst), inst.n, inst.d, C_tau=self.C_tau, C_lambda=self.C_lambda,
            dt=self.dt, abort_policy=self.abort_policy, resolve_tol=self.resolve_tol,
            max_sdp_iter=self.max_sdp_iter,
        )


def run_trial(config: ExperimentConfig, inst: VectorInstance, seed: int):
    """One trial: a row of the trial table, plus the walk report when there is one."""
    mode = config.walk_mode(inst)
    row = {"seed": seed, "algorithm": config.algorithm, "n": inst.n, "d": inst.d, "mode": mode}
    report = None
    if config.algorithm in (FULL_ASI, SI_ONLY):
        params = config.params(inst)
        report = run(inst, params, seed) if config.algorithm == FULL_ASI else \
            baseline_si_only(inst, params, seed)
        s = report.summary()
        row.update(max_l2=s["final_max_l2"], max_linf=s["final_max_linf"], steps=s["steps"],
                   aborted=s["aborted"], failed=s["failed"], n_violations=s["n_violations"],
                   clip_events=s["clip_events"], fallback_events=s["fallback_events"],
                   sdp_checks=s["sdp_checks"], sdp_passes=s["sdp_passes"])
    elif config.algorithm == RANDOM:
        res = baseline_random(inst, seed)
        row.update(max_l2=res.max_l2, max_linf=res.max_linf)
    else:
        best, signs = brute_force_prefix_opt(inst, return_coloring=True)
        row.update(max_l2=best, max_linf=prefix_discrepancy(inst.A, signs)[1])
    row["ratio_l2"] = row["max_l2"] / bound_shape(mode, inst.n, inst.d)
    row["ratio_linf"] = row["max_linf"] / linf_shape(inst.n)
    for key in TRIAL_COLUMNS:
        row.setdefault(key, 0)
    return row, report


def _csv_text(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRIAL_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def aggregate(rows: list) -> dict:
    def stats(key):
        vals = [r[key] for r in rows]
        if not vals:
            return {"median": None, "max": None}
        return {"median": statistics.median(vals), "max": max(vals)}

    return {
        "trials": len(rows),
        "max_l2": stats("max_l2"),
        "max_linf": stats("max_linf"),
        "ratio_l2": stats("ratio_l2"),
        "ratio_linf": stats("ratio_linf"),
        "aborted": sum(bool(r["aborted"]) for r in rows),
        "failed": sum(bool(r["failed"]) for r in rows),
        "runs_with_violations": sum(r["n_violations"] > 0 for r in rows),
        "fallback_events": sum(r["fallback_events"] for r in rows),
        "clip_events": sum(r["clip_events"] for r in rows),
    }


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every trial and write ``trials.csv``, ``summary.json`` and ``timing.json``.

    Wall-clock times live in their own file so the other two outputs are
    reproducible byte for byte under fixed seeds.
    """
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    inst = config.load()
    rows, times = [], []
    for trial, seed in enumerate(config.trial_seeds()):
        row, report = run_trial(config, inst, seed)
        row["trial"] = trial
        rows.append(row)
        if report is not None:
            times.append(report.wall_time)
            if config.write_trajectories:
                report.write_csv(out / f"trajectory_{trial:03d}.csv")
    summary = {"config": dataclasses.asdict(config), "aggregate": aggregate(rows)}
    (out / "trials.csv").write_text(_csv_text(rows))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    timing = {"runtimes": times,
              "median_runtime": statistics.median(times) if times else None}
    (out / "timing.json").write_text(json.dumps(timing, indent=2))
    return {"rows": rows, "summary": summary, "timing": timing, "output": str(out)}


def grid_sweep(ns, ds, algorithms, trials: int, output: str, **overrides) -> list:
    """Summary rows for every (n, d, algorithm) cell of a grid."""
    table = []
    for n, d, alg in itertools.product(ns, ds, algorithms):
        cfg = ExperimentConfig(instance={"n": n, "d": d, "norm_mode": L2_UNIT, "seed": 0},
                               algorithm=alg, trials=trials,
                               output=str(Path(output) / f"n{n}_d{d}_{alg}"), **overrides)
        agg = run_experiment(cfg)["summary"]["aggregate"]
        table.append({"n": n, "d": d, "algorithm": alg, **{
            "median_l2": agg["max_l2"]["median"], "max_l2": agg["max_l2"]["max"],
            "median_ratio_l2": agg["ratio_l2"]["median"], "aborted": agg["aborted"],
            "fallback_events": agg["fallback_events"]}})
    return table
