"""SDP-guided walk over a sliding window of columns.

The fractional coloring x starts at 0 and moves by h * u per step, where u is a
unit vector sampled from a feasible SDP solution supported on the window (the
first 10d alive columns) and h = sqrt(dt). A column dies once |x_j| passes
1 - theta_dead. The ASI guards come from an alive-count interval tree; in
L2_TO_L2 mode, per-row l2^2-mass trees also choose blocking prefixes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from balance import sdp
from balance.instance import L2_UNIT, LINF_UNIT, VectorInstance
from balance.merge_tree import (
    FROZEN,
    MergeTree,
    SizeMeasure,
    accumulated_error_set,
    guard_of,
    replay_active,
)

LINF_TO_L2 = "LINF_TO_L2"
L2_TO_L2 = "L2_TO_L2"
HALT = "HALT"
WARN_CONTINUE = "WARN_CONTINUE"

WINDOW_FACTOR = 10
CSV_COLUMNS = [
    "step", "t", "window_lo", "window_hi", "n_guards", "max_l2_prefix_disc",
    "max_linf_prefix_disc", "sdp_psd_residual", "sdp_window_residual", "clip_events",
]
_MAX_VIOLATION_RECORDS = 200


class ModeMismatch(ValueError):
    pass


class SdpFailure(RuntimeError):
    pass


class NotConverged(RuntimeError):
    pass


class HistoryUnavailable(RuntimeError):
    pass


def log2n(n: int) -> float:
    # log n = 0 at n = 1 would zero out gamma; the formulas are asymptotic anyway
    return max(1.0, math.log2(n))


@dataclass
class ModeParams:
    mode: str
    gamma_asi: float
    tau: float
    s: float
    lam: float | None = None
    s0: float | None = None
    C_tau: float = 5.0
    C_lambda: float = 5.0
    dt: float = 0.01
    abort_policy: str = WARN_CONTINUE
    resolve_tol: float = 1e-6
    max_sdp_iter: int = 5000
    use_asi: bool = True
    s_formula: float = 0.0
    s_clamped: bool = False
    check_invariants: bool = False
    record_history: bool = False
    debug_dir: str | None = None

    def __post_init__(self):
        if self.mode not in (LINF_TO_L2, L2_TO_L2):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (self.gamma_asi > 0 and self.tau > 0 and self.s > 0):
            raise ValueError("gamma_asi, tau and s must be positive")
        if self.mode == L2_TO_L2 and not (self.lam and self.lam > 0 and self.s0 and self.s0 > 0):
            raise ValueError("L2_TO_L2 needs positive lam and s0")
        if self.abort_policy not in (HALT, WARN_CONTINUE):
            raise ValueError(f"unknown abort policy {self.abort_policy!r}")

    @classmethod
    def default(cls, mode: str, n: int, d: int, C_tau: float = 5.0, C_lambda: float = 5.0,
                **overrides) -> "ModeParams":
        L = log2n(n)
        if mode == LINF_TO_L2:
            gamma = 100.0 * math.sqrt(d) * L
            tau = C_tau * (d + d ** 0.75 * L + d ** 0.25 * L ** 1.5)
            lam = s0 = None
        elif mode == L2_TO_L2:
            gamma = 100.0 * math.sqrt(d) / math.sqrt(L)
            tau = C_tau * (math.sqrt(d) + d ** 0.25 * L ** 1.75)
            lam = C_lambda * L ** 1.5
            s0 = 20.0 * L
        else:
            raise ValueError(f"unknown mode {mode!r}")
        s_formula = 20.0 * d * L / gamma
        values = dict(mode=mode, gamma_asi=gamma, tau=tau, lam=lam, s=max(2.0, s_formula), s0=s0,
                      C_tau=C_tau, C_lambda=C_lambda, s_formula=s_formula,
                      s_clamped=s_formula < 2.0)
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> dict:
        return asdict(self)


def bound_shape(mode: str, n: int, d: int) -> float:
    """The n, d dependence of the target l2 bound (constant left out)."""
    L = log2n(n)
    if mode == L2_TO_L2:
        return math.sqrt(d) + d ** 0.25 * L ** 1.75
    return d + d ** 0.75 * L + d ** 0.25 * L ** 1.5


def linf_shape(n: int) -> float:
    return log2n(n) ** 1.5


@dataclass
class Violation:
    step: int
    prefix: int
    kind: str  # "l2" or "linf"
    value: float
    bound: float


@dataclass
class StepOutcome:
    step: int
    report: sdp.ConstraintReport | None
    violation: Violation | None
    clipped: bool
    done: bool


@dataclass
class RunReport:
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    n_violations: int = 0
    events: list = field(default_factory=list)  # clamps, fallbacks, SDP retries
    coloring: np.ndarray | None = None
    x_final: np.ndarray | None = None
    steps: int = 0
    aborted: bool = False
    failed: bool = False
    converged: bool = True
    alive_at_end: int = 0
    final_max_l2: float = float("nan")
    final_max_linf: float = float("nan")
    max_l2_over_time: float = 0.0
    max_linf_over_time: float = 0.0
    rounding_delta_l2: float = 0.0
    rounding_delta_bound: float = 0.0
    sdp_checks: int = 0
    sdp_passes: int = 0
    invariants: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for rec in self.records:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "aborted": self.aborted,
            "failed": self.failed,
            "converged": self.converged,
            "alive_at_end": self.alive_at_end,
            "final_max_l2": self.final_max_l2,
            "final_max_linf": self.final_max_linf,
            "max_l2_over_time": self.max_l2_over_time,
            "max_linf_over_time": self.max_linf_over_time,
            "rounding_delta_l2": self.rounding_delta_l2,
            "rounding_delta_bound": self.rounding_delta_bound,
            "n_violations": self.n_violations,
            "sdp_checks": self.sdp_checks,
            "sdp_passes": self.sdp_passes,
            "clip_events": sum(1 for e in self.events if e["kind"] == "clip"),
            "fallback_events": sum(1 for e in self.events if e["kind"].startswith("fallback")),
            "invariants": self.invariants,
            "wall_time": self.wall_time,
        }


class WalkState:
    def __init__(self, inst: VectorInstance, params: ModeParams, seed: int):
        self.inst = inst
        self.params = params
        self.A = inst.A
        self.d, self.n = inst.d, inst.n
        self.x = np.zeros(self.n)
        self.steps = 0
        self.t = 0.0
        self.theta_dead = max(1.0 / (2 * self.n * self.d), math.sqrt(params.dt) / 2.0)
        self.dead = np.zeros(self.n, dtype=bool)
        self.window = np.arange(min(WINDOW_FACTOR * self.d, self.n))
        self.window_constraint = True
        self.phi = np.zeros((self.d, self.n))
        self.rng = np.random.default_rng(seed)
        self.asi_tree = MergeTree(self.n, params.s, SizeMeasure.alive_count(self.n))
        self.inf_trees = []
        if params.mode == L2_TO_L2:
            # the l2^2 rule counts an interval as small at mass <= s0 / 2
            self.inf_trees = [MergeTree(self.n, params.s0, SizeMeasure.l2sq_mass(self.A, i),
                                        strict_small=False) for i in range(self.d)]
        self.report = RunReport()
        self.clipped = False
        self.clock_broken = False
        self.last_guards = None
        self.last_blocking = []
        self.prev_U = None
        self.history = [] if params.record_history else None
        self.inv = _InvariantTracker(self) if params.check_invariants else None
        if params.s_clamped:
            self.report.events.append({"step": 0, "kind": "clamp",
                                       "detail": f"s={params.s_formula:.4g} clamped to {params.s:.4g}"})

    @property
    def alive(self) -> np.ndarray:
        return ~self.dead

    def trees(self):
        return [self.asi_tree] + self.inf_trees


def init_walk(inst: VectorInstance, params: ModeParams, seed: int) -> WalkState:
    want = LINF_UNIT if params.mode == LINF_TO_L2 else L2_UNIT
    if inst.norm_mode != want:
        raise ModeMismatch(f"{params.mode} needs {want} input, got {inst.norm_mode}")
    state = WalkState(inst, params, seed)
    advance_window(state)
    _update_trees(state)
    return state


def advance_window(state: WalkState) -> WalkState:
    state.dead = np.abs(state.x) > 1.0 - state.theta_dead
    alive_idx = np.flatnonzero(~state.dead)
    state.window = alive_idx[: WINDOW_FACTOR * state.d]
    # once the window has reached the last column the neutrality rows stay dropped
    if len(state.window) == 0 or state.window[-1] == state.n - 1:
        state.window_constraint = False
    return state


def _update_trees(state: WalkState) -> None:
    alive = state.alive.astype(np.float64)
    for tree in state.trees():
        tree.step = state.steps
        tree.activate(state.window)
        tree.merge_pass(alive)


def _event(state: WalkState, kind: str, detail: str) -> None:
    state.report.events.append({"step": state.steps, "kind": kind, "detail": detail})


def _masked_rows(A_W: np.ndarray, window: np.ndarray, guards: list) -> tuple:
    """Rows A_i restricted to the window and masked to each guarded prefix."""
    rows, prefix = [], []
    for g in guards:
        k = int(np.searchsorted(window, g))  # window columns with index < g
        masked = np.zeros_like(A_W)
        masked[:, :k] = A_W[:, :k]
        rows.append(masked)
        prefix.extend([k] * A_W.shape[0])
    if not rows:
        return np.zeros((0, A_W.shape[1])), np.zeros(0, dtype=np.int64)
    return np.vstack(rows), np.array(prefix, dtype=np.int64)


def _asi_guards(state: WalkState) -> list:
    p = state.params
    W = state.window
    m = len(W)
    alive = state.alive.astype(np.float64)
    budget = min(p.gamma_asi, math.floor(0.1 * p.gamma_asi * m / state.d + 1e-9))
    guards = state.asi_tree.guards(W).guards
    while len(guards) > budget:
        ev = state.asi_tree.force_merge_smallest(alive, lo_bound=int(W[0]))
        if ev is None:
            break
        _event(state, "fallback_guard_merge", f"{len(guards)} guards > budget {budget}")
        state.asi_tree.merge_pass(alive)
        guards = state.asi_tree.guards(W).guards
    if len(guards) > budget:
        # only the window end is left to drop; keep the largest prefixes
        keep = max(0, int(budget))
        _event(state, "fallback_guard_drop", f"kept {keep} of {len(guards)} guards")
        guards = guards[len(guards) - keep:] if keep else []
    return guards


def _blocking_guards(state: WalkState, budget: int) -> list:
    """Per-row blocking prefixes strictly inside the window span."""
    W = state.window
    wmax = int(W[-1])
    alive = state.alive.astype(np.float64)
    per_row = [[g for g in tree.guards(W, include_window_end=False).guards if g <= wmax]
               for tree in state.inf_trees]
    while sum(map(len, per_row)) > max(0, budget):
        i = max(range(len(per_row)), key=lambda r: (len(per_row[r]), -r))
        tree = state.inf_trees[i]
        before = len(per_row[i])
        ev = tree.force_merge_smallest(alive, lo_bound=int(W[0]))
        if ev is not None:
            tree.merge_pass(alive)
            per_row[i] = [g for g in tree.guards(W, include_window_end=False).guards if g <= wmax]
        if ev is None or len(per_row[i]) >= before:
            per_row[i] = per_row[i][1:]
            _event(state, "fallback_blocking_drop", f"row {i}")
        else:
            _event(state, "fallback_blocking_merge", f"row {i}")
    return per_row


def assemble_constraints(state: WalkState, params: ModeParams | None = None) -> sdp.SdpProblem:
    p = params or state.params
    W = state.window
    m = len(W)
    A_W = state.A[:, W]
    window_rows = A_W if state.window_constraint else np.zeros((0, m))
    guards = _asi_guards(state)
    state.last_guards = guards
    if p.use_asi:
        asi_rows, asi_prefix = _masked_rows(A_W, W, guards)
    else:
        asi_rows, asi_prefix = np.zeros((0, m)), np.zeros(0, dtype=np.int64)
    blocking = []
    cap = math.floor(0.1 * m + 1e-9)
    x_W = state.x[W]
    if cap >= 1:
        blocking.append(x_W)
    elif np.any(x_W != 0.0):
        state.clock_broken = True
    state.last_blocking = []
    if p.mode == L2_TO_L2 and state.inf_trees:
        per_row = _blocking_guards(state, cap - 1)
        state.last_blocking = per_row
        for i, gs in enumerate(per_row):
            for g in gs:
                k = int(np.searchsorted(W, g))
                vec = np.zeros(m)
                vec[:k] = A_W[i, :k]
                blocking.append(vec)
    B = np.vstack(blocking) if blocking else np.zeros((0, m))
    return sdp.build_problem(window_rows, B, asi_rows, p.gamma_asi, asi_prefix, m=m)


def abort_check(state: WalkState, params: ModeParams | None = None) -> Violation | None:
    p = params or state.params
    l2 = np.linalg.norm(state.phi, axis=0)
    k = int(np.argmax(l2))
    if l2[k] > p.tau:
        return Violation(state.steps, k + 1, "l2", float(l2[k]), p.tau)
    if p.mode == L2_TO_L2:
        linf = np.max(np.abs(state.phi), axis=0)
        k = int(np.argmax(linf))
        if linf[k] > p.lam:
            return Violation(state.steps, k + 1, "linf", float(linf[k]), p.lam)
    return None


def _solve(state: WalkState, problem: sdp.SdpProblem) -> sdp.SdpSolution:
    p = state.params
    try:
        return sdp.solve_feasibility(problem, p.resolve_tol, p.max_sdp_iter)
    except sdp.MaxIterExceeded as exc:
        _event(state, "sdp_retry", str(exc))
        if p.debug_dir:
            Path(p.debug_dir).mkdir(parents=True, exist_ok=True)
            sdp.dump_debug(Path(p.debug_dir) / f"step{state.steps:07d}.json", problem,
                           exc.solution.U, exc.solution.residual_report)
    warm = state.prev_U if state.prev_U is not None and state.prev_U.shape == (problem.m,) * 2 else None
    try:
        return sdp.solve_feasibility(problem, p.resolve_tol, p.max_sdp_iter, warm_start=warm,
                                     method="alternating")
    except sdp.MaxIterExceeded as exc:
        raise SdpFailure(f"step {state.steps}: {exc}") from exc


def step(state: WalkState, params: ModeParams | None = None) -> StepOutcome:
    p = params or state.params
    advance_window(state)
    W = state.window
    if len(W) == 0:
        return StepOutcome(state.steps, None, None, False, True)
    _update_trees(state)
    problem = assemble_constraints(state, p)
    sol = _solve(state, problem)
    state.prev_U = sol.U
    rep = sol.residual_report
    state.report.sdp_checks += 1
    state.report.sdp_passes += int(rep.passes(p.resolve_tol))
    u = sdp.sample_update(sol.U, state.rng)

    h = math.sqrt(p.dt)
    xw = state.x[W]
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(u > 0, (1.0 - xw) / u, np.where(u < 0, (-1.0 - xw) / u, np.inf))
    h_max = float(np.min(room))
    clipped = h_max < h
    if clipped:
        h = max(0.0, h_max)
        state.clipped = True
        _event(state, "clip", f"step length {h:.3e} < {math.sqrt(p.dt):.3e}")
    new = np.clip(xw + h * u, -1.0, 1.0)
    dx = new - xw
    state.x[W] = new
    lo = int(W[0])
    contrib = np.zeros((state.d, state.n - lo))
    contrib[:, W - lo] = state.A[:, W] * dx
    state.phi[:, lo:] += np.cumsum(contrib, axis=1)
    state.steps += 1
    state.t += h * h

    if state.history is not None:
        state.history.append({"window": W.copy(), "dx": dx, "guards": list(state.last_guards)})
    if state.inv is not None:
        state.inv.after_step(problem, sol, u, dx, W)

    l2 = np.linalg.norm(state.phi, axis=0)
    linf = np.max(np.abs(state.phi), axis=0)
    max_l2, max_linf = float(l2.max()), float(linf.max())
    r = state.report
    r.max_l2_over_time = max(r.max_l2_over_time, max_l2)
    r.max_linf_over_time = max(r.max_linf_over_time, max_linf)
    r.records.append({
        "step": state.steps, "t": state.t, "window_lo": int(W[0]) + 1, "window_hi": int(W[-1]) + 1,
        "n_guards": len(state.last_guards), "max_l2_prefix_disc": max_l2,
        "max_linf_prefix_disc": max_linf, "sdp_psd_residual": rep.psd_min_eig,
        "sdp_window_residual": rep.window_residual, "clip_events": int(clipped),
    })
    violation = abort_check(state, p)
    if violation is not None:
        r.n_violations += 1
        if len(r.violations) < _MAX_VIOLATION_RECORDS:
            r.violations.append(asdict(violation))
    return StepOutcome(state.steps, rep, violation, clipped, False)


def round_final(state: WalkState, strict: bool = True) -> np.ndarray:
    """Round each coordinate to its sign (ties to +1) and record the rounding delta."""
    x = state.x
    coloring = np.where(x >= 0, 1.0, -1.0)
    alive = int(np.sum(np.abs(x) <= 1.0 - state.theta_dead))
    r = state.report
    r.alive_at_end = alive
    r.converged = alive <= 0.01 * state.n
    delta = np.cumsum(state.A * (coloring - x), axis=1)
    r.rounding_delta_l2 = float(np.max(np.linalg.norm(delta, axis=0)))
    r.rounding_delta_bound = float(np.sum((1.0 - np.abs(x)) * np.max(np.abs(state.A), axis=0)))
    r.coloring = coloring
    r.x_final = x.copy()
    final = np.cumsum(state.A * coloring, axis=1)
    r.final_max_l2 = float(np.max(np.linalg.norm(final, axis=0)))
    r.final_max_linf = float(np.max(np.abs(final)))
    if strict and not r.converged:
        raise NotConverged(f"{alive} of {state.n} columns still alive")
    return coloring


def run(inst: VectorInstance, params: ModeParams, seed: int, state_out: list | None = None) -> RunReport:
    """Walk until every column is dead or the step budget runs out, then round."""
    start = time.perf_counter()
    state = init_walk(inst, params, seed)
    budget = math.ceil(inst.n / params.dt * 1.1)
    while state.steps < budget:
        try:
            out = step(state, params)
        except SdpFailure as exc:
            state.report.failed = True
            _event(state, "sdp_failure", str(exc))
            break
        if out.done:
            break
        if out.violation is not None and params.abort_policy == HALT:
            state.report.aborted = True
            break
    state.report.steps = state.steps
    round_final(state, strict=False)
    if state.inv is not None:
        state.inv.finish()
    state.report.wall_time = time.perf_counter() - start
    if state_out is not None:
        state_out.append(state)
    return state.report


def prefix_discrepancy(A: np.ndarray, coloring: np.ndarray) -> tuple:
    """(max l2, max linf) over prefixes of sum_j coloring_j A[:, j]."""
    S = np.cumsum(A * coloring, axis=1)
    return float(np.max(np.linalg.norm(S, axis=0))), float(np.max(np.abs(S)))


def audit_decomposition(state: WalkState, P: int) -> dict:
    """Split every recorded change of prefix P into its guard's part and the error columns' part."""
    if state.history is None:
        raise HistoryUnavailable("run with record_history=True")
    A = state.A
    asi, err, total = np.zeros(state.d), np.zeros(state.d), np.zeros(state.d)
    max_gap = 0.0
    err_cols: set = set()
    trace = []
    for rec in state.history:
        W, dx, guards = rec["window"], rec["dx"], rec["guards"]
        g = guard_of(_GuardList(guards), P)
        g_eff = 0 if g is FROZEN else g
        contrib = A[:, W] * dx
        d_total = contrib[:, W < P].sum(axis=1)
        d_asi = contrib[:, W < g_eff].sum(axis=1)
        sel = (W >= g_eff) & (W < P)
        d_err = contrib[:, sel].sum(axis=1)
        err_cols.update(int(j) for j in W[sel])
        max_gap = max(max_gap, float(np.max(np.abs(d_asi + d_err - d_total))))
        asi += d_asi
        err += d_err
        total += d_total
        trace.append(g)
    return {
        "guard_trace": trace,
        "phi_asi": asi,
        "phi_err": err,
        "phi": total,
        "max_split_gap": max_gap,
        "error_columns": err_cols,
    }


class _GuardList:
    def __init__(self, guards):
        self.guards = guards


class _InvariantTracker:
    """Per-step measurements behind the walk and tree invariants."""

    def __init__(self, state: WalkState):
        self.state = state
        self.max_clock_rel = 0.0
        self.window_drift = 0.0
        self.window_drift_steps = 0
        self.max_transfer = 0.0
        self.frozen_changed = False
        self.phi_consistency = 0.0
        self.small_left = 0
        self.leaf_bound_excess = -math.inf
        self.min_mean_ratio = math.inf
        self.tiling_ok = True
        self.max_guards = 0
        self.max_blocking_excess = -math.inf
        self.sdp_failures = 0
        self._frozen = (0, None)

    def after_step(self, problem, sol, u, dx, W):
        st = self.state
        p = st.params
        if not sol.residual_report.passes(p.resolve_tol):
            self.sdp_failures += 1
        if not st.clipped and not st.clock_broken:
            target = st.steps * p.dt
            gap = abs(float(st.x @ st.x) - target) / target
            self.max_clock_rel = max(self.max_clock_rel, gap)
        if st.window_constraint:
            drift = float(np.max(np.abs(st.A[:, W] @ dx)))
            self.window_drift += drift
            self.window_drift_steps += 1
            self.max_transfer = max(self.max_transfer, float(np.max(np.abs(st.A[:, W] @ u))))
        lo_prev, snap = self._frozen
        if snap is not None and lo_prev > 0 and not np.array_equal(st.phi[:, :lo_prev], snap):
            self.frozen_changed = True
        lo = int(W[0])
        self._frozen = (lo, st.phi[:, :lo].copy())
        if st.steps % 97 == 1:
            direct = np.cumsum(st.A * st.x, axis=1)
            self.phi_consistency = max(self.phi_consistency, float(np.max(np.abs(direct - st.phi))))
        alive = st.alive.astype(np.float64)
        L = log2n(st.n)
        for k, tree in enumerate(st.trees()):
            self.small_left += len(tree.small_left_leaves(alive))
            stats = tree.stats(alive, W)
            if k == 0:
                bound = 2 * len(W) * L / tree.s
                self.leaf_bound_excess = max(self.leaf_bound_excess, stats["active_leaf_count"] - bound)
            if stats["active_leaf_count"]:
                self.min_mean_ratio = min(self.min_mean_ratio, stats["mean_size"] / (tree.s / (2 * L)))
            self.tiling_ok &= _tiles(tree, W)
        self.max_guards = max(self.max_guards, len(st.last_guards))
        if st.inf_trees:
            total = sum(map(len, st.last_blocking))
            # below 10 window columns the budget 0.1|W| - 1 is negative and nothing is blocked
            self.max_blocking_excess = max(self.max_blocking_excess,
                                           total - max(0.0, 0.1 * len(W) - 1))

    def finish(self):
        st = self.state
        replay_ok = all(
            replay_active(tree.merge_log) == [(lf.node, lf.lo, lf.hi) for lf in tree.active]
            for tree in st.trees()
        )
        L = log2n(st.n)
        audited = np.unique(np.linspace(1, st.n, 32).round().astype(int))
        err_excess = -math.inf
        bad_excess = -math.inf
        for P in audited:
            e = accumulated_error_set(st.asi_tree, int(P))
            err_excess = max(err_excess, len(e) - (st.asi_tree.s / 2) * L)
            for tree in st.inf_trees:
                b = accumulated_error_set(tree, int(P))
                mass = float(sum(tree.measure.weights[j] for j in b))
                bad_excess = max(bad_excess, mass - (tree.s / 2) * L)
        st.report.invariants = {
            "max_clock_rel": self.max_clock_rel,
            "window_drift": self.window_drift,
            "window_drift_steps": self.window_drift_steps,
            "max_window_transfer": self.max_transfer,
            "frozen_changed": self.frozen_changed,
            "phi_consistency": self.phi_consistency,
            "small_left_leaves": self.small_left,
            "leaf_bound_excess": self.leaf_bound_excess,
            "min_mean_size_ratio": self.min_mean_ratio,
            "tiling_ok": bool(self.tiling_ok),
            "replay_ok": bool(replay_ok),
            "error_set_excess": err_excess,
            "bad_mass_excess": bad_excess,
            "max_guards": self.max_guards,
            "gamma_asi": st.params.gamma_asi,
            "max_blocking_excess": self.max_blocking_excess,
            "sdp_failures": self.sdp_failures,
            "audited_prefixes": len(audited),
        }


def _tiles(tree: MergeTree, W: np.ndarray) -> bool:
    """Active leaves cover [min W, max W] contiguously up to a tail that no base interval fits in."""
    leaves = tree.leaves_in_window(W)
    wmin, end = int(W[0]), int(W[-1]) + 1
    if any(a.hi != b.lo for a, b in zip(leaves, leaves[1:])):
        return False
    if leaves and leaves[0].lo > wmin:
        return False
    covered = leaves[-1].hi if leaves else (tree.active[-1].hi if tree.active else 0)
    if covered >= end:
        return True
    # the uncovered tail must lie inside a base interval that is not yet active
    b = tree.base_index(covered)
    return b >= tree.n_activated and tree.base[b][1] > end - 1


def load_config(path) -> dict:
    return json.loads(Path(path).read_text())
