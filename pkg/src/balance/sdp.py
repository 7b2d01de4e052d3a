"""Per-step feasibility SDP: assembly, solvers, residual checker and update sampling.

The constraint family for a window of m coordinates is

    U_jj <= 1                                  (diag cap)
    Tr U >= 0.1 m                              (trace floor)
    <U, a a^T> = 0   for every window row a    (window neutrality)
    <U, w w^T> = 0   for every w in H          (blocking)
    U <= 10 diag(U)                            (spectral independence)
    E U E^T <= gamma diag(E U E^T)             (affine spectral independence)
    U >= 0

Any solver is acceptable; :func:`check_solution` is the single source of truth.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

SI_FACTOR = 10.0
TRACE_FRACTION = 0.1
DIAG_CAP = 1.0
BLOCKING_FRACTION = 0.1
GS_DROP_TOL = 1e-10

# a coordinate whose projector diagonal is below this is frozen for the step;
# keeping every live diagonal >= 1/SI_FACTOR makes the SI constraint hold exactly
_FREEZE_THRESHOLD = (1.0 / SI_FACTOR) * (1.0 + 1e-9)


class BudgetExceeded(ValueError):
    pass


class MaskingViolation(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NumericalBreakdown(RuntimeError):
    pass


class ZeroTrace(ValueError):
    pass


class MaxIterExceeded(RuntimeError):
    def __init__(self, message, solution):
        super().__init__(message)
        self.solution = solution


@dataclass
class SdpProblem:
    m: int
    window_rows: np.ndarray
    blocking_basis: np.ndarray  # orthonormal rows
    asi_rows: np.ndarray
    asi_prefix: np.ndarray  # guarded prefix length (in window coordinates) of each asi row
    gamma_asi: float
    si_factor: float = SI_FACTOR

    @property
    def trace_floor(self) -> float:
        return TRACE_FRACTION * self.m

    @property
    def diag_cap(self) -> float:
        return DIAG_CAP

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "window_rows": self.window_rows.tolist(),
            "blocking_basis": self.blocking_basis.tolist(),
            "asi_rows": self.asi_rows.tolist(),
            "asi_prefix": self.asi_prefix.tolist(),
            "gamma_asi": self.gamma_asi,
            "si_factor": self.si_factor,
        }


@dataclass
class ConstraintReport:
    diag_excess: float
    trace_deficit: float
    window_residual: float
    blocking_residual: float
    si_min_eig: float
    asi_min_eig: float
    psd_min_eig: float
    trace: float
    m: int

    def failures(self, tol: float) -> list[str]:
        bad = []
        if self.diag_excess > tol:
            bad.append("diag")
        if self.trace_deficit > tol * self.m:
            bad.append("trace")
        if self.window_residual > tol:
            bad.append("window")
        if self.blocking_residual > tol:
            bad.append("blocking")
        if self.si_min_eig < -tol:
            bad.append("si")
        if self.asi_min_eig < -tol * max(1.0, self.trace):
            bad.append("asi")
        if self.psd_min_eig < -tol:
            bad.append("psd")
        return bad

    def passes(self, tol: float) -> bool:
        return not self.failures(tol)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SdpSolution:
    U: np.ndarray
    solve_iterations: int
    residual_report: ConstraintReport
    method: str = "freeze"
    frozen: int = 0
    asi_blocked: int = 0
    notes: list = field(default_factory=list)


def _as_rows(vectors, m=None) -> np.ndarray:
    if vectors is None:
        return np.zeros((0, m if m is not None else 0))
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, m if m is not None else (arr.shape[-1] if arr.ndim == 2 else 0)))
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def orthonormalize(vectors: np.ndarray, drop_tol: float = GS_DROP_TOL) -> np.ndarray:
    """Modified Gram-Schmidt; vectors whose residual falls under drop_tol are dropped."""
    basis: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=np.float64)
        scale = max(1.0, float(np.linalg.norm(w)))
        for _ in range(2):  # second sweep repairs cancellation
            for b in basis:
                w -= (b @ w) * b
        nrm = float(np.linalg.norm(w))
        if nrm > drop_tol * scale:
            basis.append(w / nrm)
    if not basis:
        return np.zeros((0, vectors.shape[1] if np.ndim(vectors) == 2 else 0))
    return np.vstack(basis)


def build_problem(window_rows, blocking_basis, asi_rows, gamma_asi: float,
                  asi_prefix=None, m: int | None = None, si_factor: float = SI_FACTOR) -> SdpProblem:
    """Assemble and validate one step's constraint family.

    ``asi_prefix[k]`` is the number of leading window coordinates covered by the
    guarded prefix of ``asi_rows[k]``; entries past it must be exactly zero.
    """
    lengths = {np.shape(_as_rows(v))[1] for v in (window_rows, blocking_basis, asi_rows)
               if v is not None and np.size(v)}
    if m is None:
        if len(lengths) != 1:
            raise DimensionMismatch(f"cannot infer a common length from {lengths}")
        m = lengths.pop()
    elif lengths - {m}:
        raise DimensionMismatch(f"vector lengths {lengths} differ from m={m}")
    W = _as_rows(window_rows, m)
    B = orthonormalize(_as_rows(blocking_basis, m)).reshape(-1, m)
    E = _as_rows(asi_rows, m)
    if B.shape[0] > BLOCKING_FRACTION * m + 1e-9:
        raise BudgetExceeded(f"blocking dimension {B.shape[0]} > {BLOCKING_FRACTION} * {m}")
    if E.shape[0] > 0.1 * gamma_asi * m + 1e-9:
        raise BudgetExceeded(f"{E.shape[0]} ASI rows > 0.1 * {gamma_asi:.4g} * {m}")
    if asi_prefix is None:
        prefix = np.full(E.shape[0], m, dtype=np.int64)
    else:
        prefix = np.asarray(asi_prefix, dtype=np.int64).reshape(-1)
        if prefix.shape[0] != E.shape[0]:
            raise DimensionMismatch("asi_prefix must give one length per ASI row")
        cols = np.arange(m)
        for k in range(E.shape[0]):
            if np.any(E[k, cols >= prefix[k]] != 0.0):
                raise MaskingViolation(f"ASI row {k} is nonzero past its prefix {prefix[k]}")
    return SdpProblem(m=m, window_rows=W, blocking_basis=B, asi_rows=E, asi_prefix=prefix,
                      gamma_asi=float(gamma_asi), si_factor=si_factor)


def _min_eig(M: np.ndarray) -> float:
    if M.shape[0] == 0:
        return 0.0
    M = 0.5 * (M + M.T)
    try:
        return float(scipy.linalg.eigh(M, eigvals_only=True, subset_by_index=[0, 0])[0])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalBreakdown(str(exc)) from exc


def check_solution(problem: SdpProblem, U, tol: float = 1e-6,
                   si_factor: float | None = None) -> ConstraintReport:
    U = np.asarray(U, dtype=np.float64)
    m = problem.m
    if U.shape != (m, m):
        raise DimensionMismatch(f"U has shape {U.shape}, expected {(m, m)}")
    U = 0.5 * (U + U.T)
    c = problem.si_factor if si_factor is None else si_factor
    diag = np.diag(U)
    trace = float(diag.sum())
    W, B, E = problem.window_rows, problem.blocking_basis, problem.asi_rows
    window_res = float(np.max(np.abs(np.einsum("ij,jk,ik->i", W, U, W)))) if W.shape[0] else 0.0
    block_res = float(np.max(np.einsum("ij,jk,ik->i", B, U, B))) if B.shape[0] else 0.0
    if E.shape[0]:
        M = E @ U @ E.T
        asi = _min_eig(problem.gamma_asi * np.diag(np.diag(M)) - M)
    else:
        asi = 0.0
    return ConstraintReport(
        diag_excess=float(np.max(diag - DIAG_CAP)) if m else 0.0,
        trace_deficit=max(0.0, problem.trace_floor - trace),
        window_residual=window_res,
        blocking_residual=block_res,
        si_min_eig=_min_eig(c * np.diag(diag) - U),
        asi_min_eig=asi,
        psd_min_eig=_min_eig(U),
        trace=trace,
        m=m,
    )


def _null_basis(C: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal basis (k x r) of the orthogonal complement of C's row space in R^k."""
    if C.shape[0] == 0:
        return np.eye(k)
    try:
        _, s, Vt = np.linalg.svd(C, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(str(exc)) from exc
    rank = int(np.sum(s > GS_DROP_TOL * max(1.0, s[0]))) if s.size else 0
    return Vt[rank:].T


def _solve_freeze(problem: SdpProblem, max_rounds: int = 200):
    """Projector onto the constraint complement, shrunk until SI and ASI hold.

    Coordinates with small projector diagonal are frozen (u_j = 0), which makes
    the SI constraint exact; if the ASI constraint is violated, the offending
    top eigen-directions of the normalized guard covariance are blocked.
    Returns (U, rounds, frozen_count, asi_blocked) or None when the trace floor
    would be lost.
    """
    m = problem.m
    live = np.ones(m, dtype=bool)
    C0 = np.vstack([problem.window_rows, problem.blocking_basis])
    extra: list[np.ndarray] = []
    E = problem.asi_rows
    gamma = problem.gamma_asi
    # PSD M of size r always satisfies M <= r diag(M)
    asi_needed = E.shape[0] > gamma
    for rounds in range(1, max_rounds + 1):
        C = np.vstack([C0] + extra) if extra else C0
        N = _null_basis(C[:, live], int(live.sum()))
        if N.shape[1] < problem.trace_floor:
            return None
        dg = np.einsum("ij,ij->i", N, N)
        low = dg < _FREEZE_THRESHOLD
        if low.any():
            idx = np.flatnonzero(live)
            live[idx[low]] = False
            continue
        if asi_needed:
            F = E[:, live] @ N
            D = np.einsum("ij,ij->i", F, F)
            nz = D > 1e-14 * max(1.0, float(D.max(initial=0.0)))
            if nz.sum() > gamma:
                G = F[nz] / np.sqrt(D[nz])[:, None]
                evals, evecs = np.linalg.eigh(G.T @ G)
                if evals[-1] > gamma * (1.0 - 1e-6):
                    top = evecs[:, evals > 0.5 * gamma]
                    dirs = np.zeros((top.shape[1], m))
                    dirs[:, live] = (N @ top).T
                    extra.append(dirs)
                    continue
        U = np.zeros((m, m))
        sub = N @ N.T
        U[np.ix_(live, live)] = 0.5 * (sub + sub.T)
        blocked = sum(e.shape[0] for e in extra)
        return U, rounds, int((~live).sum()), blocked
    return None


def _psd_part(M: np.ndarray) -> np.ndarray:
    w, Q = np.linalg.eigh(0.5 * (M + M.T))
    w = np.clip(w, 0.0, None)
    return (Q * w) @ Q.T


def _solve_alternating(problem: SdpProblem, U0: np.ndarray, tol: float, max_iter: int):
    """Alternating projection/retraction cycle over the constraint sets."""
    m = problem.m
    c = problem.si_factor
    C = np.vstack([problem.window_rows, problem.blocking_basis])
    N = _null_basis(C, m)
    Pi = N @ N.T
    U = U0.copy()
    report = None
    for it in range(1, max_iter + 1):
        U = _psd_part(Pi @ U @ Pi)
        dg = np.minimum(np.diag(U), DIAG_CAP)
        np.fill_diagonal(U, dg)
        tr = np.trace(U)
        if tr < problem.trace_floor:
            U += (problem.trace_floor - tr) / m * np.eye(m)
        # SI via the invertible map U -> c diag(U) - U
        M = c * np.diag(np.diag(U)) - U
        M = _psd_part(M)
        Md = np.diag(M).copy()
        U = -M
        np.fill_diagonal(U, Md / (c - 1.0))
        # finish each cycle on the subspace so window/blocking stay exact
        U = Pi @ U @ Pi
        report = check_solution(problem, U, tol)
        if report.passes(tol):
            return U, it, report
    return U, max_iter, report


def solve_feasibility(problem: SdpProblem, tol: float = 1e-6, max_iter: int = 5000,
                      warm_start=None, method: str = "auto") -> SdpSolution:
    """Find U passing :func:`check_solution` at ``tol``.

    ``method`` is "freeze" (constructive projector), "alternating" (projection
    cycle, optionally warm-started) or "auto" (freeze, then alternating from
    its output if it fails).
    """
    m = problem.m
    if m == 0:
        raise ZeroTrace("empty window")
    notes = []
    if method in ("auto", "freeze"):
        built = _solve_freeze(problem)
        if built is not None:
            U, rounds, frozen, blocked = built
            report = check_solution(problem, U, tol)
            if report.passes(tol):
                return SdpSolution(U, rounds, report, "freeze", frozen, blocked)
            notes.append(f"freeze failed: {report.failures(tol)}")
            start = U
        else:
            notes.append("freeze lost the trace floor")
            start = None
        if method == "freeze":
            U = start if start is not None else np.eye(m)
            sol = SdpSolution(U, 0, check_solution(problem, U, tol), "freeze", notes=notes)
            raise MaxIterExceeded("constructive solver failed", sol)
    else:
        start = None
    if start is None:
        start = np.asarray(warm_start, dtype=np.float64) if warm_start is not None else np.eye(m)
    U, iters, report = _solve_alternating(problem, start, tol, max_iter)
    sol = SdpSolution(U, iters, report, "alternating", notes=notes)
    if not report.passes(tol):
        raise MaxIterExceeded(f"no feasible U after {iters} cycles: {report.failures(tol)}", sol)
    return sol


def sample_update(U, rng: np.random.Generator) -> np.ndarray:
    """u = Q Lambda^{1/2} r / sqrt(Tr) with r Rademacher; Cov(u) = U / Tr U."""
    U = np.asarray(U, dtype=np.float64)
    try:
        lam, Q = np.linalg.eigh(0.5 * (U + U.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(str(exc)) from exc
    top = lam[-1] if lam.size else 0.0
    if top <= 0.0:
        raise ZeroTrace("U has no positive eigenvalue")
    lam = np.where(lam < 1e-9 * top, 0.0, lam)
    r = rng.integers(0, 2, size=lam.shape[0]) * 2.0 - 1.0
    return (Q @ (np.sqrt(lam) * r)) / np.sqrt(lam.sum())


def dump_debug(path, problem: SdpProblem, U, report: ConstraintReport | None) -> None:
    payload = {
        "problem": problem.to_dict(),
        "U": np.asarray(U).tolist(),
        "report": report.to_dict() if report is not None else None,
    }
    Path(path).write_text(json.dumps(payload))
