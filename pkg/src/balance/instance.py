"""Input vectors: validation, JSON I/O and synthetic generators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

L2_UNIT = "L2_UNIT"
LINF_UNIT = "LINF_UNIT"
NORM_MODES = (L2_UNIT, LINF_UNIT)

NORM_TOL = 1e-12
ZERO_SUM_TOL = 1e-9


class ParseError(ValueError):
    pass


class NormViolation(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NotPowerOfTwo(ValueError):
    pass


def column_norms(A: np.ndarray, norm_mode: str) -> np.ndarray:
    if norm_mode == L2_UNIT:
        return np.linalg.norm(A, axis=0)
    return np.max(np.abs(A), axis=0)


@dataclass(frozen=True)
class VectorInstance:
    """A d x n matrix whose columns are the vectors to balance.

    The matrix is copied and made read-only on construction, so one instance
    can be shared between trials.
    """

    A: np.ndarray
    norm_mode: str = L2_UNIT
    zero_sum: bool = False
    d: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        if A.ndim != 2:
            raise DimensionMismatch(f"expected a 2-d matrix, got shape {A.shape}")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise DimensionMismatch(f"need d, n >= 1, got shape {A.shape}")
        if self.norm_mode not in NORM_MODES:
            raise ParseError(f"unknown norm_mode {self.norm_mode!r}")
        if not np.all(np.isfinite(A)):
            raise ParseError("matrix contains non-finite entries")
        norms = column_norms(A, self.norm_mode)
        bad = np.flatnonzero(norms > 1.0 + NORM_TOL)
        if bad.size:
            j = int(bad[0])
            raise NormViolation(
                f"column {j} has {self.norm_mode} norm {norms[j]!r} > 1"
            )
        if self.zero_sum:
            total = np.linalg.norm(A.sum(axis=1))
            if total > ZERO_SUM_TOL * A.shape[1]:
                raise NormViolation(f"zero_sum declared but |sum| = {total:.3e}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "d", A.shape[0])
        object.__setattr__(self, "n", A.shape[1])

    @property
    def columns(self) -> np.ndarray:
        """Columns as an (n, d) array."""
        return self.A.T

    def sum_norm(self) -> float:
        return float(np.linalg.norm(self.A.sum(axis=1)))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "norm_mode": self.norm_mode,
            "zero_sum": bool(self.zero_sum),
            "columns": self.A.T.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VectorInstance":
        try:
            d = int(data["d"])
            n = int(data["n"])
            norm_mode = data["norm_mode"]
            zero_sum = bool(data.get("zero_sum", False))
            columns = data["columns"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed instance: {exc}") from exc
        if not isinstance(columns, list) or len(columns) != n:
            raise DimensionMismatch(f"expected {n} columns, got {len(columns)}")
        for j, col in enumerate(columns):
            if not isinstance(col, list) or len(col) != d:
                raise DimensionMismatch(f"column {j} does not have length {d}")
        try:
            A = np.array(columns, dtype=np.float64).T.reshape(d, n)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"non-numeric column data: {exc}") from exc
        return cls(A, norm_mode=norm_mode, zero_sum=zero_sum)


def load_instance(path) -> VectorInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    return VectorInstance.from_dict(data)


def save_instance(inst: VectorInstance, path) -> None:
    # json writes floats with repr, so the matrix round-trips bitwise
    Path(path).write_text(json.dumps(inst.to_dict()))


def generate_random(n: int, d: int, norm_mode: str = L2_UNIT, seed: int = 0) -> VectorInstance:
    """Random columns: uniform on the unit sphere (L2_UNIT) or i.i.d. U[-1, 1] (LINF_UNIT)."""
    if n < 1 or d < 1:
        raise DimensionMismatch("n and d must be positive")
    rng = np.random.default_rng(seed)
    if norm_mode == L2_UNIT:
        G = rng.standard_normal((d, n))
        norms = np.linalg.norm(G, axis=0)
        # a zero Gaussian column has probability zero, but keep the division safe
        norms[norms == 0] = 1.0
        A = G / norms
    elif norm_mode == LINF_UNIT:
        A = rng.uniform(-1.0, 1.0, size=(d, n))
    else:
        raise ParseError(f"unknown norm_mode {norm_mode!r}")
    return VectorInstance(A, norm_mode=norm_mode)


def generate_hadamard_like(d: int) -> VectorInstance:
    if d < 1 or d & (d - 1):
        raise NotPowerOfTwo(f"d={d} is not a power of two")
    return VectorInstance(scipy.linalg.hadamard(d).astype(np.float64), norm_mode=LINF_UNIT)


def balance_to_zero_sum(inst: VectorInstance) -> VectorInstance:
    """Append the fewest norm-feasible columns that cancel the total sum."""
    total = inst.A.sum(axis=1)
    if np.linalg.norm(total) <= ZERO_SUM_TOL * inst.n:
        if inst.zero_sum:
            return inst
        return VectorInstance(inst.A, norm_mode=inst.norm_mode, zero_sum=True)
    size = float(column_norms(total[:, None], inst.norm_mode)[0])
    k = max(1, math.ceil(size - NORM_TOL))
    piece = -total / k
    A = np.hstack([inst.A, np.repeat(piece[:, None], k, axis=1)])
    # the appended pieces cancel the sum only up to rounding; absorb the residue
    A[:, -1] -= A.sum(axis=1)
    return VectorInstance(A, norm_mode=inst.norm_mode, zero_sum=True)


def generate_zero_sum(n: int, d: int, seed: int = 0) -> VectorInstance:
    """n centred Gaussian columns scaled so the longest has unit l2 norm."""
    if n < 2 or d < 1:
        raise DimensionMismatch("a zero-sum instance needs n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, n))
    G -= G.mean(axis=1, keepdims=True)
    G /= np.linalg.norm(G, axis=0).max()
    # the residue is a rounding error, far inside the norm tolerance
    G[:, -1] -= G.sum(axis=1)
    return VectorInstance(G, norm_mode=L2_UNIT, zero_sum=True)
