"""Steinitz orderings for zero-sum vector sequences from a signed-series coloring engine.

Each level colors the current order with the walk and rebuilds the order as
the +1 elements in their current order followed by the -1 elements in
reverse. With total sum zero, every prefix of the new order equals half the
sum of an old prefix plus or minus the signed prefix at the same position,
so the maximal prefix norm ``M`` obeys ``M_next <= (M + D) / 2`` where ``D``
is the level's prefix discrepancy. After ``ceil(log2 n)`` levels the
starting value ``M <= n`` has been driven below ``max D + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import L2_UNIT, ZERO_SUM_TOL, VectorInstance
from .walk import L2_TO_L2, ModeParams, SdpFailure, prefix_discrepancy, run


class NotZeroSum(ValueError):
    pass


class InvalidPermutation(ValueError):
    pass


@dataclass
class OrderingResult:
    permutation: np.ndarray
    max_prefix_norm: float
    recursion_depth: int
    level_discrepancies: list = field(default_factory=list)
    level_prefix_norms: list = field(default_factory=list)

    @property
    def postcondition_bound(self) -> float:
        worst = max(self.level_discrepancies, default=0.0)
        return self.recursion_depth * worst + 2.0

    def to_dict(self) -> dict:
        return {
            "permutation": [int(i) for i in self.permutation],
            "max_prefix_norm": self.max_prefix_norm,
            "recursion_depth": self.recursion_depth,
            "level_discrepancies": list(self.level_discrepancies),
            "level_prefix_norms": list(self.level_prefix_norms),
        }


def verify_ordering(inst: VectorInstance, pi) -> float:
    """Largest l2 norm of a partial sum along ``pi``, by direct summation."""
    pi = np.asarray(pi)
    if pi.ndim != 1 or len(pi) != inst.n or not np.issubdtype(pi.dtype, np.integer):
        raise InvalidPermutation(f"expected {inst.n} integer indices")
    if not np.array_equal(np.sort(pi), np.arange(inst.n)):
        raise InvalidPermutation("indices do not form a permutation of range(n)")
    partial = np.cumsum(inst.A[:, pi], axis=1)
    return float(np.max(np.linalg.norm(partial, axis=0)))


def _split(order: np.ndarray, coloring: np.ndarray) -> np.ndarray:
    plus = order[coloring > 0]
    minus = order[coloring < 0]
    return np.concatenate([plus, minus[::-1]])


def steinitz_order(inst: VectorInstance, params: ModeParams | None = None, seed: int = 0,
                   depth: int | None = None) -> OrderingResult:
    if not inst.zero_sum or inst.sum_norm() > ZERO_SUM_TOL * inst.n:
        raise NotZeroSum(f"inputs must sum to zero (|sum| = {inst.sum_norm():.3e})")
    if inst.norm_mode != L2_UNIT:
        raise NotZeroSum("Steinitz orderings are built for L2_UNIT inputs")
    n = inst.n
    if params is None:
        params = ModeParams.default(L2_TO_L2, n, inst.d)
    if depth is None:
        depth = max(1, math.ceil(math.log2(n))) if n > 1 else 0

    order = np.arange(n)
    best = order
    best_norm = verify_ordering(inst, order)
    discs, norms = [], []
    seeds = np.random.SeedSequence(seed).generate_state(max(depth, 1))
    for level in range(depth):
        sub = VectorInstance(inst.A[:, order], norm_mode=L2_UNIT)
        report = run(sub, params, int(seeds[level]))
        if report.failed:
            raise SdpFailure(f"walk failed at level {level}")
        coloring = np.where(report.coloring >= 0, 1.0, -1.0)
        discs.append(prefix_discrepancy(sub.A, coloring)[0])
        order = _split(order, coloring)
        norms.append(verify_ordering(inst, order))
        if norms[-1] < best_norm:
            best, best_norm = order, norms[-1]

    return OrderingResult(best, verify_ordering(inst, best), depth, discs, norms)
