"""Global interval tree over base intervals of columns.

Columns are 0-based. An interval is half-open ``[lo, hi)``; a prefix is given
by its length ``P`` (columns ``0 .. P-1``), so the right endpoint ``hi`` of an
interval is also the prefix it guards.

Nodes use heap numbering: the root is 1, the children of ``k`` are ``2k`` and
``2k + 1``, and base interval ``b`` sits at node ``n_leaves + b`` where the
leaf count is padded to a power of two with empty intervals.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

ALIVE_COUNT = "ALIVE_COUNT"
L2SQ_MASS = "L2SQ_MASS"


class GuardBudgetExceeded(RuntimeError):
    def __init__(self, message, guards):
        super().__init__(message)
        self.guards = guards


@dataclass
class SizeMeasure:
    """Size of an interval: its alive-column count, or one row's l2^2 mass over alive columns."""

    kind: str
    weights: np.ndarray
    row: int | None = None

    @classmethod
    def alive_count(cls, n: int) -> "SizeMeasure":
        return cls(ALIVE_COUNT, np.ones(n))

    @classmethod
    def l2sq_mass(cls, A: np.ndarray, row: int) -> "SizeMeasure":
        return cls(L2SQ_MASS, np.asarray(A[row], dtype=np.float64) ** 2, row)

    def evaluate(self, lo: int, hi: int, alive: np.ndarray) -> float:
        if hi <= lo:
            return 0.0
        return float(np.dot(self.weights[lo:hi], alive[lo:hi]))


@dataclass
class ActiveLeaf:
    node: int
    lo: int
    hi: int

    def contains(self, col: int) -> bool:
        return self.lo <= col < self.hi


@dataclass
class MergeEvent:
    """One structural change.

    kind is "activate", "merge" (rule i, into the next active leaf), "sibling"
    (rule i, both siblings replaced by their parent), "promote" (rule ii) or
    "forced" (guard-budget fallback). ``absorbed_alive`` lists the alive
    columns of the absorbed interval at the time of the event.
    """

    step: int
    kind: str
    node: int
    result: tuple
    absorbed: tuple | None = None
    absorbing: tuple | None = None
    absorbed_alive: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass
class GuardSet:
    guards: list  # ascending prefix lengths

    def __len__(self):
        return len(self.guards)

    def guard_of(self, P: int):
        return guard_of(self, P)


FROZEN = None


def guard_of(guards: GuardSet, P: int):
    """Largest guarded prefix <= P, or FROZEN when none precedes P.

    A FROZEN guard acts as the empty prefix: its discrepancy never changes and
    every alive window column up to P counts as an error column.
    """
    g = guards.guards
    k = int(np.searchsorted(g, P, side="right"))
    return g[k - 1] if k else FROZEN


class MergeTree:
    def __init__(self, n: int, s: float, measure: SizeMeasure, strict_small: bool = True):
        if s <= 0:
            raise ValueError("base size must be positive")
        self.n = n
        self.s = float(s)
        self.measure = measure
        self.strict_small = strict_small
        if measure.kind == ALIVE_COUNT:
            width = max(1, int(math.floor(s)))
            bounds = [(lo, min(lo + width, n)) for lo in range(0, n, width)]
        else:
            bounds = _greedy_mass_blocks(measure.weights, s)
        self.base = bounds
        self.n_base = len(bounds)
        self.n_leaves = 1 << max(0, math.ceil(math.log2(self.n_base))) if self.n_base > 1 else 1
        self.height = int(round(math.log2(self.n_leaves)))
        self.in_tree = np.ones(2 * self.n_leaves, dtype=bool)
        self.in_tree[0] = False
        self.active: list[ActiveLeaf] = []
        self.n_activated = 0
        self.merge_log: list[MergeEvent] = []
        self.step = 0
        self._base_lo = np.array([b[0] for b in bounds])

    # ------------------------------------------------------------------ structure

    def node_span(self, node: int) -> tuple:
        depth = node.bit_length() - 1
        width = 1 << (self.height - depth)
        first = (node << (self.height - depth)) - self.n_leaves
        last = first + width - 1
        lo = self.base[first][0] if first < self.n_base else self.n
        hi = self.base[min(last, self.n_base - 1)][1] if first < self.n_base else self.n
        return lo, hi

    def base_index(self, col: int) -> int:
        return int(np.searchsorted(self._base_lo, col, side="right")) - 1

    def is_left(self, node: int) -> bool:
        return node > 1 and node % 2 == 0

    def is_right(self, node: int) -> bool:
        return node > 1 and node % 2 == 1

    def is_small(self, size: float) -> bool:
        half = self.s / 2.0
        return size < half if self.strict_small else size <= half

    def size(self, leaf: ActiveLeaf, alive: np.ndarray) -> float:
        return self.measure.evaluate(leaf.lo, leaf.hi, alive)

    # ------------------------------------------------------------------ operations

    def activate(self, window: np.ndarray) -> list:
        """Activate base intervals inside [0, max W] that meet the window.

        Base intervals activate in index order; an interval skipped over by a
        jump of the window is activated together with its successor so the
        active leaves stay contiguous.
        """
        if len(window) == 0:
            return []
        wmax = int(window[-1])
        last = None
        for b in range(self.n_activated, self.n_base):
            lo, hi = self.base[b]
            if hi - 1 > wmax:
                break
            k = int(np.searchsorted(window, lo))
            if k < len(window) and window[k] < hi:
                last = b
        if last is None:
            return []
        new = []
        for b in range(self.n_activated, last + 1):
            lo, hi = self.base[b]
            leaf = ActiveLeaf(self.n_leaves + b, lo, hi)
            self.active.append(leaf)
            self.merge_log.append(MergeEvent(self.step, "activate", leaf.node, (lo, hi)))
            new.append((lo, hi))
        self.n_activated = last + 1
        return new

    def _alive_cols(self, lo: int, hi: int, alive: np.ndarray) -> list:
        return [int(j) for j in np.flatnonzero(alive[lo:hi]) + lo]

    def _absorb_next(self, idx: int, alive: np.ndarray) -> MergeEvent:
        v, w = self.active[idx], self.active[idx + 1]
        self.in_tree[v.node] = False
        absorbed = (v.lo, v.hi)
        absorbing = (w.lo, w.hi)
        cols = self._alive_cols(v.lo, v.hi, alive)
        if w.node == v.node + 1 and self.is_left(v.node):
            self.in_tree[w.node] = False
            parent = ActiveLeaf(v.node // 2, v.lo, w.hi)
            self.active[idx:idx + 2] = [parent]
            kind, node = "sibling", parent.node
        else:
            w.lo = v.lo
            del self.active[idx]
            kind, node = "merge", w.node
        ev = MergeEvent(self.step, kind, node, (v.lo, w.hi), absorbed, absorbing, cols)
        self.merge_log.append(ev)
        return ev

    def _promote(self, idx: int) -> MergeEvent:
        v = self.active[idx]
        self.in_tree[v.node] = False
        parent = ActiveLeaf(v.node // 2, v.lo, v.hi)
        self.active[idx] = parent
        ev = MergeEvent(self.step, "promote", parent.node, (v.lo, v.hi), (v.lo, v.hi), None, [])
        self.merge_log.append(ev)
        return ev

    def merge_pass(self, alive: np.ndarray) -> list:
        """Apply the merging rule left to right until nothing changes."""
        events = []
        while True:
            changed = False
            last = len(self.active) - 1
            for idx, leaf in enumerate(self.active):
                if not self.is_small(self.size(leaf, alive)):
                    continue
                if self.is_left(leaf.node) and idx < last:
                    events.append(self._absorb_next(idx, alive))
                    changed = True
                    break
                if self.is_right(leaf.node) and not self.in_tree[leaf.node - 1]:
                    events.append(self._promote(idx))
                    changed = True
                    break
            if not changed:
                return events

    def force_merge_smallest(self, alive: np.ndarray, lo_bound: int = 0) -> MergeEvent | None:
        """Fallback: fold the adjacent pair with the smallest combined size (left into right)."""
        best = None
        for idx in range(len(self.active) - 1):
            a, b = self.active[idx], self.active[idx + 1]
            if a.hi <= lo_bound:
                continue
            total = self.size(a, alive) + self.size(b, alive)
            if best is None or total < best[0]:
                best = (total, idx)
        if best is None:
            return None
        idx = best[1]
        v, w = self.active[idx], self.active[idx + 1]
        self.in_tree[v.node] = False
        cols = self._alive_cols(v.lo, v.hi, alive)
        ev = MergeEvent(self.step, "forced", w.node, (v.lo, w.hi), (v.lo, v.hi), (w.lo, w.hi), cols)
        w.lo = v.lo
        del self.active[idx]
        self.merge_log.append(ev)
        return ev

    def guards(self, window: np.ndarray, include_window_end: bool = True,
               budget: float | None = None) -> GuardSet:
        """Right endpoints of active leaves inside [W], plus max W + 1 when requested."""
        if len(window) == 0:
            return GuardSet([])
        wmin, wmax = int(window[0]), int(window[-1])
        g = {leaf.hi for leaf in self.active if leaf.hi > wmin and leaf.hi <= wmax + 1}
        if include_window_end:
            g.add(wmax + 1)
        gs = GuardSet(sorted(g))
        if budget is not None and len(gs) > budget:
            raise GuardBudgetExceeded(f"{len(gs)} guards exceed budget {budget}", gs)
        return gs

    def leaves_in_window(self, window: np.ndarray) -> list:
        if len(window) == 0:
            return []
        wmin, wmax = int(window[0]), int(window[-1])
        return [leaf for leaf in self.active if leaf.hi > wmin and leaf.lo <= wmax]

    def stats(self, alive: np.ndarray, window: np.ndarray | None = None,
              skip_exempt: bool = True) -> dict:
        """Leaf count and sizes; a small last active leaf is left out when skip_exempt."""
        leaves = self.active if window is None else self.leaves_in_window(window)
        sizes = [self.size(leaf, alive) for leaf in leaves]
        if (skip_exempt and leaves and self.active and leaves[-1] is self.active[-1]
                and self.is_small(sizes[-1])):
            sizes = sizes[:-1]
        if not sizes:
            return {"active_leaf_count": 0, "mean_size": 0.0, "min_size": 0.0}
        return {
            "active_leaf_count": len(sizes),
            "mean_size": float(np.mean(sizes)),
            "min_size": float(np.min(sizes)),
        }

    def small_left_leaves(self, alive: np.ndarray) -> list:
        """Small left leaves other than the last active leaf (empty after a pass)."""
        return [leaf for leaf in self.active[:-1]
                if self.is_left(leaf.node) and self.is_small(self.size(leaf, alive))]

    def export_log(self, path) -> None:
        Path(path).write_text("".join(ev.to_json() + "\n" for ev in self.merge_log))


def _greedy_mass_blocks(weights: np.ndarray, s0: float) -> list:
    bounds = []
    lo = 0
    acc = 0.0
    n = len(weights)
    for j in range(n):
        acc += weights[j]
        if acc >= s0:
            bounds.append((lo, j + 1))
            lo = j + 1
            acc = 0.0
    if lo < n:
        bounds.append((lo, n))
    return bounds


def replay_active(merge_log: list) -> list:
    """Rebuild the ordered active leaves (node, lo, hi) from a merge log."""
    active: list[list] = []

    def find(lo, hi):
        for k, (_, a, b) in enumerate(active):
            if a == lo and b == hi:
                return k
        raise ValueError(f"log refers to unknown interval [{lo}, {hi})")

    for ev in merge_log:
        if ev.kind == "activate":
            active.append([ev.node, ev.result[0], ev.result[1]])
        elif ev.kind == "promote":
            k = find(*ev.absorbed)
            active[k] = [ev.node, ev.result[0], ev.result[1]]
        else:
            k = find(*ev.absorbed)
            active[k:k + 2] = [[ev.node, ev.result[0], ev.result[1]]]
    return [tuple(x) for x in active]


def accumulated_error_set(tree: MergeTree, P: int) -> set:
    """Columns that can have been error columns for prefix P, by replaying the merge log.

    While P is the right endpoint of its interval it is guarded and collects
    nothing; columns that enter its interval meanwhile are held back and join
    the error set once P becomes interior. Afterwards every interval absorbed
    into P's interval contributes its alive columns at absorption time.
    """
    col = P - 1
    errors: set = set()
    pending: set = set()
    interior = False
    for ev in tree.merge_log:
        lo, hi = ev.result
        if not lo <= col < hi:
            continue
        if ev.kind == "activate":
            pending = set(range(lo, P))
        elif ev.absorbing is not None and ev.absorbing[0] <= col < ev.absorbing[1]:
            (errors if interior else pending).update(ev.absorbed_alive)
        if not interior and P < hi:
            interior = True
            errors |= pending
            pending = set()
    return errors
