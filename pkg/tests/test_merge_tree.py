import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balance.merge_tree import (
    FROZEN,
    L2SQ_MASS,
    GuardBudgetExceeded,
    GuardSet,
    MergeTree,
    SizeMeasure,
    accumulated_error_set,
    guard_of,
    replay_active,
)


def count_tree(n, s):
    return MergeTree(n, s, SizeMeasure.alive_count(n))


def alive_with(n, counts, width):
    """Alive mask keeping the first counts[b] columns of base block b."""
    alive = np.zeros(n)
    for b, c in enumerate(counts):
        alive[b * width: b * width + c] = 1.0
    return alive


def spans(tree):
    return [(leaf.lo, leaf.hi) for leaf in tree.active]


# ---------------------------------------------------------------- construction

def test_base_intervals_count():
    tree = count_tree(8, 2)
    assert tree.base == [(0, 2), (2, 4), (4, 6), (6, 8)]
    assert tree.height == 2


def test_base_intervals_padding():
    tree = count_tree(6, 4)
    assert tree.base == [(0, 4), (4, 6)]
    assert (tree.n_leaves, tree.height) == (2, 1)
    tree = count_tree(12, 4)
    assert tree.n_leaves == 4  # three blocks padded to four


def test_base_intervals_mass():
    measure = SizeMeasure(L2SQ_MASS, np.array([0.5, 0.5, 0.5, 0.5]), 0)
    tree = MergeTree(4, 1.0, measure, strict_small=False)
    assert tree.base == [(0, 2), (2, 4)]


def test_mass_single_heavy_column():
    A = np.array([[0.1, 1.0, 0.1, 0.1]])
    tree = MergeTree(4, 0.5, SizeMeasure.l2sq_mass(A, 0), strict_small=False)
    assert tree.base == [(0, 2), (2, 4)]


def test_node_spans():
    tree = count_tree(8, 2)
    assert tree.node_span(1) == (0, 8)
    assert tree.node_span(3) == (4, 8)
    assert tree.node_span(6) == (4, 6)


# ---------------------------------------------------------------- activation

def test_activate_empty_window():
    assert count_tree(8, 2).activate(np.array([], dtype=int)) == []


def test_activate_full_window():
    tree = count_tree(40, 4)
    new = tree.activate(np.arange(20))
    assert new == [(0, 4), (4, 8), (8, 12), (12, 16), (16, 20)]


def test_activate_needs_containment():
    tree = count_tree(40, 4)
    tree.activate(np.arange(22))  # columns 0..21; block (20, 24) is not contained
    assert spans(tree)[-1] == (16, 20)
    tree.activate(np.arange(2, 24))
    assert spans(tree)[-1] == (20, 24)


# ---------------------------------------------------------------- merging

def test_sibling_pair_merges_to_parent():
    tree = count_tree(16, 8)
    tree.activate(np.arange(16))
    events = tree.merge_pass(alive_with(16, [2, 2], 8))
    assert [e.kind for e in events] == ["sibling"]
    assert [leaf.node for leaf in tree.active] == [1]
    assert tree.size(tree.active[0], alive_with(16, [2, 2], 8)) == 4.0  # 4 is not < 4


def test_small_left_absorbed_by_non_sibling():
    tree = count_tree(48, 12)
    tree.activate(np.arange(48))
    alive = alive_with(48, [2, 1, 10, 12], 12)
    events = tree.merge_pass(alive)
    assert [e.kind for e in events] == ["sibling", "merge"]
    merge = events[-1]
    assert merge.absorbed == (0, 24) and merge.absorbing == (24, 36)
    assert merge.absorbed_alive == [0, 1, 12]
    assert spans(tree) == [(0, 36), (36, 48)]
    assert tree.small_left_leaves(alive) == []


def promote_scenario():
    """Eight blocks of 12; the left half collapses step by step."""
    tree = count_tree(96, 12)
    tree.activate(np.arange(96))
    first = alive_with(96, [2, 1, 12, 12, 12, 12, 12, 12], 12)
    tree.merge_pass(first)
    tree.step = 1
    second = first.copy()
    second[24:48] = 0.0
    second[24] = second[36] = 1.0
    second[0] = 0.0
    events = tree.merge_pass(second)
    return tree, events, second


def test_right_leaf_promoted_then_reevaluated():
    tree, events, alive = promote_scenario()
    assert [e.kind for e in events] == ["sibling", "promote", "merge"]
    assert events[1].node == 2  # node 5 replaced by its parent
    assert spans(tree)[0] == (0, 60)
    assert tree.small_left_leaves(alive) == []


def test_replay_matches_active():
    tree, _, _ = promote_scenario()
    assert replay_active(tree.merge_log) == [(lf.node, lf.lo, lf.hi) for lf in tree.active]


def test_last_leaf_exempt():
    tree = count_tree(24, 8)
    tree.activate(np.arange(16))
    events = tree.merge_pass(alive_with(24, [8, 1], 8))
    assert events == []


def test_force_merge():
    tree = count_tree(32, 8)
    tree.activate(np.arange(32))
    alive = np.ones(32)
    ev = tree.force_merge_smallest(alive)
    assert ev.kind == "forced" and len(tree.active) == 3


def test_export_log(tmp_path):
    tree, _, _ = promote_scenario()
    tree.export_log(tmp_path / "log.jsonl")
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    assert len(lines) == len(tree.merge_log)
    assert json.loads(lines[-1])["kind"] == "merge"


# ---------------------------------------------------------------- guards

def test_guards_two_leaves():
    tree = count_tree(16, 4)
    W = np.arange(10)
    tree.activate(W)
    assert tree.guards(W).guards == [4, 8, 10]


def test_guards_single_leaf():
    tree = count_tree(16, 8)
    W = np.arange(16)
    tree.activate(W)
    tree.merge_pass(alive_with(16, [2, 2], 8))
    assert tree.guards(W).guards == [16]
    assert tree.guards(np.arange(3, 12)).guards == [12]


def test_guards_follow_partition():
    tree = count_tree(48, 12)
    W = np.arange(48)
    tree.activate(W)
    assert 24 in tree.guards(W).guards
    tree.merge_pass(alive_with(48, [2, 1, 10, 12], 12))
    g = tree.guards(W).guards
    assert 12 not in g and 24 not in g and g == [36, 48]


def test_guard_budget():
    tree = count_tree(16, 2)
    tree.activate(np.arange(16))
    with pytest.raises(GuardBudgetExceeded) as info:
        tree.guards(np.arange(16), budget=3)
    assert len(info.value.guards) == 8


def test_guard_of():
    gs = GuardSet([8, 16, 24])
    assert guard_of(gs, 13) == 8
    assert guard_of(gs, 8) == 8
    assert guard_of(gs, 3) is FROZEN
    assert guard_of(gs, 30) == 24


# ---------------------------------------------------------------- error set

def test_error_set_guarded_prefix_empty():
    tree = count_tree(48, 12)
    tree.activate(np.arange(48))
    tree.merge_pass(alive_with(48, [2, 1, 10, 12], 12))
    assert accumulated_error_set(tree, 36) == set()
    assert accumulated_error_set(tree, 48) == set()


def test_error_set_absorbed_leaf():
    tree = count_tree(48, 12)
    tree.activate(np.arange(48))
    tree.merge_pass(alive_with(48, [2, 1, 10, 12], 12))
    # the size-3 absorbed interval plus P's own partial base interval
    assert accumulated_error_set(tree, 30) == {0, 1, 12} | set(range(24, 30))


def test_error_set_prefix_guarded_until_absorbed():
    tree = count_tree(48, 12)
    tree.activate(np.arange(48))
    tree.merge_pass(alive_with(48, [2, 1, 10, 12], 12))
    # prefix 24 was a guard until its interval was absorbed; afterwards it is interior
    assert accumulated_error_set(tree, 24) <= {0, 1, 12} | set(range(24))


def test_stats_fresh_activation():
    tree = count_tree(40, 4)
    tree.activate(np.arange(40))
    st_ = tree.stats(np.ones(40))
    assert st_["active_leaf_count"] == 10 and st_["mean_size"] == 4.0


# ---------------------------------------------------------------- properties

@st.composite
def death_schedules(draw):
    n = draw(st.integers(8, 64))
    s = draw(st.integers(2, 8))
    order = draw(st.permutations(range(n)))
    cuts = sorted(draw(st.lists(st.integers(0, n), min_size=1, max_size=6)))
    return n, s, order, cuts


def check_partition(tree):
    lo = tree.base[0][0]
    for leaf in tree.active:
        assert leaf.lo == lo and leaf.hi > leaf.lo
        lo = leaf.hi
    assert lo == tree.base[tree.n_activated - 1][1]


@settings(max_examples=80, deadline=None)
@given(death_schedules())
def test_merge_invariants(schedule):
    n, s, order, cuts = schedule
    tree = count_tree(n, s)
    alive = np.ones(n)
    prev = 0
    for t, cut in enumerate(cuts):
        alive[list(order[prev:cut])] = 0.0
        prev = max(prev, cut)
        tree.step = t
        live = np.flatnonzero(alive)
        W = live[: 3 * s]
        if len(W):
            tree.activate(W)
        tree.merge_pass(alive)
        assert tree.small_left_leaves(alive) == []
        if tree.active:
            check_partition(tree)
    assert replay_active(tree.merge_log) == [(lf.node, lf.lo, lf.hi) for lf in tree.active]
    kinds = {e.kind for e in tree.merge_log}
    assert kinds <= {"activate", "merge", "sibling", "promote"}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=60), st.floats(0.3, 3.0))
def test_mass_blocks_reach_budget(masses, s0):
    w = np.array(masses)
    tree = MergeTree(len(w), s0, SizeMeasure(L2SQ_MASS, w, 0), strict_small=False)
    for lo, hi in tree.base[:-1]:
        assert w[lo:hi].sum() >= s0
        assert w[lo:hi - 1].sum() < s0
    assert tree.base[0][0] == 0 and tree.base[-1][1] == len(w)
