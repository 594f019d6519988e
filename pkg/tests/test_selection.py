#!/usr/bin/env python3
"""
Tests for predictor input / output selection strategies
"""
import sys
import os
import json
import itertools

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import tools.selection as selection_module
from tools.errors import InfeasibleSelectionError, InputError
from tools.graph import check_blocking_property, check_invariance_conditions, check_parallel_path_loop
from tools.network import parse_network
from tools.selection import (AccessibilitySpec, minimal_blocking_set, select_full_input, select_minimum_input,
                             select_user)

NETWORKS = os.path.join(os.path.dirname(__file__), '..', 'networks')


def load(name):
    with open(os.path.join(NETWORKS, f"{name}.json")) as fh:
        return parse_network(fh.read())


def test_full_input_on_network8():
    sel = select_full_input(load("network8"), i=2, j=1)
    assert sel.Y == {1, 2}
    assert sel.D == {2, 3, 4, 5, 8}
    assert sel.Q == {2}
    assert sel.A == {3, 4, 5}
    assert sel.B == {8}
    assert sel.o == 1
    assert any("moved to Y and Q" in line for line in sel.trace)


def test_minimum_input_on_network8():
    sel = select_minimum_input(load("network8"), i=2, j=1)
    assert sel.D == {2, 3}
    assert sel.Y == {1, 2}
    assert sel.A == {3}
    assert sel.B == frozenset()


def test_user_selection_on_network8():
    spec = AccessibilitySpec(accessible=frozenset({1, 2, 3, 6}), i=2, j=1)
    sel = select_user(load("network8"), spec)
    assert sel.D == {2, 3, 6}
    assert sel.Y == {1, 2}
    assert sel.B == {6}
    assert sel.A == {3}


def test_every_strategy_satisfies_invariance_conditions():
    for name, i, j in (("loop6", 1, 2), ("leak2", 1, 2), ("confounded3", 2, 1), ("inputs4", 2, 1), ("network8", 2, 1)):
        net = load(name)
        for sel in (select_full_input(net, i=i, j=j), select_minimum_input(net, i=i, j=j)):
            assert check_invariance_conditions(net, sel).passed, (name, sel.to_dict())


def test_minimum_input_never_larger_than_full_input():
    net = load("network8")
    assert len(select_minimum_input(net, i=2, j=1).D) <= len(select_full_input(net, i=2, j=1).D)


def test_minimal_blocking_set():
    assert minimal_blocking_set(load("network8"), i=2, j=1) == {2, 3}
    blocking = minimal_blocking_set(load("loop6"), i=1, j=2)
    assert len(blocking) == 2 and 1 in blocking


def test_correlated_output_disturbance_moves_input_to_outputs():
    sel = select_full_input(load("leak2"), i=1, j=2)
    assert sel.Y == {1, 2}
    assert sel.Q == {1}


def test_absent_target_module_rejected():
    try:
        select_full_input(load("network8"), i=1, j=2)
        assert False, "expected InputError"
    except InputError as e:
        assert "absent" in str(e)


def test_target_nodes_must_be_accessible():
    try:
        AccessibilitySpec(accessible=frozenset({1, 3}), i=2, j=1)
        assert False, "expected InputError"
    except InputError:
        pass


def test_user_selection_infeasible_without_blocking_node():
    spec = AccessibilitySpec(accessible=frozenset({1, 2}), i=2, j=1)
    try:
        select_user(load("network8"), spec)
        assert False, "expected InfeasibleSelectionError"
    except InfeasibleSelectionError as e:
        assert e.exit_code == 1


def test_selections_with_b_satisfy_blocking_property():
    net = load("network8")
    full = select_full_input(net, i=2, j=1)
    user = select_user(net, AccessibilitySpec(accessible=frozenset({1, 2, 3, 6}), i=2, j=1))
    for sel in (full, user):
        assert sel.B
        assert check_blocking_property(net, sel).passed, sel.to_dict()


FIXTURES = ("leak2", "confounded3", "inputs4", "loop6", "loop6_correlated", "network8")


def test_no_smaller_set_satisfies_parallel_path_and_loop_condition():
    for name in FIXTURES:
        net = load(name)
        for i, j in net.edges():
            D = minimal_blocking_set(net, i=i, j=j)
            assert check_parallel_path_loop(net, i, j, D).passed
            others = sorted(set(range(1, net.L + 1)) - {i, j})
            for size in range(len(D) - 1):
                for extra in itertools.combinations(others, size):
                    assert not check_parallel_path_loop(net, i, j, {i, *extra}).passed, (name, i, j, extra)


def test_minimum_input_d_has_no_passing_strict_subset():
    net = load("network8")
    sel = select_minimum_input(net, i=2, j=1)
    rest = sorted(sel.D - {2})
    for size in range(len(rest)):
        for extra in itertools.combinations(rest, size):
            assert not check_parallel_path_loop(net, 2, 1, {2, *extra}).passed


def test_cut_search_matches_exact_search():
    exact = {}
    for name in FIXTURES:
        net = load(name)
        for i, j in net.edges():
            exact[(name, i, j)] = minimal_blocking_set(net, i=i, j=j)
    saved = selection_module.EXACT_SEARCH_LIMIT
    selection_module.EXACT_SEARCH_LIMIT = 0
    try:
        for (name, i, j), expected in exact.items():
            assert minimal_blocking_set(load(name), i=i, j=j) == expected, (name, i, j)
    finally:
        selection_module.EXACT_SEARCH_LIMIT = saved


def test_cut_search_breaks_ties_by_label_order():
    # two disjoint parallel paths 2 -> 6 -> 5 -> 1 and 2 -> 4 -> 3 -> 1: four minimum sets
    doc = {"L": 6, "modules": [{"from": 2, "to": 1, "num": [0.0, 0.5]},
                               {"from": 2, "to": 6, "num": [0.0, 0.5]},
                               {"from": 6, "to": 5, "num": [0.0, 0.5]},
                               {"from": 5, "to": 1, "num": [0.0, 0.5]},
                               {"from": 2, "to": 4, "num": [0.0, 0.5]},
                               {"from": 4, "to": 3, "num": [0.0, 0.5]},
                               {"from": 3, "to": 1, "num": [0.0, 0.5]}]}
    net = parse_network(json.dumps(doc))
    saved = selection_module.EXACT_SEARCH_LIMIT
    selection_module.EXACT_SEARCH_LIMIT = 0
    try:
        assert minimal_blocking_set(net, i=2, j=1) == {2, 3, 5}
    finally:
        selection_module.EXACT_SEARCH_LIMIT = saved
    assert minimal_blocking_set(net, i=2, j=1) == {2, 3, 5}


if __name__ == "__main__":
    print("=" * 60)
    print("SELECTION TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
