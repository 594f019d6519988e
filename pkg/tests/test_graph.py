#!/usr/bin/env python3
"""
Tests for graph queries: paths, confounding variables and the selection
conditions
"""
import sys
import os
import json

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np

from tools.errors import InputError
from tools.graph import (Selection, build_graph, check_blocking_property, check_decomposition, check_delay_conditions,
                         check_invariance_conditions, check_parallel_path_loop, exists_path, find_confounders)
from tools.network import parse_network
from tools.transfer import FEEDTHROUGH_TOL

NETWORKS = os.path.join(os.path.dirname(__file__), '..', 'networks')


def load(name):
    with open(os.path.join(NETWORKS, f"{name}.json")) as fh:
        return parse_network(fh.read())


def inputs4_selection(A, B):
    return Selection.from_sets(4, j=1, i=2, Y={1}, D={2, 3, 4}, A=A, B=B)


def test_graph_edges_from_network():
    g = build_graph(load("confounded3"))
    assert g.w_edges() == {(2, 1), (3, 1)}
    assert (2, 1) in g.e_edges() and (3, 2) in g.e_edges()
    assert (1, 1) in g.e_edges()
    # every module is strictly proper; only the diagonal of H is delay-free
    assert g.delay_free_w_edges() == set()
    assert g.delay_free_e_edges() == {(1, 1), (2, 2), (3, 3)}


def test_path_through_unmeasured_nodes():
    g = build_graph(load("network8"))
    res = exists_path(g, 8, 5, {6, 7, 8}, from_noise=True)
    assert res
    assert res.witness == (8, 7, 5)
    assert not exists_path(g, 8, 5, {6}, from_noise=True)


def test_path_label_out_of_range():
    g = build_graph(load("confounded3"))
    try:
        exists_path(g, 1, 9, set())
        assert False, "expected InputError"
    except InputError:
        pass


def test_direct_and_indirect_confounders():
    report = find_confounders(load("confounded3"), X={2}, Yset={1}, Z={3})
    assert report.kinds() == {2: "direct", 3: "indirect"}
    indirect = [c for c in report.confounders if c.source == 3][0]
    assert indirect.output_path == (3, 1)
    assert indirect.to_dict()["source"] == "e3"


def test_confounder_blocked_when_node_measured():
    report = find_confounders(load("confounded3"), X={2}, Yset={1}, Z=set())
    assert report.sources() == [2]


def test_confounder_through_correlated_channel():
    report = find_confounders(load("network8"), X={5}, Yset={1}, Z={6, 7, 8})
    assert report.kinds() == {8: "indirect"}


def test_empty_sets_have_no_confounders():
    assert not find_confounders(load("confounded3"), X=set(), Yset={1}, Z={3})


def test_parallel_path_reported_with_witness():
    report = check_parallel_path_loop(load("network8"), i=2, j=1, D={2})
    assert not report.passed
    item = report.items[0]
    assert item.name == "parallel_paths_blocked"
    assert [2, 3, 1] in item.witness


def test_parallel_path_blocked_by_measured_node():
    assert check_parallel_path_loop(load("network8"), i=2, j=1, D={2, 3}).passed


def test_loop_through_output_must_be_blocked():
    net = load("loop6")
    report = check_parallel_path_loop(net, i=1, j=2, D={1})
    assert report.failures() == ["parallel_paths_blocked", "loops_blocked"]
    loops = [item for item in report.items if item.name == "loops_blocked"][0]
    assert [2, 3, 4, 2] in loops.witness
    assert check_parallel_path_loop(net, i=1, j=2, D={1, 3}).passed


def test_decomposition_passes_for_split_inputs():
    report = check_decomposition(load("inputs4"), inputs4_selection(A={2}, B={3, 4}))
    assert report.passed


def test_decomposition_fails_when_confounded_input_in_a():
    report = check_decomposition(load("inputs4"), inputs4_selection(A={2, 3}, B={4}))
    assert report.failures() == ["no_confounders_A_to_B"]
    witness = [item for item in report.items if item.name == "no_confounders_A_to_B"][0].witness
    assert witness[0]["source"] == "e3"


def test_invariance_conditions_for_inputs4_selection():
    report = check_invariance_conditions(load("inputs4"), inputs4_selection(A={2}, B={3, 4}))
    assert report.passed
    names = [item.name for item in report.items]
    assert "input_in_A_or_Q" in names and "no_unmeasured_path_to_B" in names


def test_input_in_b_fails_invariance():
    sel = inputs4_selection(A={3}, B={2, 4})
    report = check_invariance_conditions(load("inputs4"), sel)
    assert "input_in_A_or_Q" in report.failures()


def test_selection_sets_are_derived():
    sel = Selection.from_sets(8, j=1, i=2, Y={1, 2}, D={2, 3, 4, 5, 8}, B={8})
    assert sel.Q == {2} and sel.U == {3, 4, 5, 8}
    assert sel.A == {3, 4, 5}
    assert sel.Z == {6, 7}
    assert sel.o == 1
    assert sel.y_order == [2, 1]
    assert sel.d_order == [2, 3, 4, 5, 8]
    again = Selection.from_dict(sel.to_dict(), 8)
    assert again == sel


def test_selection_rejects_inconsistent_sets():
    for kwargs in ({"Y": {2}, "D": {2, 3}},
                   {"Y": {1}, "D": {3}},
                   {"Y": {1, 4}, "D": {2, 3}},
                   {"Y": {1}, "D": {2, 3}, "A": {2}, "B": {2, 3}}):
        try:
            Selection.from_sets(4, j=1, i=2, **kwargs)
            assert False, f"expected InputError for {kwargs}"
        except InputError:
            pass


def test_selection_document_missing_key():
    try:
        Selection.from_dict({"j": 1, "i": 2, "Y": [1]}, 4)
        assert False, "expected InputError"
    except InputError as e:
        assert "missing key" in str(e)


def test_delay_conditions_hold_for_strictly_proper_network():
    sel = inputs4_selection(A={2}, B={3, 4})
    pattern = {(1, d): True for d in (2, 3, 4)}
    assert check_delay_conditions(load("inputs4"), sel, pattern).passed


def test_delay_free_loop_violates_delay_conditions():
    doc = {"L": 3, "modules": [{"from": 1, "to": 2, "num": [0.0, 0.5]},
                               {"from": 3, "to": 2, "num": [0.4]},
                               {"from": 2, "to": 3, "num": [0.3]}]}
    net = parse_network(json.dumps(doc))
    sel = Selection.from_sets(3, j=2, i=1, Y={2}, D={1, 3})
    report = check_delay_conditions(net, sel, {(2, 1): True, (2, 3): False})
    assert report.failures() == ["paths_to_Y_delayed_in_network", "A_node_3_delayed"]
    item = report.items[0]
    assert [2, 3, 2] in item.witness


def test_delay_pattern_outside_selection_rejected():
    sel = inputs4_selection(A={2}, B={3, 4})
    try:
        check_delay_conditions(load("inputs4"), sel, {(2, 1): True})
        assert False, "expected InputError"
    except InputError:
        pass


def test_blocking_property_of_full_input_selection():
    net = load("network8")
    sel = Selection.from_sets(8, j=1, i=2, Y={1, 2}, D={2, 3, 4, 5, 8}, B={8})
    report = check_blocking_property(net, sel)
    assert report.passed
    assert [item.name for item in report.items] == [
        "confounder_paths_to_A_blocked", "no_confounders_A_to_B", "no_unmeasured_path_to_B"]


def test_blocking_property_rejects_b_reached_from_input():
    # w_7 is fed directly by w_2
    sel = Selection.from_sets(8, j=1, i=2, Y={1, 2}, D={2, 3, 4, 5, 7}, B={7})
    report = check_blocking_property(load("network8"), sel)
    assert "no_unmeasured_path_to_B" in report.failures()
    witness = [item for item in report.items if item.name == "no_unmeasured_path_to_B"][0].witness
    assert [2, 7] in witness


def test_blocking_property_rejects_confounded_b():
    report = check_blocking_property(load("inputs4"), inputs4_selection(A={2, 3}, B={4}))
    assert report.failures() == ["no_confounders_A_to_B"]


def simple_paths(succ, s, t, interior):
    """Every simple path s -> t with at least one edge and intermediate nodes in interior."""
    def walk(path):
        for nxt in sorted(succ.get(path[-1], ())):
            if nxt == t:
                yield path + [nxt]
            elif nxt in interior and nxt not in path:
                yield from walk(path + [nxt])
    return walk([s])


def expected_delay_failures(net, sel, pattern):
    network = {}
    for frm, to in net.edges():
        if abs(net.G[to - 1, frm - 1].feedthrough()) > FEEDTHROUGH_TOL:
            network.setdefault(frm, set()).add(to)
    model = {}
    for (y, d), strictly_proper in pattern.items():
        if not strictly_proper:
            model.setdefault(d, set()).add(y)
    everything = set(range(1, net.L + 1))
    measured = set(sel.Y | sel.D)
    starts = sel.Y | sel.B

    def delay_free(succ, s, t, interior):
        return any(True for _ in simple_paths(succ, s, t, interior))

    failures = []
    if any(delay_free(network, s, t, everything) for s in starts for t in sel.Y):
        failures.append("paths_to_Y_delayed_in_network")
    if any(delay_free(model, s, t, measured) for s in starts for t in sel.Y):
        failures.append("paths_to_Y_delayed_in_model")
    for k in sorted(sel.A):
        inbound = any(delay_free(network, s, k, everything) for s in starts if s != k)
        outbound = any(delay_free(model, k, t, measured) for t in sel.Y)
        if inbound and outbound:
            failures.append(f"A_node_{k}_delayed")
    return failures


def random_delay_case(rng):
    L = int(rng.integers(3, 7))
    modules = []
    for frm in range(1, L + 1):
        for to in range(1, L + 1):
            if frm != to and rng.random() < 0.35:
                num = [0.2] if rng.random() < 0.4 else [0.0, 0.2]
                modules.append({"from": frm, "to": to, "num": num})
    net = parse_network(json.dumps({"L": L, "modules": modules}))
    j, i = (int(v) for v in rng.choice(np.arange(1, L + 1), 2, replace=False))
    others = [k for k in range(1, L + 1) if k not in (i, j)]
    D = {i} | {k for k in others if rng.random() < 0.5}
    Y = {j} | {k for k in D if rng.random() < 0.3}
    U = sorted(D - Y - {i})
    B = {k for k in U if rng.random() < 0.4}
    sel = Selection.from_sets(L, j=j, i=i, Y=Y, D=D, B=B)
    pattern = {(y, d): bool(rng.random() < 0.6) for y in sorted(Y) for d in sorted(D) if y != d}
    return net, sel, pattern


def test_delay_conditions_agree_with_path_enumeration():
    rng = np.random.default_rng(31)
    failing = 0
    for _ in range(60):
        net, sel, pattern = random_delay_case(rng)
        report = check_delay_conditions(net, sel, pattern)
        expected = expected_delay_failures(net, sel, pattern)
        assert report.failures() == expected, (net.edges(), sel.to_dict(), pattern)
        failing += bool(expected)
    assert 0 < failing < 60


def test_delay_conditions_agree_with_path_enumeration_on_fixtures():
    net = load("loop6")
    for D in ({1, 3}, {1, 3, 4}, {1, 4, 5}):
        sel = Selection.from_sets(6, j=2, i=1, Y={2}, D=D)
        for proper in (True, False):
            pattern = {(2, d): proper for d in D}
            report = check_delay_conditions(net, sel, pattern)
            assert report.failures() == expected_delay_failures(net, sel, pattern)
    doc = {"L": 3, "modules": [{"from": 1, "to": 2, "num": [0.0, 0.5]},
                               {"from": 3, "to": 2, "num": [0.4]},
                               {"from": 2, "to": 3, "num": [0.3]}]}
    net = parse_network(json.dumps(doc))
    sel = Selection.from_sets(3, j=2, i=1, Y={2}, D={1, 3})
    pattern = {(2, 1): True, (2, 3): False}
    assert check_delay_conditions(net, sel, pattern).failures() == expected_delay_failures(net, sel, pattern)


if __name__ == "__main__":
    print("=" * 60)
    print("GRAPH CONDITION TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
