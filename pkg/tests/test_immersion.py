#!/usr/bin/env python3
"""
Tests for immersion, spectral factorization and the canonical transformed
network
"""
import sys
import os
import json

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np

from tools.errors import InfeasibleSelectionError, NumericalError
from tools.graph import Selection, check_invariance_conditions
from tools.immersion import (delay_pattern_of, gbar_oracle, immerse, predicted_delay_pattern, second_order_check,
                             spectral_factorize, transform_network, unconfounded_noise_check, verify_invariance)
from tools.network import parse_network, validate_network
from tools.selection import select_full_input, select_minimum_input
from tools.transfer import RationalTransfer, TransferMatrix, uniform_grid

NETWORKS = os.path.join(os.path.dirname(__file__), '..', 'networks')
GRID = uniform_grid(128)


def load(name):
    with open(os.path.join(NETWORKS, f"{name}.json")) as fh:
        return parse_network(fh.read())


def inputs4_selection():
    return Selection.from_sets(4, j=1, i=2, Y={1}, D={2, 3, 4}, A={2}, B={3, 4})


def response(tf):
    values, flags = tf.frequency_response(GRID)
    assert not np.any(flags)
    return values


def max_gap(a, b):
    return float(np.max(np.abs(response(a) - response(b))))


def test_immerse_keeps_selected_nodes():
    net = load("network8")
    sel = select_full_input(net, i=2, j=1)
    imm = immerse(net, sel)
    assert imm.retained == [2, 1, 3, 4, 5, 8]
    assert imm.noise_labels == [2, 1, 3, 4, 5, 8, 6, 7]
    assert imm.G.shape == (6, 6) and imm.H.shape == (6, 8)


def test_immersion_folds_unmeasured_path_into_module():
    net = load("network8")
    sel = Selection.from_sets(8, j=1, i=2, Y={1}, D={2})
    imm = immerse(net, sel)
    # w_3 and w_4 are eliminated: G_12 + G_13 G_32 + G_14 G_43 G_32
    G = net.G
    expected = G[0, 1] + G[0, 2] * G[2, 1] + G[0, 3] * G[3, 2] * G[2, 1]
    assert max_gap(imm.G[imm.index(1), imm.index(2)], expected) < 1e-9


def test_spectral_factor_of_non_minimum_phase_scalar():
    H = TransferMatrix([[RationalTransfer([1.0, 2.0])]])
    Ht, Lt = spectral_factorize(H, np.eye(1))
    assert abs(Lt[0, 0] - 4.0) < 1e-8
    assert max_gap(Ht[0, 0], RationalTransfer([1.0, 0.5])) < 1e-8


def test_spectral_factor_reproduces_spectrum():
    net = load("network8")
    Ht, Lt = spectral_factorize(net.H, net.Lambda)
    assert Ht.is_monic() and Ht.is_stable() and Ht.is_minimum_phase()
    a = net.H.freqresp(GRID)
    b = Ht.freqresp(GRID)
    for k in range(GRID.size):
        lhs = a[k] @ net.Lambda @ a[k].conj().T
        rhs = b[k] @ Lt @ b[k].conj().T
        assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_singular_spectrum_rejected():
    H = TransferMatrix([[RationalTransfer([1.0, 1.0])]])
    try:
        spectral_factorize(H, np.eye(1))
        assert False, "expected NumericalError"
    except NumericalError as e:
        assert "singular" in str(e)


def test_inputs4_transformed_modules():
    net = load("inputs4")
    tn = transform_network(net, inputs4_selection())
    G, H = net.G, net.H
    assert max_gap(tn.entry(1, 2), G[0, 1]) < 1e-8
    assert max_gap(tn.entry(1, 3), G[0, 2] - H[0, 3] * H[3, 2]) < 1e-8
    assert max_gap(tn.entry(1, 4), G[0, 3] + H[0, 3]) < 1e-8
    assert tn.H.is_monic() and tn.H.is_minimum_phase()
    assert tn.uncorrelated_inputs() == [2, 3, 4]


def test_oracle_matches_transform():
    net = load("inputs4")
    sel = inputs4_selection()
    tn = transform_network(net, sel)
    assert max_gap(gbar_oracle(immerse(net, sel), sel), tn.entry(1, 2)) < 1e-8


def test_single_output_setup_breaks_invariance():
    net = load("leak2")
    sel = Selection.from_sets(2, j=2, i=1, Y={2}, D={1})
    report = verify_invariance(net, sel)
    assert not report.passed
    assert report.deviation >= 1e-2
    tn = transform_network(net, sel)
    assert max_gap(tn.entry(2, 1), net.G[1, 0] + net.H[1, 0]) < 1e-8


def test_two_output_setup_keeps_module_invariant():
    net = load("leak2")
    sel = select_full_input(net, i=1, j=2)
    report = verify_invariance(net, sel)
    assert report.passed, report.deviation
    assert report.to_dict()["conditions"]["passed"]


def test_invariance_on_network8_selections():
    net = load("network8")
    for sel in (select_full_input(net, i=2, j=1), select_minimum_input(net, i=2, j=1)):
        report = verify_invariance(net, sel)
        assert report.passed, (sel.to_dict(), report.deviation)


def test_second_order_properties_preserved():
    net = load("network8")
    sel = select_full_input(net, i=2, j=1)
    tn = transform_network(net, sel)
    assert second_order_check(net, sel, tn) < 1e-6
    naive = Selection.from_sets(2, j=2, i=1, Y={2}, D={1})
    leak2 = load("leak2")
    assert second_order_check(leak2, naive, transform_network(leak2, naive)) < 1e-6


def test_transform_stages_recorded():
    net = load("network8")
    tn = transform_network(net, select_full_input(net, i=2, j=1))
    names = [stage["stage"] for stage in tn.stages]
    assert names[:4] == ["noise-decoupling", "o-elimination", "q-hollowing", "y-factorization"]
    assert tn.y_labels == [2, 1]
    assert tn.d_labels == [2, 3, 4, 5, 8]
    doc = tn.to_dict()
    assert doc["y_order"] == [2, 1]


def test_unconfounded_blocks_have_orthogonal_noise():
    checks = unconfounded_noise_check(load("inputs4"), inputs4_selection())
    assert set(checks) == {"A->Y", "A->B"}
    assert all(value < 1e-9 for value in checks.values())


def test_delay_pattern_matches_graph_prediction():
    net = load("inputs4")
    sel = inputs4_selection()
    tn = transform_network(net, sel)
    predicted = predicted_delay_pattern(net, sel)
    assert predicted == {(1, 2): True, (1, 3): True, (1, 4): True}
    assert delay_pattern_of(tn) == predicted


def test_oracle_matches_transform_when_module_changes():
    # the input disturbance leaks into the output: both computations give G_21 + H_21
    net = load("leak2")
    sel = Selection.from_sets(2, j=2, i=1, Y={2}, D={1})
    oracle = gbar_oracle(immerse(net, sel), sel)
    transformed = transform_network(net, sel).entry(2, 1)
    assert max_gap(oracle, transformed) < 1e-8
    assert max_gap(oracle, net.G[1, 0]) > 0.5
    assert max_gap(oracle, net.G[1, 0] + net.H[1, 0]) < 1e-8


def random_module(rng):
    """Strictly proper entry, numerator order 1 or 2, denominator order at most 2."""
    nb = int(rng.integers(1, 3))
    num = [0.0] + [float(v) for v in rng.choice([-1.0, 1.0], nb) * rng.uniform(0.1, 0.4, nb)]
    poles = rng.uniform(-0.5, 0.5, int(rng.integers(0, 3)))
    den = [float(v) for v in np.poly(poles)] if poles.size else [1.0]
    return num, den


def random_network(rng, L):
    modules, noise = [], []
    for frm in range(1, L + 1):
        for to in range(1, L + 1):
            if frm == to:
                continue
            if rng.random() < 0.3:
                num, den = random_module(rng)
                modules.append({"from": frm, "to": to, "num": num, "den": den})
            if rng.random() < 0.12:
                c = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 0.5))
                noise.append({"from": frm, "to": to, "num": [0.0, c], "den": [1.0]})
    doc = {"L": L, "modules": modules, "noise": {"H": noise}}
    return parse_network(json.dumps(doc))


def random_networks_with_selections(seed, count):
    """Valid random networks with a target module and a feasible full-input selection."""
    rng = np.random.default_rng(seed)
    found = []
    for _ in range(400):
        net = random_network(rng, int(rng.integers(3, 7)))
        edges = net.edges()
        if not edges or not validate_network(net).valid:
            continue
        i, j = edges[int(rng.integers(len(edges)))]
        try:
            sel = select_full_input(net, i=i, j=j)
        except InfeasibleSelectionError:
            continue
        found.append((net, sel))
        if len(found) == count:
            break
    assert len(found) == count, f"only {len(found)} random networks generated"
    return found


def test_random_networks_keep_module_invariant():
    for net, sel in random_networks_with_selections(seed=2024, count=6):
        assert check_invariance_conditions(net, sel).passed
        report = verify_invariance(net, sel)
        assert report.deviation <= 1e-6, (net.edges(), sel.to_dict(), report.deviation)


if __name__ == "__main__":
    print("=" * 60)
    print("IMMERSION AND TRANSFORM TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
