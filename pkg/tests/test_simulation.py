#!/usr/bin/env python3
"""
Tests for network simulation, dataset files, spectra and informativity
"""
import sys
import os
import json
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np

from tools.errors import InputError, NumericalError
from tools.network import parse_network
from tools.selection import select_full_input
from tools.simulation import (Dataset, ExcitationConfig, SignalConfig, analytic_spectrum, check_informativity,
                              estimate_spectrum, simulate)
from tools.transfer import uniform_grid

NETWORKS = os.path.join(os.path.dirname(__file__), '..', 'networks')


def load(name):
    with open(os.path.join(NETWORKS, f"{name}.json")) as fh:
        return parse_network(fh.read())


def excited_leak2():
    with open(os.path.join(NETWORKS, "leak2.json")) as fh:
        doc = json.load(fh)
    doc["K"] = 1
    doc["excitation"] = {"R": [{"from": 1, "to": 1, "num": [1.0]}], "signals": [{"kind": "white"}]}
    return parse_network(json.dumps(doc))


def test_same_seed_same_data():
    net = load("network8")
    a = simulate(net, 500, seed=11)
    b = simulate(net, 500, seed=11)
    c = simulate(net, 500, seed=12)
    assert np.array_equal(a.w, b.w)
    assert not np.array_equal(a.w, c.w)
    assert a.N == 500 and a.L == 8


def test_node_equation_residual_is_white_noise():
    net = load("leak2")
    data = simulate(net, 20000, seed=3)
    w1, w2 = data.w
    # w_1 = e_1 and w_2 = G_21 w_1 + H_21 e_1 + e_2
    e2 = w2 - net.G[1, 0].filter(w1) - net.H[1, 0].filter(w1)
    e2 = e2[100:]
    assert abs(np.var(w1) - 1.0) < 0.05
    assert abs(np.var(e2) - 1.0) < 0.05
    assert abs(np.corrcoef(e2, w1[100:])[0, 1]) < 0.05


def test_excitation_superposes_on_noise():
    net = excited_leak2()
    data = simulate(net, 2000, seed=5)
    quiet = simulate(net, 2000, seed=5, exc=ExcitationConfig.zero(1))
    diff = data.w - quiet.w
    r = data.r[0]
    assert np.max(np.abs(diff[0] - r)) < 1e-9
    # G_21 = 0.8 q^-1 / (1 - 0.5 q^-1)
    lhs = diff[1][1:] - 0.5 * diff[1][:-1]
    assert np.max(np.abs(lhs - 0.8 * r[:-1])) < 1e-9
    assert np.allclose(quiet.r, 0.0)


def test_unstable_network_cannot_be_simulated():
    doc = {"L": 2, "modules": [{"from": 1, "to": 2, "num": [0.0, 1.0]},
                               {"from": 2, "to": 1, "num": [0.0, 1.5]}]}
    try:
        simulate(parse_network(json.dumps(doc)), 100)
        assert False, "expected NumericalError"
    except NumericalError as e:
        assert "unstable" in str(e)


def test_excitation_count_must_match():
    try:
        simulate(excited_leak2(), 100, exc=ExcitationConfig.zero(2))
        assert False, "expected InputError"
    except InputError:
        pass


def test_signal_config_validation():
    try:
        SignalConfig(kind="multisine", frequencies=(4.0,))
        assert False, "expected InputError"
    except InputError:
        pass
    sig = SignalConfig.from_dict({"kind": "filtered-white", "num": [1.0], "den": [1.0, -0.5]})
    assert sig.filter.is_stable()


def test_dataset_save_and_load():
    data = simulate(excited_leak2(), 300, seed=9)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "data.npz")
        data.save(path)
        again = Dataset.load(path)
    assert np.array_equal(again.w, data.w)
    assert np.array_equal(again.r, data.r)
    assert again.seed == 9
    assert again.meta["generator"] == "philox"
    assert again.meta["N"] == 300


def test_loading_garbage_is_input_error():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "bad.npz")
        with open(path, "w") as fh:
            fh.write("not a dataset")
        try:
            Dataset.load(path)
            assert False, "expected InputError"
        except InputError as e:
            assert e.exit_code == 2


def test_dataset_node_selection():
    data = simulate(load("inputs4"), 100, seed=1)
    assert data.nodes([1, 3]).shape == (2, 100)
    try:
        data.nodes([5])
        assert False, "expected InputError"
    except InputError:
        pass


def test_welch_spectrum_close_to_analytic():
    net = load("leak2")
    data = simulate(net, 60000, seed=21)
    grid = uniform_grid(33)[1:-1]
    est = estimate_spectrum(data, [1, 2], grid)
    exact = analytic_spectrum(net, grid)
    for n in range(2):
        rel = np.abs(est.values[:, n, n].real - exact[:, n, n].real) / exact[:, n, n].real
        assert np.mean(rel) < 0.2, (n, np.mean(rel))


def test_welch_needs_enough_samples():
    data = simulate(load("leak2"), 1000, seed=2)
    try:
        estimate_spectrum(data, [1, 2])
        assert False, "expected NumericalError"
    except NumericalError as e:
        assert "too-short" in str(e)


def test_informativity_requires_excitation_for_shared_input_noise():
    # w_1 is its own innovation, so [w_D; xi_Q; w_o] is rank deficient without r
    net = load("leak2")
    sel = select_full_input(net, i=1, j=2)
    assert not check_informativity(net, sel, mode="model").passed
    excited = excited_leak2()
    report = check_informativity(excited, select_full_input(excited, i=1, j=2), mode="model")
    assert report.passed
    assert report.details["fraction_passing"] == 1.0


def test_informativity_from_data():
    net = excited_leak2()
    sel = select_full_input(net, i=1, j=2)
    data = simulate(net, 20000, seed=4)
    report = check_informativity(net, sel, mode="data", data=data)
    assert report.passed
    assert report.details["mode"] == "data"


def test_informativity_data_mode_needs_dataset():
    net = load("leak2")
    try:
        check_informativity(net, select_full_input(net, i=1, j=2), mode="data")
        assert False, "expected InputError"
    except InputError:
        pass


if __name__ == "__main__":
    print("=" * 60)
    print("SIMULATION TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
