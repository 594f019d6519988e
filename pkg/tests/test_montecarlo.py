#!/usr/bin/env python3
"""
Tests for the Monte-Carlo bias harness
"""
import sys
import os
import csv
import json
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np

from config import EstimatorConfig, MonteCarloConfig
from tools.errors import InputError
from tools.estimation import MisoSetup, Orders
from tools.graph import Selection
from tools.montecarlo import (coefficient_names, consistency_trend, montecarlo_bias, setup_model_set,
                              truth_vector, write_replica_csv)
from tools.network import parse_network
from tools.selection import select_full_input

NETWORKS = os.path.join(os.path.dirname(__file__), '..', 'networks')


def load(name):
    with open(os.path.join(NETWORKS, f"{name}.json")) as fh:
        return parse_network(fh.read())


def quick(replicas=3, N=2000, **kwargs):
    return MonteCarloConfig(replicas=replicas, N=N, burn_in=200, estimator=EstimatorConfig(starts=1), **kwargs)


def test_truth_vector_and_names():
    net = load("leak2")
    sel = select_full_input(net, i=1, j=2)
    ms = setup_model_set(net, sel, Orders())
    assert np.allclose(truth_vector(net, ms, 2, 1), [0.8, -0.5])
    assert coefficient_names(ms, 2, 1) == ["b1", "f1"]
    wide = setup_model_set(net, sel, Orders(2, 2, 1, 1))
    assert np.allclose(truth_vector(net, wide, 2, 1), [0.8, 0.0, -0.5, 0.0])
    assert coefficient_names(wide, 2, 1) == ["b1", "b2", "f1", "f2"]


def test_two_output_setup_is_unbiased():
    net = load("leak2")
    report = montecarlo_bias(net, select_full_input(net, i=1, j=2), quick(replicas=12, N=3000))
    doc = report.to_dict()
    assert doc["completed"] == 12
    assert report.seeds == list(range(12))
    assert [c["name"] for c in doc["coefficients"]] == ["b1", "f1"]
    assert report.max_abs_z <= 3.0
    assert report.fraction_outside == 0.0
    assert all(c.median_abs_error < 0.1 for c in report.coefficients)


def test_single_output_setup_is_biased():
    # the input noise reaches the output, so the naive setup estimates G_21 + H_21
    net = load("leak2")
    naive = Selection.from_sets(2, j=2, i=1, Y={2}, D={1})
    report = montecarlo_bias(net, naive, quick(replicas=4, N=4000))
    assert report.fraction_outside > 0.0
    assert abs(report.coefficients[0].mean - 0.8) > 0.2


def test_miso_setup_describes_inputs():
    net = load("loop6")
    setup = MisoSetup(j=2, i=1, inputs=(1, 4))
    report = montecarlo_bias(net, setup, quick(replicas=3, seed=10))
    assert report.setup == {"kind": "miso", "j": 2, "i": 1, "inputs": [1, 4]}
    assert report.seeds == [10, 11, 12]
    assert report.target == (2, 1)


def test_two_replicas_warn_about_degrees_of_freedom():
    net = load("leak2")
    report = montecarlo_bias(net, select_full_input(net, i=1, j=2), quick(replicas=2))
    assert any("1 degree of freedom" in w for w in report.warnings)
    assert len(report.coefficients) == 2


def test_single_replica_rejected():
    try:
        MonteCarloConfig(replicas=1)
        assert False, "expected InputError"
    except InputError:
        pass


def test_threads_give_same_estimates():
    net = load("leak2")
    sel = select_full_input(net, i=1, j=2)
    serial = montecarlo_bias(net, sel, quick(replicas=3))
    threaded = montecarlo_bias(net, sel, quick(replicas=3, threads=3))
    assert np.allclose(serial.estimates, threaded.estimates)


def test_consistency_trend_shrinks():
    net = load("leak2")
    sel = select_full_input(net, i=1, j=2)
    trend = consistency_trend(net, sel, [1000, 16000], quick(replicas=3))
    assert [row["N"] for row in trend] == [1000, 16000]
    assert trend[1]["median_error"] < trend[0]["median_error"]


def test_replica_csv():
    net = load("leak2")
    report = montecarlo_bias(net, select_full_input(net, i=1, j=2), quick(replicas=2))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "replicas.csv")
        write_replica_csv(report, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    assert rows[0] == ["seed", "b1", "f1"]
    assert [row[0] for row in rows[1:]] == ["0", "1"]
    assert json.dumps(report.to_dict())


if __name__ == "__main__":
    print("=" * 60)
    print("MONTE-CARLO TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
