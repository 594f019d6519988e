#!/usr/bin/env python3
"""
End-to-end tests of the command line: exit codes, report files, datasets
"""
import sys
import os
import json
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from main import main
from tools.graph import Selection

NETWORKS = os.path.join(os.path.dirname(__file__), '..', 'networks')


def network(name):
    return os.path.join(NETWORKS, f"{name}.json")


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


def test_validate_passes_on_fixture():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "report.json")
        assert main(["validate", network("network8"), "--output", out]) == 0
        report = read_report(out)
    assert report["command"] == "validate"
    assert report["exit_code"] == 0
    assert len(report["input_sha256"]) == 64
    assert report["result"]["validation"]["valid"]


def test_select_writes_selection():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "select.json")
        assert main(["select", network("network8"), "--target", "1", "2", "--output", out]) == 0
        report = read_report(out)
    sel = report["result"]["selection"]
    assert sorted(sel["Y"]) == [1, 2]
    assert sorted(sel["D"]) == [2, 3, 4, 5, 8]
    assert report["result"]["mode"] == "full"


def test_malformed_document_is_input_error():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "bad.json")
        with open(path, "w") as fh:
            fh.write("{\"L\": 2, \"modules\": [")
        out = os.path.join(tmp, "report.json")
        assert main(["validate", path, "--output", out]) == 2
        report = read_report(out)
    assert report["error"].startswith("Load Error")
    assert report["result"] is None


def test_missing_network_file():
    assert main(["validate", os.path.join(NETWORKS, "absent.json")]) == 2


def test_check_fails_for_single_output_setup():
    naive = Selection.from_sets(2, j=2, i=1, Y={2}, D={1})
    with tempfile.TemporaryDirectory() as tmp:
        sel_path = os.path.join(tmp, "naive.json")
        with open(sel_path, "w") as fh:
            json.dump(naive.to_dict(), fh)
        out = os.path.join(tmp, "check.json")
        assert main(["check", network("leak2"), "--selection", sel_path, "--output", out]) == 1
        report = read_report(out)
    assert not report["result"]["conditions"]["passed"]
    assert report["error"] is None


def test_check_reads_select_report():
    with tempfile.TemporaryDirectory() as tmp:
        sel_path = os.path.join(tmp, "select.json")
        assert main(["select", network("inputs4"), "--target", "1", "2", "--output", sel_path]) == 0
        out = os.path.join(tmp, "check.json")
        assert main(["check", network("inputs4"), "--selection", sel_path, "--output", out]) == 0
        report = read_report(out)
    assert report["result"]["conditions"]["passed"]
    assert report["result"]["delay_conditions"]["passed"]


def test_transform_reports_invariance():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "transform.json")
        assert main(["transform", network("leak2"), "--target", "2", "1", "--output", out, "--grid", "64"]) == 0
        report = read_report(out)
    assert report["result"]["invariance"]["passed"]
    assert report["result"]["delay_pattern_matches_graph"]
    assert "coefficients" not in report["result"]


def test_transform_dump_has_coefficient_tables():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "transform.json")
        assert main(["transform", network("leak2"), "--target", "2", "1", "--output", out, "--dump"]) == 0
        report = read_report(out)
    table = report["result"]["coefficients"]
    assert [(row["to"], row["from"]) for row in table["G"]] == [(2, 1)]
    assert all(len(value.split(".")[1]) == 12 for value in table["G"][0]["den"])
    assert len(table["Lambda"]) == 2


def test_simulate_needs_output():
    assert main(["simulate", network("leak2")]) == 2


def test_simulate_then_identify():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "leak2.npz")
        assert main(["simulate", network("leak2"), "--output", data, "--N", "3000", "--seed", "3"]) == 0
        assert os.path.exists(data)
        out = os.path.join(tmp, "identify.json")
        code = main(["identify", network("leak2"), "--target", "2", "1", "--data", data, "--starts", "1",
                     "--output", out])
        assert code == 0
        report = read_report(out)
    module = report["result"]["target_module"]
    assert module["to"] == 2 and module["from"] == 1
    assert abs(module["num"][1] - 0.8) < 0.15


def test_identify_rejects_dataset_of_other_network():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "leak2.npz")
        assert main(["simulate", network("leak2"), "--output", data, "--N", "200"]) == 0
        code = main(["identify", network("network8"), "--target", "1", "2", "--data", data,
                     "--output", os.path.join(tmp, "r.json")])
    assert code == 2


def test_user_selection_infeasible():
    code = main(["select", network("network8"), "--target", "1", "2", "--mode", "user", "--accessible", "1,2"])
    assert code == 1


if __name__ == "__main__":
    print("=" * 60)
    print("CLI TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
