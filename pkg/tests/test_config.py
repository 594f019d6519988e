#!/usr/bin/env python3
"""
Tests for run configuration and environment defaults
"""
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from config import EstimatorConfig, MonteCarloConfig, RunConfig, default_grid, default_seed, default_threads
from main import build_parser
from tools.errors import InputError


def expect_input_error(fragment, **kwargs):
    try:
        RunConfig(**kwargs)
        assert False, f"expected InputError for {kwargs}"
    except InputError as e:
        assert fragment in str(e), str(e)
        assert e.exit_code == 2


def test_defaults():
    cfg = RunConfig(command="validate", network="net.json")
    assert cfg.mode == "full" and cfg.criterion == "wls"
    assert cfg.orders == (1, 1, 1, 1)
    assert cfg.estimator() == EstimatorConfig(starts=8, threads=cfg.threads)
    mc = MonteCarloConfig()
    assert mc.replicas == 50 and mc.N == 50000 and mc.criterion == "wls"


def test_rejected_combinations():
    expect_input_error("unknown command", command="fit", network="n")
    expect_input_error("select needs --target", command="select", network="n")
    expect_input_error("--mode user needs --accessible", command="select", network="n", target=(1, 2), mode="user")
    expect_input_error("only valid with --mode user", command="select", network="n", target=(1, 2),
                       accessible=(1, 2))
    expect_input_error("identify needs --data", command="identify", network="n", target=(1, 2))
    expect_input_error("simulate needs --output", command="simulate", network="n")
    expect_input_error("--informativity data needs --data", command="check", network="n", target=(1, 2),
                       informativity="data")
    expect_input_error("at least 2 replicas", command="montecarlo", network="n", target=(1, 2), replicas=1)
    expect_input_error("order 0", command="identify", network="n", target=(1, 2), data="d.npz",
                       orders=(0, 1, 1, 1))
    expect_input_error("--miso needs --target", command="select", network="n", target=(1, 2), miso=(1,))


def test_montecarlo_config_checks():
    for kwargs in ({"replicas": 1}, {"N": 0}, {"criterion": "ls"}):
        try:
            MonteCarloConfig(**kwargs)
            assert False, f"expected InputError for {kwargs}"
        except InputError:
            pass


def test_from_args():
    args = build_parser().parse_args(["identify", "net.json", "--target", "2", "1", "--data", "d.npz",
                                      "--orders", "2,2,1,0", "--miso", "1,4", "--starts", "3", "--seed", "7"])
    cfg = RunConfig.from_args(args)
    assert cfg.target == (2, 1)
    assert cfg.orders == (2, 2, 1, 0)
    assert cfg.miso == (1, 4)
    assert cfg.seed == 7 and cfg.starts == 3
    doc = cfg.to_dict()
    assert doc["target"] == [2, 1] and doc["miso"] == [1, 4]


def test_bad_label_list():
    args = build_parser().parse_args(["select", "net.json", "--target", "1", "2", "--mode", "user",
                                      "--accessible", "1,x"])
    try:
        RunConfig.from_args(args)
        assert False, "expected InputError"
    except InputError as e:
        assert "--accessible" in str(e)


def test_environment_defaults():
    saved = {k: os.environ.get(k) for k in ("NETIDENT_SEED", "NETIDENT_GRID", "NETIDENT_THREADS")}
    try:
        os.environ["NETIDENT_SEED"] = "42"
        os.environ["NETIDENT_GRID"] = "64"
        os.environ["NETIDENT_THREADS"] = "0"
        assert default_seed() == 42
        assert default_grid() == 64
        assert default_threads() == 1
        os.environ["NETIDENT_SEED"] = "many"
        try:
            default_seed()
            assert False, "expected InputError"
        except InputError as e:
            assert "NETIDENT_SEED" in str(e)
    finally:
        for key, value in saved.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value


if __name__ == "__main__":
    print("=" * 60)
    print("CONFIG TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
