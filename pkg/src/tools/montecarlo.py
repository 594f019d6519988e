"""
Monte-Carlo harness: repeated simulate + identify runs for one setup, with
bias statistics of the target module coefficients.
"""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Union

import numpy as np

from config import MonteCarloConfig
from tools.errors import NetidentError
from tools.estimation import (Estimate, MisoSetup, ModelStructure, Orders, build_model_set, identify_ml,
                              identify_wls, miso_model_set)
from tools.graph import Selection
from tools.immersion import predicted_delay_pattern, transform_network
from tools.network import NetworkSpec
from tools.simulation import simulate

logger = logging.getLogger(__name__)

Z_LIMIT = 3.0

Setup = Union[Selection, MisoSetup]


@dataclass(frozen=True)
class CoefficientStats:
    name: str
    mean: float
    truth: float
    std_error: float
    z: float
    median_abs_error: float

    def to_dict(self) -> dict:
        return {"name": self.name, "mean": self.mean, "truth": self.truth, "std_error": self.std_error,
                "z": self.z, "median_abs_error": self.median_abs_error}


@dataclass
class BiasReport:
    target: tuple
    setup: dict
    replicas: int
    coefficients: List[CoefficientStats]
    estimates: np.ndarray
    seeds: List[int]
    failures: List[dict] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def fraction_outside(self) -> float:
        """Share of coefficients with |z| > 3."""
        if not self.coefficients:
            return 0.0
        return float(np.mean([abs(c.z) > Z_LIMIT for c in self.coefficients]))

    @property
    def max_abs_z(self) -> float:
        return max((abs(c.z) for c in self.coefficients), default=0.0)

    def to_dict(self) -> dict:
        return {
            "target": list(self.target),
            "setup": self.setup,
            "replicas": self.replicas,
            "completed": int(self.estimates.shape[0]),
            "coefficients": [c.to_dict() for c in self.coefficients],
            "fraction_abs_z_above_3": self.fraction_outside,
            "max_abs_z": self.max_abs_z,
            "failures": self.failures,
            "warnings": self.warnings,
        }


def _target(setup: Setup) -> tuple:
    return (setup.j, setup.i)


def _describe(setup: Setup) -> dict:
    if isinstance(setup, Selection):
        return {"kind": "mimo", "selection": setup.to_dict()}
    return {"kind": "miso", "j": setup.j, "i": setup.i, "inputs": list(setup.inputs)}


def setup_model_set(net: NetworkSpec, setup: Setup, orders: Orders) -> ModelStructure:
    """Model set used for every replica of a setup; known excitation enters through R."""
    if isinstance(setup, Selection):
        excitation = transform_network(net, setup).R if net.K else None
        return build_model_set(setup, orders, delay_pattern=predicted_delay_pattern(net, setup),
                               excitation=excitation)
    excitation = net.R.select([setup.j - 1], list(range(net.K))) if net.K else None
    return miso_model_set(setup.j, setup.inputs, orders, excitation)


def _estimate(ms: ModelStructure, data, config: MonteCarloConfig, seed: int) -> Estimate:
    if config.criterion == "ml":
        return identify_ml(ms, data, config.estimator, seed)
    return identify_wls(ms, data, None, config.estimator, seed)


def truth_vector(net: NetworkSpec, ms: ModelStructure, j: int, i: int) -> np.ndarray:
    return ms.coefficients_of(ms.entry(j, i), net.module(j, i))


def coefficient_names(ms: ModelStructure, j: int, i: int) -> List[str]:
    e = ms.entry(j, i)
    nb, nf = e.b.stop - e.b.start, e.f.stop - e.f.start
    return [f"b{e.delay + k}" for k in range(nb)] + [f"f{k + 1}" for k in range(nf)]


def montecarlo_bias(net: NetworkSpec, setup: Setup, config: MonteCarloConfig = MonteCarloConfig(),
                    orders: Orders = Orders()) -> BiasReport:
    """
    Simulate and identify `config.replicas` times with seeds seed + index and
    summarize the target-module estimates against the true module.
    """
    j, i = _target(setup)
    ms = setup_model_set(net, setup, orders)
    truth = truth_vector(net, ms, j, i)
    seeds = [config.seed + idx for idx in range(config.replicas)]

    def replica(seed: int):
        try:
            data = simulate(net, config.N, seed=seed, burn_in=config.burn_in)
            est = _estimate(ms, data, config, seed)
            return est.entry_parameters(j, i), None
        except NetidentError as e:
            logger.warning("[montecarlo] replica with seed %d failed: %s", seed, e)
            return None, {"seed": seed, "error": str(e)}

    logger.info("running %d replicas of N=%d on %d threads", config.replicas, config.N, config.threads)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(replica, seeds))
    else:
        results = [replica(s) for s in seeds]

    done = [(s, r) for s, (r, _) in zip(seeds, results) if r is not None]
    failures = [f for _, f in results if f is not None]
    estimates = np.array([r for _, r in done]).reshape(len(done), truth.size)
    warnings = []
    if config.replicas == 2:
        warnings.append("only 2 replicas: 1 degree of freedom for the standard errors")
    if failures:
        warnings.append(f"{len(failures)} of {config.replicas} replicas failed")

    stats = []
    if len(done) >= 2:
        mean = estimates.mean(axis=0)
        se = estimates.std(axis=0, ddof=1) / np.sqrt(len(done))
        med = np.median(np.abs(estimates - truth), axis=0)
        for name, m, t, s, d in zip(coefficient_names(ms, j, i), mean, truth, se, med):
            z = (m - t) / s if s > 0 else (0.0 if m == t else float(np.sign(m - t)) * np.inf)
            stats.append(CoefficientStats(name, float(m), float(t), float(s), float(z), float(d)))
    else:
        warnings.append("fewer than 2 replicas completed: no statistics")
    return BiasReport(target=(j, i), setup=_describe(setup), replicas=config.replicas, coefficients=stats,
                      estimates=estimates, seeds=[s for s, _ in done], failures=failures, warnings=warnings)


def consistency_trend(net: NetworkSpec, setup: Setup, Ns: Sequence[int],
                      config: MonteCarloConfig = MonteCarloConfig(), orders: Orders = Orders()) -> List[dict]:
    """Median over replicas of the target-coefficient error norm, for every N."""
    j, i = _target(setup)
    truth = truth_vector(net, setup_model_set(net, setup, orders), j, i)
    trend = []
    for N in Ns:
        report = montecarlo_bias(net, setup, replace(config, N=N), orders)
        errors = np.linalg.norm(report.estimates - truth, axis=1) if report.estimates.size else np.array([np.nan])
        trend.append({"N": int(N), "median_error": float(np.median(errors)), "max_abs_z": report.max_abs_z})
    return trend


def write_replica_csv(report: BiasReport, path: str, names: Optional[List[str]] = None) -> None:
    """One row per completed replica: seed and target coefficients."""
    names = names or [c.name for c in report.coefficients]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["seed"] + names)
        for seed, row in zip(report.seeds, report.estimates):
            writer.writerow([seed] + [f"{v:.12f}" for v in row])
