"""
Time-series generation from a NetworkSpec, Welch spectrum estimation and
the data-informativity check.

Spectral convention: two-sided density with fs = 1, so unit-variance white
noise has a flat spectrum equal to 1. Phi_ab(w) = E[A(w) B(w)^*].
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from config import SimulationConfig
from tools.errors import InputError, NumericalError
from tools.graph import ConditionReport, Selection
from tools.immersion import transform_network
from tools.network import SIGNAL_KINDS, NetworkSpec, serialize_network, validate_network
from tools.transfer import RationalTransfer, StateSpace, TransferMatrix, uniform_grid

logger = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1
GENERATOR = "philox"


@dataclass(frozen=True)
class SignalConfig:
    kind: str = "white"
    amplitude: float = 1.0
    num: Tuple[float, ...] = (1.0,)
    den: Tuple[float, ...] = (1.0,)
    frequencies: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise InputError(f"unknown signal kind '{self.kind}'")
        if self.amplitude < 0:
            raise InputError("signal amplitude must be >= 0")
        if self.kind == "multisine" and (not self.frequencies or
                                         any(not 0.0 < f < np.pi for f in self.frequencies)):
            raise InputError("multisine needs frequencies in (0, pi)")

    @property
    def filter(self) -> RationalTransfer:
        return RationalTransfer(self.num, self.den)

    @classmethod
    def from_dict(cls, doc: dict) -> "SignalConfig":
        return cls(kind=doc.get("kind", "white"), amplitude=float(doc.get("amplitude", 1.0)),
                   num=tuple(doc.get("num", (1.0,))), den=tuple(doc.get("den", (1.0,))),
                   frequencies=tuple(doc.get("frequencies", ())))


@dataclass(frozen=True)
class ExcitationConfig:
    """One SignalConfig per external signal r_k."""

    signals: Tuple[SignalConfig, ...] = ()

    @classmethod
    def from_network(cls, net: NetworkSpec) -> "ExcitationConfig":
        if net.signals:
            return cls(tuple(SignalConfig.from_dict(s) for s in net.signals))
        return cls(tuple(SignalConfig() for _ in range(net.K)))

    @classmethod
    def zero(cls, K: int) -> "ExcitationConfig":
        return cls(tuple(SignalConfig(kind="zero") for _ in range(K)))

    def spectrum(self, grid: np.ndarray) -> np.ndarray:
        """Diagonal Phi_r per frequency (grid x K x K); multisine lines carry no density."""
        K = len(self.signals)
        out = np.zeros((grid.size, K, K))
        for k, sig in enumerate(self.signals):
            if sig.kind == "white":
                out[:, k, k] = sig.amplitude ** 2
            elif sig.kind == "filtered-white":
                values, _ = sig.filter.frequency_response(grid)
                out[:, k, k] = sig.amplitude ** 2 * np.abs(values) ** 2
        return out


@dataclass(eq=False)
class Dataset:
    w: np.ndarray
    r: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w = np.atleast_2d(np.asarray(self.w, dtype=float))
        self.r = np.asarray(self.r, dtype=float).reshape(-1, self.w.shape[1])
        if self.w.shape[1] < 1:
            raise InputError("dataset needs at least one sample")
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.r))):
            raise NumericalError("dataset contains non-finite values", stage="simulate")

    @property
    def N(self) -> int:
        return self.w.shape[1]

    @property
    def L(self) -> int:
        return self.w.shape[0]

    def nodes(self, labels: Iterable[int]) -> np.ndarray:
        labels = list(labels)
        for k in labels:
            if not 1 <= k <= self.L:
                raise InputError(f"node {k} outside 1..{self.L}")
        return self.w[[k - 1 for k in labels]] if labels else np.zeros((0, self.N))

    def save(self, path: str) -> None:
        meta = dict(self.meta, format_version=DATASET_FORMAT_VERSION, seed=self.seed, N=self.N)
        with open(path, "wb") as fh:
            np.savez(fh, w=self.w, r=self.r, meta=np.array(json.dumps(meta, sort_keys=True)))

    @classmethod
    def load(cls, path: str) -> "Dataset":
        try:
            with np.load(path, allow_pickle=False) as doc:
                w, r = doc["w"], doc["r"]
                meta = json.loads(str(doc["meta"]))
        except (OSError, KeyError, ValueError) as e:
            raise InputError(f"cannot read dataset: {e}", position=path)
        if meta.get("format_version") != DATASET_FORMAT_VERSION:
            raise InputError(f"unsupported dataset format_version {meta.get('format_version')!r}", position=path)
        return cls(w=w, r=r, seed=int(meta.get("seed", 0)), meta=meta)


def _noise_root(Lambda: np.ndarray) -> np.ndarray:
    """Cholesky factor of Lambda, or a symmetric root when Lambda is only semidefinite."""
    try:
        return np.linalg.cholesky(Lambda)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh((Lambda + Lambda.T) / 2.0)
    if vals.min() < -1e-12 * max(1.0, abs(vals.max())):
        raise InputError("noise covariance is not positive semidefinite")
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _network_system(net: NetworkSpec) -> StateSpace:
    """Realization of w = (I - G)^-1 [H R] [e; r]."""
    try:
        loop = (TransferMatrix.identity(net.L) - net.G).to_state_space().inverse()
    except NumericalError as e:
        raise NumericalError(f"well-posedness failure: {e.message}", stage="simulate") from e
    drive = net.H if not net.K else TransferMatrix.block([[net.H, net.R]])
    return (loop @ drive.to_state_space()).minimal()


def _excitation(exc: ExcitationConfig, seed: int, total: int) -> np.ndarray:
    K = len(exc.signals)
    r = np.zeros((K, total))
    t = np.arange(total)
    for k, sig in enumerate(exc.signals):
        rng = np.random.Generator(np.random.Philox(seed).jumped(k + 1))
        if sig.kind == "white":
            r[k] = sig.amplitude * rng.standard_normal(total)
        elif sig.kind == "filtered-white":
            r[k] = sig.filter.filter(sig.amplitude * rng.standard_normal(total))
        elif sig.kind == "multisine":
            phases = rng.uniform(0.0, 2.0 * np.pi, len(sig.frequencies))
            for f, ph in zip(sig.frequencies, phases):
                r[k] += sig.amplitude * np.sin(f * t + ph)
    return r


def simulate(net: NetworkSpec, N: int, seed: int = 0, exc: Optional[ExcitationConfig] = None,
             burn_in: int = SimulationConfig.burn_in) -> Dataset:
    """
    Draw e ~ N(0, Lambda) white, build r from the excitation config and run
    the network recursion; the first burn_in samples are discarded.
    """
    if N < 1:
        raise InputError("N must be at least 1")
    if burn_in < 0:
        raise InputError("burn_in must be >= 0")
    report = validate_network(net)
    if not report.checks["network_stable"]["passed"]:
        raise NumericalError(f"unstable network ({report.checks['network_stable']['detail']})", stage="simulate")
    exc = exc if exc is not None else ExcitationConfig.from_network(net)
    if len(exc.signals) != net.K:
        raise InputError(f"excitation has {len(exc.signals)} signals, network has K={net.K}")

    total = N + burn_in
    rng = np.random.Generator(np.random.Philox(seed))
    e = _noise_root(net.Lambda) @ rng.standard_normal((net.L, total))
    r = _excitation(exc, seed, total)
    u = np.vstack([e, r]) if net.K else e

    sys = _network_system(net)
    if sys.n == 0:
        w = sys.D @ u
    else:
        _, y, _ = signal.dlsim((sys.A, sys.B, sys.C, sys.D, 1), u.T)
        w = np.asarray(y).T.reshape(net.L, total)
    network_hash = hashlib.sha256(serialize_network(net).encode("utf-8")).hexdigest()
    meta = {"generator": GENERATOR, "burn_in": burn_in, "network_sha256": network_hash, "network": net.name,
            "excitation": [s.kind for s in exc.signals]}
    logger.debug("simulated %s: N=%d seed=%d", net.name or "<unnamed>", N, seed)
    return Dataset(w=w[:, burn_in:], r=r[:, burn_in:], seed=seed, meta=meta)


@dataclass
class SpectrumEstimate:
    """Cross-spectral matrices values[g, a, b] = Phi_ab at frequencies w (rad/sample)."""

    frequencies: np.ndarray
    values: np.ndarray
    labels: List[int]


def welch_matrix(x: np.ndarray, grid: Optional[Sequence[float]] = None,
                 nperseg: int = SimulationConfig.nperseg, overlap: float = SimulationConfig.overlap,
                 window: str = SimulationConfig.window) -> Tuple[np.ndarray, np.ndarray]:
    """
    Averaged-periodogram cross-spectral matrix of the rows of x.

    Returns:
        (frequencies, values[g, n, n]); without a grid, every FFT bin in [0, pi]
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, N = x.shape
    if N < 8 * nperseg:
        raise NumericalError(f"too-short data: N={N} < 8 x segment length {nperseg}", stage="spectrum")
    noverlap = int(nperseg * overlap)
    freqs = None
    full = np.zeros((nperseg, n, n), dtype=complex)
    for a in range(n):
        for b in range(a, n):
            f, pxy = signal.csd(x[b], x[a], fs=1.0, window=window, nperseg=nperseg, noverlap=noverlap,
                                return_onesided=False, scaling="density", detrend=False)
            full[:, a, b] = pxy
            full[:, b, a] = np.conj(pxy)
            freqs = f
    omega = 2.0 * np.pi * freqs
    if grid is None:
        keep = np.flatnonzero((omega >= 0.0) & (omega <= np.pi))
        keep = keep[np.argsort(omega[keep])]
        return omega[keep], full[keep]
    grid = np.asarray(grid, dtype=float)
    bins = np.mod(np.rint(grid / (2.0 * np.pi) * nperseg).astype(int), nperseg)
    return grid, full[bins]


def estimate_spectrum(data: Dataset, signals: Iterable[int], grid: Optional[Sequence[float]] = None,
                      config: SimulationConfig = SimulationConfig()) -> SpectrumEstimate:
    """Welch estimate of the joint spectrum of the listed node signals."""
    labels = list(signals)
    freqs, values = welch_matrix(data.nodes(labels), grid, config.nperseg, config.overlap, config.window)
    return SpectrumEstimate(frequencies=freqs, values=values, labels=labels)


def _source_maps(net: NetworkSpec, grid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Frequency-wise (I - G)^-1 H Lambda^1/2 and (I - G)^-1 R."""
    root = _noise_root(net.Lambda)
    Gw = net.G.freqresp(grid)
    Hw = net.H.freqresp(grid)
    Rw = net.R.freqresp(grid) if net.K else np.zeros((grid.size, net.L, 0))
    eye = np.eye(net.L)
    Te = np.empty((grid.size, net.L, net.L), dtype=complex)
    Tr = np.empty((grid.size, net.L, net.K), dtype=complex)
    for k in range(grid.size):
        M = eye - Gw[k]
        Te[k] = np.linalg.solve(M, Hw[k] @ root)
        if net.K:
            Tr[k] = np.linalg.solve(M, Rw[k])
    return Te, Tr


def analytic_spectrum(net: NetworkSpec, grid: Sequence[float], nodes: Optional[Iterable[int]] = None,
                      excitation: Optional[ExcitationConfig] = None) -> np.ndarray:
    """Phi_w restricted to `nodes` (all by default): T Lambda T* + T_r Phi_r T_r*."""
    grid = np.asarray(grid, dtype=float)
    rows = [k - 1 for k in (nodes if nodes is not None else range(1, net.L + 1))]
    exc = excitation if excitation is not None else ExcitationConfig.from_network(net)
    Te, Tr = _source_maps(net, grid)
    Phi_r = exc.spectrum(grid)
    out = np.empty((grid.size, len(rows), len(rows)), dtype=complex)
    for k in range(grid.size):
        Ae = Te[k][rows]
        Ar = Tr[k][rows]
        out[k] = Ae @ Ae.conj().T + Ar @ Phi_r[k] @ Ar.conj().T
    return out


def _kappa_map(net: NetworkSpec, sel: Selection, grid: np.ndarray, transformed) -> np.ndarray:
    """Per-frequency map from sources [e; r] to kappa = [w_D; xi_Q; w_o]."""
    Te, Tr = _source_maps(net, grid)
    T = np.concatenate([Te, Tr], axis=2)
    d_rows = [k - 1 for k in sel.d_order]
    o_rows = [sel.o - 1] if sel.o is not None else []
    nQ = len(sel.Q)
    if nQ:
        Gb = transformed.G.freqresp(grid)
        Hb = transformed.H.freqresp(grid)
        Rb = transformed.R.freqresp(grid) if net.K else np.zeros((grid.size, len(sel.Y), 0))
        y_rows = [k - 1 for k in transformed.y_labels]
        td_rows = [k - 1 for k in transformed.d_labels]
    out = []
    for k in range(grid.size):
        blocks = [T[k][d_rows]]
        if nQ:
            resid = T[k][y_rows] - Gb[k] @ T[k][td_rows]
            resid[:, net.L:] -= Rb[k]
            xi = np.linalg.solve(Hb[k], resid)
            blocks.append(xi[:nQ])
        if o_rows:
            blocks.append(T[k][o_rows])
        out.append(np.vstack(blocks))
    return np.array(out)


def _arx_innovations(data: Dataset, sel: Selection, order: int) -> np.ndarray:
    """
    Residuals of per-row ARX fits for Q rows: past of Y and D, current of D
    minus the row itself, and current and past of r when measured.
    """
    past_labels = sorted(set(sel.Y) | set(sel.D))
    past = data.nodes(past_labels)
    N = data.N
    if N <= 4 * order * max(1, len(past_labels)):
        raise NumericalError("too-short data for the innovation surrogate", stage="informativity")
    out = []
    for q in sorted(sel.Q):
        current = [k for k in sel.d_order if k != q]
        cols = [past[:, order - lag:N - lag] for lag in range(1, order + 1)]
        if current:
            cols.append(data.nodes(current)[:, order:])
        if data.r.shape[0]:
            cols.extend(data.r[:, order - lag:N - lag] for lag in range(order + 1))
        Phi = np.vstack(cols).T
        target = data.nodes([q])[0, order:]
        theta, *_ = np.linalg.lstsq(Phi, target, rcond=None)
        out.append(target - Phi @ theta)
    return np.array(out).reshape(len(sel.Q), N - order)


def check_informativity(net: NetworkSpec, sel: Selection, mode: str = "model", data: Optional[Dataset] = None,
                        grid: Optional[Sequence[float]] = None, tol: float = SimulationConfig.informativity_tol,
                        fraction: float = SimulationConfig.informativity_fraction, transformed=None,
                        excitation: Optional[ExcitationConfig] = None, arx_order: int = 20,
                        config: SimulationConfig = SimulationConfig()) -> ConditionReport:
    """
    Positive definiteness of Phi_kappa, kappa = [w_D; xi_Q; w_o], on the grid.

    Args:
        mode: "model" evaluates Phi_kappa from the transformed network;
            "data" uses a Welch estimate with xi_Q replaced by ARX innovations
        tol: minimum eigenvalue threshold, relative to the largest eigenvalue
        fraction: share of grid frequencies that must pass
    """
    if mode not in ("model", "data"):
        raise InputError(f"unknown informativity mode '{mode}'")
    if not 0.0 < fraction <= 1.0:
        raise InputError("fraction must lie in (0, 1]")
    grid = uniform_grid(64) if grid is None else np.asarray(grid, dtype=float)
    report = ConditionReport(name="informativity")

    if mode == "model":
        if sel.Q and transformed is None:
            transformed = transform_network(net, sel)
        exc = excitation if excitation is not None else ExcitationConfig.from_network(net)
        M = _kappa_map(net, sel, grid, transformed)
        Phi_r = exc.spectrum(grid)
        spectra = []
        for k in range(grid.size):
            S = np.zeros((net.L + net.K, net.L + net.K))
            S[:net.L, :net.L] = np.eye(net.L)
            S[net.L:, net.L:] = Phi_r[k]
            spectra.append(M[k] @ S @ M[k].conj().T)
        spectra = np.array(spectra)
    else:
        if data is None:
            raise InputError("data-mode informativity needs a dataset")
        order = arx_order if sel.Q else 0
        rows = [data.nodes(sel.d_order)[:, order:]]
        if sel.Q:
            rows.append(_arx_innovations(data, sel, order))
        if sel.o is not None:
            rows.append(data.nodes([sel.o])[:, order:])
        _, spectra = welch_matrix(np.vstack(rows), grid, config.nperseg, config.overlap, config.window)

    eigs = np.array([np.linalg.eigvalsh((S + S.conj().T) / 2.0) for S in spectra])
    scale = max(float(np.max(eigs)), 1e-300)
    ok = eigs[:, 0] > tol * scale
    share = float(np.mean(ok))
    bad = [float(w) for w in grid[~ok]]
    report.add("kappa_spectrum_positive", share >= fraction, witness=bad[:10] or None,
               detail=f"{mode} mode: {share:.3f} of {grid.size} frequencies pass (required {fraction:.3f}); "
                      f"min relative eigenvalue {float(eigs[:, 0].min()) / scale:.3e}")
    report.details["fraction_required"] = fraction
    report.details["fraction_passing"] = share
    report.details["mode"] = mode
    return report
