"""
Network model: w = G w + R r + H e with cov(e) = Lambda.

Documents are JSON (format_version 1) with 1-based node labels; matrices are
0-based internally.
"""
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from tools.errors import InputError, NumericalError
from tools.transfer import RationalTransfer, STABILITY_MARGIN, TransferMatrix

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SIGNAL_KINDS = ("zero", "white", "filtered-white", "multisine")
PATTERN_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """
    Full network description.

    G, H are L x L, R is L x K. `correlation` holds declared Phi_v pairs
    (0-based, a < b). `signals` holds per-r excitation settings as given in
    the document.
    """

    L: int
    K: int
    G: TransferMatrix
    H: TransferMatrix
    R: TransferMatrix
    Lambda: np.ndarray
    correlation: FrozenSet[Tuple[int, int]] = frozenset()
    signals: Tuple[dict, ...] = ()
    name: str = ""
    description: str = ""

    @cached_property
    def adjacency(self) -> np.ndarray:
        """adjacency[k, l] is True iff G_kl is nonzero (edge l -> k)."""
        return _nonzero_pattern(self.G)

    @cached_property
    def lambda_factor(self) -> np.ndarray:
        """Lower Cholesky factor of Lambda."""
        try:
            return np.linalg.cholesky(self.Lambda)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"Lambda is not positive definite: {exc}", stage="network") from exc

    @cached_property
    def noise_sources(self) -> np.ndarray:
        """
        noise_sources[k, l] is True iff unit-variance source e_l reaches w_k
        directly, i.e. (H chol(Lambda))_kl is structurally nonzero. Declared
        correlation pairs with no such support add both cross edges.
        """
        chol_pattern = np.abs(self.lambda_factor) > PATTERN_TOL
        pattern = (_nonzero_pattern(self.H).astype(int) @ chol_pattern.astype(int)) > 0
        for a, b in sorted(self.correlation):
            if not np.any(pattern[a] & pattern[b]):
                pattern[a, b] = True
                pattern[b, a] = True
        return pattern

    @cached_property
    def noise_pattern(self) -> np.ndarray:
        """Boolean pattern of Phi_v: v_a and v_b correlated iff they share a source."""
        src = self.noise_sources.astype(int)
        return (src @ src.T) > 0

    @cached_property
    def H_scaled(self) -> TransferMatrix:
        """H chol(Lambda): the noise map driven by unit-covariance white noise."""
        return self.H @ TransferMatrix.from_constant(self.lambda_factor)

    def edges(self) -> List[Tuple[int, int]]:
        """Module edges as 1-based (from, to) pairs."""
        rows, cols = np.nonzero(self.adjacency)
        return sorted((int(c) + 1, int(r) + 1) for r, c in zip(rows, cols))

    def module(self, to: int, frm: int) -> RationalTransfer:
        """G entry for the 1-based edge frm -> to."""
        _check_label(to, self.L, "to")
        _check_label(frm, self.L, "from")
        return self.G[to - 1, frm - 1]

    def has_edge(self, frm: int, to: int) -> bool:
        return bool(self.adjacency[to - 1, frm - 1])


@dataclass
class ValidationReport:
    checks: Dict[str, dict] = field(default_factory=dict)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks[name] = {"passed": bool(passed), "detail": detail}

    @property
    def valid(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def failures(self) -> List[str]:
        return [name for name, c in self.checks.items() if not c["passed"]]

    def to_dict(self) -> dict:
        return {"valid": self.valid, "checks": self.checks}


def _nonzero_pattern(M: TransferMatrix) -> np.ndarray:
    p, m = M.shape
    return np.array([[not M[k, l].is_zero for l in range(m)] for k in range(p)], dtype=bool).reshape(p, m)


def _check_label(value, upper: int, what: str, position: Optional[str] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"'{what}' must be an integer label, got {value!r}", position=position)
    if not 1 <= value <= upper:
        raise InputError(f"'{what}' label {value} outside 1..{upper}", position=position)
    return value


def _parse_transfer(entry: dict, position: str) -> RationalTransfer:
    if "num" not in entry:
        raise InputError("entry needs a 'num' coefficient list", position=position)
    num = entry["num"]
    den = entry.get("den", [1.0])
    for name, coefs in (("num", num), ("den", den)):
        if not isinstance(coefs, list) or not coefs or not all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in coefs):
            raise InputError(f"'{name}' must be a non-empty list of numbers", position=position)
    if den[0] == 0:
        raise InputError("denominator constant term must be nonzero", position=position)
    return RationalTransfer(num, den)


def _parse_entries(items, rows: int, cols: int, what: str,
                   row_name: str = "to", col_name: str = "from") -> Dict[Tuple[int, int], RationalTransfer]:
    if not isinstance(items, list):
        raise InputError(f"'{what}' must be a list", position=what)
    out: Dict[Tuple[int, int], RationalTransfer] = {}
    for n, entry in enumerate(items):
        position = f"{what}[{n}]"
        if not isinstance(entry, dict):
            raise InputError("entry must be an object", position=position)
        k = _check_label(entry.get(row_name), rows, row_name, position)
        l = _check_label(entry.get(col_name), cols, col_name, position)
        if (k, l) in out:
            raise InputError(f"duplicate entry {col_name}={l} {row_name}={k}", position=position)
        out[(k, l)] = _parse_transfer(entry, position)
    return out


def _matrix_from(entries: Dict[Tuple[int, int], RationalTransfer], rows: int, cols: int,
                 diagonal: Optional[RationalTransfer] = None) -> TransferMatrix:
    grid = [[RationalTransfer.zero() for _ in range(cols)] for _ in range(rows)]
    if diagonal is not None:
        for k in range(min(rows, cols)):
            grid[k][k] = diagonal
    for (k, l), tf in entries.items():
        grid[k - 1][l - 1] = tf
    return TransferMatrix(grid, shape=(rows, cols))


def parse_network(text: str) -> NetworkSpec:
    """
    Parse a network document.

    Args:
        text: JSON document text

    Returns:
        NetworkSpec with H defaulting to identity and Lambda to identity
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"syntax error: {e.msg}", position=f"line {e.lineno} column {e.colno}")

    if not isinstance(doc, dict):
        raise InputError("network document must be a JSON object")
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported format_version {version!r}", position="format_version")
    L = doc.get("L")
    if isinstance(L, bool) or not isinstance(L, int) or L < 1:
        raise InputError("'L' must be a positive integer", position="L")

    excitation = doc.get("excitation", {}) or {}
    if not isinstance(excitation, dict):
        raise InputError("'excitation' must be an object", position="excitation")
    K = doc.get("K", 0)
    if isinstance(K, bool) or not isinstance(K, int) or K < 0:
        raise InputError("'K' must be a non-negative integer", position="K")

    modules = _parse_entries(doc.get("modules", []), L, L, "modules")
    for (k, l) in modules:
        if k == l:
            raise InputError(f"non-hollow G: diagonal entry G_{k}{l}", position="modules")
    G = _matrix_from(modules, L, L)

    noise = doc.get("noise", {}) or {}
    if not isinstance(noise, dict):
        raise InputError("'noise' must be an object", position="noise")
    h_entries = _parse_entries(noise.get("H", []), L, L, "noise.H")
    for (k, l), tf in h_entries.items():
        if k == l and abs(tf.num[0] - 1.0) > 1e-12:
            raise InputError(f"non-monic H diagonal: H_{k}{k} has constant term {tf.num[0]}", position="noise.H")
    H = _matrix_from(h_entries, L, L, diagonal=RationalTransfer.one())

    Lambda = noise.get("Lambda")
    if Lambda is None:
        Lambda = np.eye(L)
    else:
        try:
            Lambda = np.array(Lambda, dtype=float)
        except (TypeError, ValueError):
            raise InputError("'Lambda' must be a numeric matrix", position="noise.Lambda")
        if Lambda.shape != (L, L):
            raise InputError(f"dimension mismatch: Lambda is {Lambda.shape}, expected ({L}, {L})",
                             position="noise.Lambda")

    pairs = set()
    for n, pair in enumerate(noise.get("correlation", []) or []):
        position = f"noise.correlation[{n}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise InputError("correlation entries are [a, b] label pairs", position=position)
        a = _check_label(pair[0], L, "a", position)
        b = _check_label(pair[1], L, "b", position)
        if a == b:
            raise InputError("correlation pair must name two distinct nodes", position=position)
        pairs.add((min(a, b) - 1, max(a, b) - 1))

    r_items = excitation.get("R", []) or []
    if r_items and not K:
        raise InputError("excitation.R given but K = 0", position="excitation.R")
    r_entries = _parse_entries(r_items, L, K, "excitation.R")
    R = _matrix_from(r_entries, L, K)

    signals = excitation.get("signals", []) or []
    if not isinstance(signals, list):
        raise InputError("'signals' must be a list", position="excitation.signals")
    if signals and len(signals) != K:
        raise InputError(f"dimension mismatch: {len(signals)} signal configs for K={K}",
                         position="excitation.signals")
    for n, sig in enumerate(signals):
        _check_signal(sig, f"excitation.signals[{n}]")

    return NetworkSpec(L=L, K=K, G=G, H=H, R=R, Lambda=Lambda, correlation=frozenset(pairs),
                       signals=tuple(dict(s) for s in signals),
                       name=str(doc.get("name", "")), description=str(doc.get("description", "")))


def _check_signal(sig, position: str) -> None:
    if not isinstance(sig, dict):
        raise InputError("signal config must be an object", position=position)
    kind = sig.get("kind", "white")
    if kind not in SIGNAL_KINDS:
        raise InputError(f"unknown signal kind '{kind}'", position=position)
    amp = sig.get("amplitude", 1.0)
    if not isinstance(amp, (int, float)) or isinstance(amp, bool) or amp < 0:
        raise InputError("'amplitude' must be a number >= 0", position=position)
    if kind == "filtered-white":
        _parse_transfer({"num": sig.get("num"), "den": sig.get("den", [1.0])}, position)
    if kind == "multisine":
        freqs = sig.get("frequencies")
        if not isinstance(freqs, list) or not freqs or any(
                not isinstance(f, (int, float)) or not 0.0 < f < np.pi for f in freqs):
            raise InputError("multisine needs 'frequencies' in (0, pi)", position=position)


def _entry_dict(tf: RationalTransfer, frm: int, to: int, from_key: str = "from") -> dict:
    return {from_key: frm, "to": to, "num": [float(c) for c in tf.num], "den": [float(c) for c in tf.den]}


def serialize_network(net: NetworkSpec) -> str:
    """Inverse of parse_network."""
    L, K = net.L, net.K
    modules = [_entry_dict(net.G[k, l], l + 1, k + 1)
               for k in range(L) for l in range(L) if not net.G[k, l].is_zero]
    h_items = []
    for k in range(L):
        for l in range(L):
            tf = net.H[k, l]
            if k == l and tf == RationalTransfer.one():
                continue
            if k != l and tf.is_zero:
                continue
            h_items.append(_entry_dict(tf, l + 1, k + 1))
    r_items = [_entry_dict(net.R[k, l], l + 1, k + 1)
               for k in range(L) for l in range(K) if not net.R[k, l].is_zero]
    doc = {
        "format_version": FORMAT_VERSION,
        "name": net.name,
        "description": net.description,
        "L": L,
        "K": K,
        "modules": modules,
        "noise": {
            "H": h_items,
            "Lambda": [[float(v) for v in row] for row in net.Lambda],
            "correlation": [[a + 1, b + 1] for a, b in sorted(net.correlation)],
        },
        "excitation": {"R": r_items, "signals": [dict(s) for s in net.signals]},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def validate_network(net: NetworkSpec) -> ValidationReport:
    """
    Check hollow G, monic H, Lambda > 0, stability of (I - G)^-1 and
    stability / minimum phase of H. Failures are report entries, not errors.
    """
    report = ValidationReport()
    L = net.L

    diag = [k + 1 for k in range(L) if not net.G[k, k].is_zero]
    report.add("hollow_G", not diag, f"nonzero diagonal at {diag}" if diag else "")

    monic = net.H.is_monic()
    report.add("monic_H", monic, "" if monic else "feedthrough of H is not the identity")

    sym = np.allclose(net.Lambda, net.Lambda.T, atol=1e-12)
    eigs = np.linalg.eigvalsh((net.Lambda + net.Lambda.T) / 2.0)
    pd = bool(sym and eigs.min() > 0.0)
    report.add("Lambda_positive_definite", pd,
               "" if pd else ("Lambda not symmetric" if not sym else f"min eigenvalue {eigs.min():.3e}"))

    try:
        loop = (TransferMatrix.identity(L) - net.G).to_state_space().inverse().minimal()
        radius = loop.spectral_radius()
        stable = radius < 1.0 - STABILITY_MARGIN
        report.add("network_stable", stable, f"spectral radius {radius:.6f}")
    except NumericalError as e:
        report.add("network_stable", False, f"ill-posed loop: {e.message}")

    h_ss = net.H.to_state_space()
    radius = h_ss.spectral_radius()
    report.add("H_stable", radius < 1.0 - STABILITY_MARGIN, f"spectral radius {radius:.6f}")
    try:
        zeros_radius = h_ss.inverse().minimal().spectral_radius()
        report.add("H_minimum_phase", zeros_radius < 1.0 - STABILITY_MARGIN,
                   f"zero radius {zeros_radius:.6f}")
    except NumericalError as e:
        report.add("H_minimum_phase", False, e.message)

    if net.K:
        radius = net.R.to_state_space().spectral_radius()
        report.add("R_stable", radius < 1.0 - STABILITY_MARGIN, f"spectral radius {radius:.6f}")

    if not report.valid:
        logger.info("network %s failed checks: %s", net.name or "<unnamed>", report.failures())
    return report


def require_valid(net: NetworkSpec) -> None:
    """Raise InputError for a network that fails validate_network."""
    report = validate_network(net)
    if not report.valid:
        details = "; ".join(f"{n}: {report.checks[n]['detail']}".rstrip(": ") for n in report.failures())
        raise InputError(f"invalid network ({details})", stage="validate")


def load_network(path: str) -> Tuple[NetworkSpec, bytes]:
    """Read and parse a network document; returns the spec and the raw bytes."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise InputError(f"cannot read network file: {e.strerror}", position=path)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise InputError("network file is not UTF-8 text", position=path)
    return parse_network(text), raw
