"""
Direct prediction-error identification.

Predictor model: w_Y = G(q, theta) w_D + u + H(q, theta) xi with
  G_yd = q^-delay B / F          (F monic)
  H    = diag(1 + D_k)^-1 (I + C) (row k shares the denominator 1 + D_k,
                                  C strictly proper)
so that xi = (I + C)^-1 diag(1 + D) (w_Y - G w_D - u).

All polynomials are coefficient arrays in ascending powers of q^-1 and are
filtered with zero initial conditions.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import optimize, signal

from config import EstimatorConfig
from tools.errors import InputError, NumericalError
from tools.graph import Selection
from tools.simulation import Dataset
from tools.transfer import RationalTransfer, TransferMatrix

logger = logging.getLogger(__name__)

UNSTABLE_RESIDUAL = 1e3
RIDGE = 1e-10


@dataclass(frozen=True)
class Orders:
    """
    Polynomial orders: nb numerator coefficients and nf denominator
    coefficients per G entry, nc and nd for every noise row.
    """

    nb: int = 1
    nf: int = 1
    nc: int = 1
    nd: int = 1
    overrides: Mapping[Tuple[int, int], Tuple[int, int]] = field(default_factory=dict)
    strictly_proper: Mapping[Tuple[int, int], bool] = field(default_factory=dict)

    def __post_init__(self):
        if min(self.nb, self.nf, self.nc, self.nd) < 0:
            raise InputError("orders must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "Orders":
        try:
            nb, nf, nc, nd = (int(v) for v in text.split(","))
        except ValueError:
            raise InputError(f"orders take the form nb,nf,nc,nd, got {text!r}", position="--orders")
        return cls(nb, nf, nc, nd)

    def for_entry(self, key: Tuple[int, int]) -> Tuple[int, int]:
        return self.overrides.get(key, (self.nb, self.nf))


@dataclass(frozen=True)
class GEntry:
    to: int
    frm: int
    row: int
    col: int
    delay: int
    b: slice
    f: slice


@dataclass(frozen=True)
class NoiseRow:
    row: int
    d: slice
    c: Tuple[slice, ...]


@dataclass(eq=False)
class ModelStructure:
    """Parameterized model set; theta layout is G entries, then noise rows."""

    y_labels: List[int]
    d_labels: List[int]
    g_entries: List[GEntry]
    noise_rows: List[NoiseRow]
    n_params: int
    lambda_mode: str = "free"
    fixed_lambda: Optional[np.ndarray] = None
    selection: Optional[Selection] = None
    excitation: Optional[TransferMatrix] = None

    @property
    def ny(self) -> int:
        return len(self.y_labels)

    @property
    def max_lag(self) -> int:
        lags = [e.delay + (e.b.stop - e.b.start) - 1 for e in self.g_entries]
        lags += [e.f.stop - e.f.start for e in self.g_entries]
        lags += [r.d.stop - r.d.start for r in self.noise_rows]
        lags += [s.stop - s.start for r in self.noise_rows for s in r.c]
        return max([0] + lags)

    def entry(self, to: int, frm: int) -> GEntry:
        for e in self.g_entries:
            if e.to == to and e.frm == frm:
                return e
        raise InputError(f"G_{to}{frm} is not parameterized in this model set")

    # polynomials
    def g_polynomials(self, theta: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [(np.concatenate([np.zeros(e.delay), theta[e.b]]), np.concatenate([[1.0], theta[e.f]]))
                for e in self.g_entries]

    def noise_polynomials(self, theta: np.ndarray) -> Tuple[List[np.ndarray], List[List[np.ndarray]]]:
        D = [np.concatenate([[1.0], theta[r.d]]) for r in self.noise_rows]
        C = [[np.concatenate([[1.0 if k == l else 0.0], theta[s]]) for l, s in enumerate(r.c)]
             for k, r in enumerate(self.noise_rows)]
        return D, C

    def root_radii(self, theta: np.ndarray) -> np.ndarray:
        """Largest root modulus of every F, every 1 + D_k and det(I + C)."""
        polys = [f for _, f in self.g_polynomials(theta)]
        D, C = self.noise_polynomials(theta)
        polys += D
        polys.append(_poly_det(C))
        return np.array([_root_radius(p) for p in polys])

    # transfer matrices
    def G(self, theta: np.ndarray) -> TransferMatrix:
        grid = [[RationalTransfer.zero() for _ in self.d_labels] for _ in self.y_labels]
        for e, (b, f) in zip(self.g_entries, self.g_polynomials(theta)):
            grid[e.row][e.col] = RationalTransfer(b, f)
        return TransferMatrix(grid, shape=(self.ny, len(self.d_labels)))

    def H(self, theta: np.ndarray) -> TransferMatrix:
        D, C = self.noise_polynomials(theta)
        return TransferMatrix([[RationalTransfer(C[k][l], D[k]) for l in range(self.ny)] for k in range(self.ny)],
                              shape=(self.ny, self.ny))

    def coefficients_of(self, entry: GEntry, tf: RationalTransfer) -> np.ndarray:
        """A transfer written in the (b, f) layout of `entry`, padded or cut to its orders."""
        nb, nf = entry.b.stop - entry.b.start, entry.f.stop - entry.f.start
        b = np.zeros(nb)
        num = np.asarray(tf.num)[entry.delay:entry.delay + nb]
        b[:num.size] = num
        f = np.zeros(nf)
        den = np.asarray(tf.den)[1:1 + nf]
        f[:den.size] = den
        return np.concatenate([b, f])

    def layout(self) -> List[dict]:
        out = [{"entry": f"G_{e.to}{e.frm}", "delay": e.delay, "b": [e.b.start, e.b.stop], "f": [e.f.start, e.f.stop]}
               for e in self.g_entries]
        for r in self.noise_rows:
            out.append({"entry": f"H_row_{self.y_labels[r.row]}", "d": [r.d.start, r.d.stop],
                        "c": [[s.start, s.stop] for s in r.c]})
        return out


def _root_radius(poly: np.ndarray) -> float:
    poly = np.trim_zeros(np.asarray(poly, dtype=float), "b")
    if poly.size <= 1:
        return 0.0
    return float(np.max(np.abs(np.roots(poly))))


def _poly_det(M: List[List[np.ndarray]]) -> np.ndarray:
    n = len(M)
    if n == 1:
        return M[0][0]
    total = np.zeros(1)
    for l in range(n):
        minor = [row[:l] + row[l + 1:] for row in M[1:]]
        term = P.polymul(M[0][l], _poly_det(minor))
        total = P.polyadd(total, term) if l % 2 == 0 else P.polysub(total, term)
    return total


def _poly_adjugate(M: List[List[np.ndarray]]) -> List[List[np.ndarray]]:
    n = len(M)
    if n == 1:
        return [[np.ones(1)]]
    adj = [[np.zeros(1) for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for l in range(n):
            minor = [row[:k] + row[k + 1:] for m, row in enumerate(M) if m != l]
            d = _poly_det(minor)
            adj[k][l] = d if (k + l) % 2 == 0 else -d
    return adj


def _assemble(y_labels: List[int], d_labels: List[int], pairs: List[Tuple[int, int]], orders: Orders,
              delays: Dict[Tuple[int, int], int], **kwargs) -> ModelStructure:
    entries: List[GEntry] = []
    pos = 0
    for y, d in pairs:
        nb, nf = orders.for_entry((y, d))
        if nb == 0:
            continue
        entries.append(GEntry(to=y, frm=d, row=y_labels.index(y), col=d_labels.index(d), delay=delays[(y, d)],
                              b=slice(pos, pos + nb), f=slice(pos + nb, pos + nb + nf)))
        pos += nb + nf
    rows: List[NoiseRow] = []
    ny = len(y_labels)
    for k in range(ny):
        d = slice(pos, pos + orders.nd)
        pos += orders.nd
        cs = []
        for _ in range(ny):
            cs.append(slice(pos, pos + orders.nc))
            pos += orders.nc
        rows.append(NoiseRow(row=k, d=d, c=tuple(cs)))
    return ModelStructure(y_labels=y_labels, d_labels=d_labels, g_entries=entries, noise_rows=rows,
                          n_params=pos, **kwargs)


def _check_fixed_lambda(Lam: Optional[np.ndarray], ny: int) -> np.ndarray:
    if Lam is None:
        raise InputError("Lambda mode 'fixed' needs fixed_lambda")
    Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
    if Lam.shape != (ny, ny) or not np.allclose(Lam, Lam.T) or np.linalg.eigvalsh(Lam).min() <= 0:
        raise InputError(f"fixed_lambda must be a symmetric positive definite {ny} x {ny} matrix")
    return (Lam + Lam.T) / 2.0


def build_model_set(sel: Selection, orders: Orders, mode: str = "free",
                    delay_pattern: Optional[Mapping[Tuple[int, int], bool]] = None,
                    excitation: Optional[TransferMatrix] = None,
                    fixed_lambda: Optional[np.ndarray] = None) -> ModelStructure:
    """
    Model set for the predictor w_D -> w_Y of a selection.

    The o column is absent and the Q -> Q diagonal is never parameterized.
    An entry is strictly proper when `delay_pattern` (or the orders' own
    flags) says so; strictly proper is the default. With mode="fixed" the
    innovation covariance is `fixed_lambda` (rows in Q-then-o order) and is
    not estimated.
    """
    if mode not in ("free", "fixed"):
        raise InputError(f"unknown Lambda mode '{mode}'")
    if mode == "fixed":
        fixed_lambda = _check_fixed_lambda(fixed_lambda, len(sel.y_order))
    elif fixed_lambda is not None:
        raise InputError("fixed_lambda given for a model set with free Lambda")
    if orders.for_entry((sel.j, sel.i))[0] == 0:
        raise InputError("order 0 requested for the target entry", position="orders")
    y_labels, d_labels = sel.y_order, sel.d_order
    pattern = dict(orders.strictly_proper)
    if delay_pattern is not None:
        pattern.update(delay_pattern)
    pairs = [(y, d) for y in y_labels for d in d_labels if y != d]
    delays = {key: 1 if pattern.get(key, True) else 0 for key in pairs}
    ms = _assemble(y_labels, d_labels, pairs, orders, delays, lambda_mode=mode, fixed_lambda=fixed_lambda,
                   selection=sel, excitation=excitation)
    logger.debug("model set for Y=%s D=%s: %d parameters", y_labels, d_labels, ms.n_params)
    return ms


def _source_signals(ms: ModelStructure, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    wY = data.nodes(ms.y_labels)
    wD = data.nodes(ms.d_labels)
    if ms.excitation is not None and ms.excitation.shape[1]:
        if data.r.shape[0] != ms.excitation.shape[1]:
            raise InputError(f"dataset has {data.r.shape[0]} external signals, model expects "
                             f"{ms.excitation.shape[1]}")
        wY = wY - ms.excitation.filter(data.r)
    return wY, wD


def _errors(ms: ModelStructure, theta: np.ndarray, wY: np.ndarray, wD: np.ndarray) -> np.ndarray:
    s = np.array(wY, dtype=float, copy=True)
    for e, (b, f) in zip(ms.g_entries, ms.g_polynomials(theta)):
        s[e.row] -= signal.lfilter(b, f, wD[e.col])
    D, C = ms.noise_polynomials(theta)
    z = [signal.lfilter(D[k], [1.0], s[k]) for k in range(ms.ny)]
    det = _poly_det(C)
    adj = _poly_adjugate(C)
    eps = np.empty_like(s)
    for k in range(ms.ny):
        mixed = sum(signal.lfilter(adj[k][l], [1.0], z[l]) for l in range(ms.ny))
        eps[k] = signal.lfilter([1.0], det, mixed)
    return eps[:, ms.max_lag:]


def predict_errors(ms: ModelStructure, theta: np.ndarray, data: Dataset) -> np.ndarray:
    """
    xi(t, theta) = H(theta)^-1 [w_Y(t) - G(theta) w_D(t) - u(t)], first
    max_lag samples dropped. An unstable inverse noise filter is logged; the
    residuals are still returned.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size != ms.n_params:
        raise InputError(f"theta has {theta.size} entries, model set needs {ms.n_params}")
    if data.N <= ms.max_lag + 1:
        raise NumericalError("too-short data for the predictor", stage="estimation")
    if np.max(ms.root_radii(theta), initial=0.0) >= 1.0:
        logger.debug("predictor filters unstable at the given theta")
    wY, wD = _source_signals(ms, data)
    return _errors(ms, theta, wY, wD)


def criterion_value(ms: ModelStructure, theta: np.ndarray, data: Dataset,
                    W: Optional[np.ndarray] = None) -> float:
    """(1/N) sum eps^T W eps over the retained residual samples."""
    eps = predict_errors(ms, theta, data)
    W = np.eye(ms.ny) if W is None else np.atleast_2d(W)
    return float(np.einsum("it,ij,jt->", eps, W, eps) / eps.shape[1])


class _Objective:
    """Stacked, weighted residual vector with stability barrier terms."""

    def __init__(self, ms: ModelStructure, data: Dataset, W: np.ndarray, margin: float):
        self.ms = ms
        self.wY, self.wD = _source_signals(ms, data)
        self.Wroot = np.linalg.cholesky(W).T
        self.margin = margin
        self.n_res = ms.ny * (data.N - ms.max_lag)
        self.barrier_hits = 0

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        radii = self.ms.root_radii(theta)
        if radii.max(initial=0.0) >= 1.0:
            return np.full(self.n_res + radii.size, UNSTABLE_RESIDUAL / np.sqrt(self.n_res + radii.size))
        eps = _errors(self.ms, theta, self.wY, self.wD)
        res = (self.Wroot @ eps).T.ravel() / np.sqrt(eps.shape[1])
        barrier = np.maximum(0.0, radii - (1.0 - self.margin)) / self.margin
        if np.any(barrier > 0):
            self.barrier_hits += 1
        return np.concatenate([res, barrier])


def _jacobian(fun, theta: np.ndarray, threads: int = 1) -> np.ndarray:
    """Central-difference Jacobian, one column per parameter."""

    def column(k: int) -> np.ndarray:
        h = 1e-6 * max(1.0, abs(theta[k]))
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        return (fun(up) - fun(down)) / (2.0 * h)

    if threads > 1 and theta.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(column, range(theta.size)))
    else:
        cols = [column(k) for k in range(theta.size)]
    return np.column_stack(cols) if cols else np.zeros((fun(theta).size, 0))


def _shrink(poly_coefs: np.ndarray, lam: float) -> np.ndarray:
    return poly_coefs * lam ** np.arange(1, poly_coefs.size + 1)


def _stabilize(ms: ModelStructure, theta: np.ndarray, lam: float = 0.9, rounds: int = 60) -> np.ndarray:
    """Scale the roots of every unstable F, D and det(I + C) towards the origin."""
    theta = theta.copy()
    for _ in range(rounds):
        radii = ms.root_radii(theta)
        if radii.max(initial=0.0) < 0.98:
            return theta
        n_g = len(ms.g_entries)
        for k, e in enumerate(ms.g_entries):
            if radii[k] >= 0.98:
                theta[e.f] = _shrink(theta[e.f], lam)
        for k, r in enumerate(ms.noise_rows):
            if radii[n_g + k] >= 0.98:
                theta[r.d] = _shrink(theta[r.d], lam)
        if radii[-1] >= 0.98:
            for r in ms.noise_rows:
                for s in r.c:
                    theta[s] = _shrink(theta[s], lam)
    return theta


def _lagged(x: np.ndarray, lags: Sequence[int], start: int) -> np.ndarray:
    N = x.shape[-1]
    return np.vstack([x[..., start - lag:N - lag] for lag in lags])


def _prony(g: np.ndarray, delay: int, nb: int, nf: int) -> np.ndarray:
    """Fit q^-delay B/F of the given orders to an impulse response g."""
    n = g.size
    if nf:
        rows = range(delay + nb, n)
        A = np.array([[g[t - i] if t - i >= 0 else 0.0 for i in range(1, nf + 1)] for t in rows])
        rhs = -np.array([g[t] for t in rows])
        f = np.linalg.lstsq(A, rhs, rcond=None)[0] if A.size else np.zeros(nf)
    else:
        f = np.zeros(0)
    full_f = np.concatenate([[1.0], f])
    b = np.array([sum(full_f[i] * g[t - i] for i in range(nf + 1) if t - i >= 0)
                  for t in range(delay, delay + nb)])
    return np.concatenate([b, f])


def initial_estimate(ms: ModelStructure, data: Dataset, config: EstimatorConfig = EstimatorConfig()) -> np.ndarray:
    """
    Linear pre-estimate: FIR fit of every G row, high-order VAR on the
    output residual for innovation estimates, then equation-error fits of
    the noise rows and a Prony reduction of each FIR to the requested orders.
    """
    wY, wD = _source_signals(ms, data)
    n_fir, n_var = config.fir_length, config.arx_order
    start = max(n_fir, n_var) + 1
    if data.N <= 4 * start:
        raise NumericalError("too-short data for the initial estimate", stage="estimation")
    theta = np.zeros(ms.n_params)

    s = np.array(wY, copy=True)
    for k in range(ms.ny):
        entries = [e for e in ms.g_entries if e.row == k]
        if not entries:
            continue
        blocks = [_lagged(wD[e.col], range(e.delay, n_fir), start) for e in entries]
        Phi = np.vstack(blocks).T
        coef = np.linalg.lstsq(Phi, wY[k, start:], rcond=None)[0]
        pos = 0
        for e in entries:
            width = n_fir - e.delay
            g = np.concatenate([np.zeros(e.delay), coef[pos:pos + width]])
            pos += width
            nb, nf = e.b.stop - e.b.start, e.f.stop - e.f.start
            theta[e.b.start:e.f.stop] = _prony(g, e.delay, nb, nf)
            s[k] -= signal.lfilter(g, [1.0], wD[e.col])
    theta = _stabilize(ms, theta)

    Phi = _lagged(s, range(1, n_var + 1), start).T
    A = np.linalg.lstsq(Phi, s[:, start:].T, rcond=None)[0]
    innov = np.zeros_like(s)
    innov[:, start:] = s[:, start:] - (Phi @ A).T
    for r in ms.noise_rows:
        nd, k = r.d.stop - r.d.start, r.row
        nc = r.c[0].stop - r.c[0].start if r.c else 0
        cols = []
        if nd:
            cols.append(-_lagged(s[k], range(1, nd + 1), 2 * start))
        if nc:
            for l in range(ms.ny):
                cols.append(_lagged(innov[l], range(1, nc + 1), 2 * start))
        if not cols:
            continue
        Phi = np.vstack(cols).T
        target = s[k, 2 * start:] - innov[k, 2 * start:]
        coef = np.linalg.lstsq(Phi, target, rcond=None)[0]
        theta[r.d] = coef[:nd]
        for l, sl in enumerate(r.c):
            theta[sl] = coef[nd + l * nc: nd + (l + 1) * nc]
    return _stabilize(ms, theta)


@dataclass(eq=False)
class Estimate:
    structure: ModelStructure
    theta: np.ndarray
    G: TransferMatrix
    H: TransferMatrix
    Lambda: np.ndarray
    criterion: float
    criterion_kind: str
    weighting: np.ndarray
    residuals: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    std_errors: Optional[np.ndarray] = None

    def target_coefficients(self, j: int, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """(num, den) of the fitted G_ji, numerator including its leading delay."""
        entry = self.structure.entry(j, i)
        return self.structure.g_polynomials(self.theta)[self.structure.g_entries.index(entry)]

    def entry_parameters(self, j: int, i: int) -> np.ndarray:
        e = self.structure.entry(j, i)
        return self.theta[e.b.start:e.f.stop].copy()

    def to_dict(self) -> dict:
        ms = self.structure
        return {
            "criterion": {"kind": self.criterion_kind, "value": self.criterion},
            "theta": [float(v) for v in self.theta],
            "std_errors": None if self.std_errors is None else [float(v) for v in self.std_errors],
            "std_errors_note": "approximate (sandwich)",
            "Lambda": [[float(v) for v in row] for row in self.Lambda],
            "layout": ms.layout(),
            "G": self.G.coefficient_table(ms.y_labels, ms.d_labels),
            "H": self.H.coefficient_table(ms.y_labels, ms.y_labels),
            "residual_length": int(self.residuals.shape[1]),
            "diagnostics": self.diagnostics,
        }


def _sandwich(fun: _Objective, theta: np.ndarray, threads: int) -> Optional[np.ndarray]:
    J = _jacobian(fun, theta, threads)[:fun.n_res]
    f = fun(theta)[:fun.n_res]
    ny = fun.ms.ny
    A = J.T @ J
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return None
    scores = (J * f[:, None]).reshape(-1, ny, J.shape[1]).sum(axis=1)
    B = scores.T @ scores
    cov = Ainv @ B @ Ainv
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _finish(ms: ModelStructure, theta: np.ndarray, data: Dataset, W: np.ndarray, kind: str,
            diagnostics: dict, std_errors: Optional[np.ndarray]) -> Estimate:
    eps = predict_errors(ms, theta, data)
    Lam = eps @ eps.T / eps.shape[1]
    if kind == "ml":
        value = float(np.linalg.det(Lam))
    else:
        value = float(np.einsum("it,ij,jt->", eps, W, eps) / eps.shape[1])
    return Estimate(structure=ms, theta=theta, G=ms.G(theta), H=ms.H(theta), Lambda=Lam, criterion=value,
                    criterion_kind=kind, weighting=W, residuals=eps, diagnostics=diagnostics,
                    std_errors=std_errors)


def identify_wls(ms: ModelStructure, data: Dataset, W: Optional[np.ndarray] = None,
                 config: EstimatorConfig = EstimatorConfig(), seed: int = 0,
                 x0: Optional[np.ndarray] = None) -> Estimate:
    """
    Minimize (1/N) sum eps^T W eps by Levenberg-Marquardt from several starts:
    one from the linear pre-estimate (or x0), the rest random perturbations.
    """
    W = np.eye(ms.ny) if W is None else np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape != (ms.ny, ms.ny) or not np.allclose(W, W.T) or np.linalg.eigvalsh(W).min() <= 0:
        raise InputError("weighting matrix must be symmetric positive definite")
    fun = _Objective(ms, data, W, config.barrier_margin)
    base = x0 if x0 is not None else initial_estimate(ms, data, config)
    rng = np.random.Generator(np.random.Philox(seed))
    starts = [np.asarray(base, dtype=float)]
    for _ in range(config.starts - 1):
        scale = 0.2 * np.maximum(np.abs(base), 0.1)
        starts.append(_stabilize(ms, base + scale * rng.standard_normal(base.size)))

    best, runs = None, []
    for n, x in enumerate(starts):
        try:
            res = optimize.least_squares(fun, x, jac=lambda t: _jacobian(fun, t, config.threads), method="lm",
                                         xtol=config.step_tol, gtol=config.gradient_tol,
                                         max_nfev=config.max_nfev)
        except (ValueError, np.linalg.LinAlgError) as e:
            logger.warning("[estimation] start %d failed: %s", n, e)
            runs.append({"start": n, "status": "failed"})
            continue
        cost = float(np.sum(res.fun ** 2))
        runs.append({"start": n, "status": int(res.status), "cost": cost, "nfev": int(res.nfev)})
        if best is None or cost < best[0]:
            best = (cost, res)
    if best is None:
        raise NumericalError("every optimizer start failed", stage="estimation")
    res = best[1]
    converged = res.status > 0
    if not converged:
        logger.warning("[estimation] no start converged, returning the best point")
    if fun.barrier_hits:
        logger.warning("[estimation] stability barrier active in %d evaluations", fun.barrier_hits)
    diagnostics = {"starts": runs, "converged": bool(converged), "nfev": int(res.nfev),
                   "message": str(res.message), "barrier_hits": fun.barrier_hits,
                   "stable": bool(ms.root_radii(res.x).max(initial=0.0) < 1.0)}
    se = _sandwich(fun, res.x, config.threads)
    return _finish(ms, res.x, data, W, "wls", diagnostics, se)


def identify_ml(ms: ModelStructure, data: Dataset, config: EstimatorConfig = EstimatorConfig(),
                seed: int = 0) -> Estimate:
    """
    Determinant criterion det((1/N) sum eps eps^T) through iteratively
    reweighted WLS with W = Lambda^-1; Lambda is the residual sample
    covariance at the returned theta.

    With a fixed Lambda the Gaussian likelihood reduces to one WLS fit with
    W = Lambda^-1; the criterion is then (1/N) sum eps^T W eps + log det Lambda.
    """
    if ms.lambda_mode == "fixed":
        W = np.linalg.inv(ms.fixed_lambda)
        est = identify_wls(ms, data, (W + W.T) / 2.0, config, seed)
        value = est.criterion + float(np.linalg.slogdet(ms.fixed_lambda)[1])
        diagnostics = dict(est.diagnostics, ml_iterations=0, fixed_lambda=True)
        return replace(est, Lambda=ms.fixed_lambda.copy(), criterion=value, criterion_kind="ml",
                       diagnostics=diagnostics)
    est = identify_wls(ms, data, None, config, seed)
    logdet = np.linalg.slogdet(est.Lambda)[1]
    ridged = False
    history = [float(logdet)]
    single = replace(config, starts=1)
    for _ in range(config.ml_max_iter):
        Lam = est.Lambda
        if np.linalg.eigvalsh(Lam).min() <= RIDGE:
            logger.warning("[estimation] singular residual covariance, adding ridge %.0e", RIDGE)
            Lam = Lam + RIDGE * np.eye(ms.ny)
            ridged = True
        W = np.linalg.inv(Lam)
        W = (W + W.T) / 2.0
        nxt = identify_wls(ms, data, W, single, seed, x0=est.theta)
        new_logdet = np.linalg.slogdet(nxt.Lambda)[1]
        history.append(float(new_logdet))
        change = abs(new_logdet - logdet) / max(1.0, abs(logdet))
        est, logdet = nxt, new_logdet
        if change < config.ml_tol:
            break
    diagnostics = dict(est.diagnostics, ml_iterations=len(history) - 1, logdet_history=history, ridge=ridged)
    out = _finish(ms, est.theta, data, est.weighting, "ml", diagnostics, est.std_errors)
    if ridged and np.linalg.eigvalsh(out.Lambda).min() <= RIDGE:
        out.Lambda = out.Lambda + RIDGE * np.eye(ms.ny)
    return out


@dataclass(frozen=True)
class MisoSetup:
    """Single-output predictor for node j from inputs Dj; i marks the module of interest."""

    j: int
    i: int
    inputs: Tuple[int, ...]

    def __post_init__(self):
        if self.j in self.inputs:
            raise InputError(f"output {self.j} cannot be one of its own inputs")
        if self.i not in self.inputs:
            raise InputError(f"module input {self.i} must be among the inputs {list(self.inputs)}")


def miso_model_set(j: int, inputs: Sequence[int], orders: Orders,
                   excitation: Optional[TransferMatrix] = None) -> ModelStructure:
    inputs = sorted(inputs)
    if j in inputs:
        raise InputError(f"output {j} cannot be one of its own inputs")
    pairs = [(j, d) for d in inputs]
    delays = {key: 1 if orders.strictly_proper.get(key, True) else 0 for key in pairs}
    return _assemble([j], inputs, pairs, orders, delays, lambda_mode="free", excitation=excitation)


def miso_direct(data: Dataset, j: int, inputs: Sequence[int], orders: Orders,
                excitation: Optional[TransferMatrix] = None, config: EstimatorConfig = EstimatorConfig(),
                seed: int = 0) -> Estimate:
    """Scalar-output direct method w_j from w_Dj with a scalar monic noise model."""
    ms = miso_model_set(j, inputs, orders, excitation)
    return identify_wls(ms, data, None, config, seed)


def residual_whiteness(residuals: np.ndarray, lags: int = 20) -> float:
    """Share of autocorrelation values at lags 1..lags inside +-3/sqrt(N), over all rows."""
    residuals = np.atleast_2d(residuals)
    N = residuals.shape[1]
    band = 3.0 / np.sqrt(N)
    inside = []
    for x in residuals:
        x = x - x.mean()
        r0 = float(x @ x)
        for lag in range(1, lags + 1):
            inside.append(abs(float(x[lag:] @ x[:-lag]) / r0) <= band)
    return float(np.mean(inside))


def criterion_gradient(ms: ModelStructure, theta: np.ndarray, data: Dataset,
                       W: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient of the WLS criterion, 2 J^T f with J the central-difference residual Jacobian."""
    W = np.eye(ms.ny) if W is None else np.atleast_2d(W)
    fun = _Objective(ms, data, W, margin=1e-12)
    theta = np.asarray(theta, dtype=float)
    J = _jacobian(fun, theta)[:fun.n_res]
    f = fun(theta)[:fun.n_res]
    return 2.0 * J.T @ f
