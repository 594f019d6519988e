"""
Immersion of unmeasured nodes, spectral factorization and the canonical
transformed network used by the MIMO direct predictor.

Node ordering inside every matrix: retained nodes are Q (sorted), then o
(if present), then U (sorted); predictor inputs D are Q then U.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from tools.errors import InputError, NumericalError
from tools.graph import Selection, build_graph, check_invariance_conditions, exists_path, find_confounders
from tools.network import NetworkSpec
from tools.transfer import FEEDTHROUGH_TOL, RationalTransfer, StateSpace, TransferMatrix, uniform_grid

logger = logging.getLogger(__name__)

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 20000
SINGULAR_SPECTRUM_TOL = 1e-10
STRUCTURAL_TOL = 1e-9


@dataclass(eq=False)
class ImmersedNetwork:
    """
    w_R = G w_R + R r + H e with cov(e) = I, after eliminating w_Z.

    `H` already carries chol(Lambda) of the original network, so its noise
    columns are unit-variance sources ordered as `noise_labels`.
    """

    selection: Selection
    retained: List[int]
    noise_labels: List[int]
    G: TransferMatrix
    H: TransferMatrix
    R: TransferMatrix
    Lambda: np.ndarray

    def index(self, label: int) -> int:
        return self.retained.index(label)


@dataclass(eq=False)
class TransformedNetwork:
    """
    w_Y = G w_D + R r + H xi_Y, cov(xi_Y) = Lambda, plus the U-row
    representation and diagnostics collected along the way.
    """

    selection: Selection
    y_labels: List[int]
    d_labels: List[int]
    u_labels: List[int]
    G: TransferMatrix
    H: TransferMatrix
    Lambda: np.ndarray
    R: TransferMatrix
    G_U: Optional[TransferMatrix] = None
    H_U: Optional[TransferMatrix] = None
    Lambda_U: Optional[np.ndarray] = None
    xi_cross_covariance: Optional[np.ndarray] = None
    immersed: Optional[ImmersedNetwork] = None
    factor: Optional[Tuple[TransferMatrix, np.ndarray]] = None
    stages: List[dict] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def entry(self, to: int, frm: int) -> RationalTransfer:
        """G entry for predicted output `to` and predictor input `frm` (labels)."""
        if to not in self.y_labels or frm not in self.d_labels:
            raise InputError(f"no transformed module G_{to}{frm} in this setup")
        return self.G[self.y_labels.index(to), self.d_labels.index(frm)]

    def uncorrelated_inputs(self, tol: float = STRUCTURAL_TOL) -> List[int]:
        """U nodes whose innovation has zero lag-0 covariance with xi_Y."""
        if self.xi_cross_covariance is None or not self.u_labels:
            return []
        scale = max(1.0, float(np.max(np.abs(self.Lambda))))
        cols = np.max(np.abs(self.xi_cross_covariance), axis=0) <= tol * scale
        return [u for u, ok in zip(self.u_labels, cols) if ok]

    def coefficient_table(self) -> dict:
        table = {"G": self.G.coefficient_table(self.y_labels, self.d_labels),
                 "H": self.H.coefficient_table(self.y_labels, self.y_labels),
                 "Lambda": [[f"{v:.12f}" for v in row] for row in self.Lambda]}
        if self.R.shape[1]:
            table["R"] = self.R.coefficient_table(self.y_labels, list(range(1, self.R.shape[1] + 1)))
        return table

    def to_dict(self) -> dict:
        return {"selection": self.selection.to_dict(), "y_order": self.y_labels, "d_order": self.d_labels,
                "stages": self.stages, "warnings": self.warnings,
                "uncorrelated_inputs": self.uncorrelated_inputs(),
                "xi_cross_covariance": None if self.xi_cross_covariance is None
                else [[float(v) for v in row] for row in self.xi_cross_covariance]}


def immerse(net: NetworkSpec, sel: Selection) -> ImmersedNetwork:
    """
    Eliminate w_Z: G_kh + G_kZ (I - G_ZZ)^-1 G_Zh and likewise for the noise
    map (scaled to unit covariance) and the excitation map.
    """
    if sel.L != net.L:
        raise InputError(f"selection is for L={sel.L}, network has L={net.L}")
    retained = sel.y_order + sorted(sel.U)
    Z = sorted(sel.Z)
    ri = [k - 1 for k in retained]
    zi = [k - 1 for k in Z]
    cols = ri + zi
    noise = net.H_scaled
    K = net.K

    G_RR = net.G.select(ri, ri)
    H_R = noise.select(ri, cols)
    R_R = net.R.select(ri, list(range(K)))
    if Z:
        try:
            loop = (TransferMatrix.identity(len(Z)) - net.G.select(zi, zi)).inv()
        except NumericalError as e:
            raise NumericalError(f"ill-posed immersion: {e.message}", stage="immerse") from e
        W = net.G.select(ri, zi) @ loop
        G_RR = G_RR + W @ net.G.select(zi, ri)
        H_R = H_R + W @ noise.select(zi, cols)
        if K:
            R_R = R_R + W @ net.R.select(zi, list(range(K)))
    logger.debug("immersed %s over Z=%s", retained, Z)
    return ImmersedNetwork(selection=sel, retained=retained, noise_labels=retained + Z,
                           G=G_RR, H=H_R, R=R_R, Lambda=np.eye(len(cols)))


def _riccati_iteration(A, C, Q, R, S) -> np.ndarray:
    P = np.zeros_like(A)
    for _ in range(RICCATI_MAX_ITER):
        gain = (A @ P @ C.T + S) @ np.linalg.inv(C @ P @ C.T + R)
        P_next = A @ P @ A.T + Q - gain @ (A @ P @ C.T + S).T
        P_next = (P_next + P_next.T) / 2.0
        if np.max(np.abs(P_next - P)) <= RICCATI_TOL * max(1.0, float(np.max(np.abs(P_next)))):
            return P_next
        P = P_next
    raise NumericalError("Riccati iteration did not converge", stage="spectral-factorization")


def spectral_factorize(H: TransferMatrix, Lambda: np.ndarray,
                       check_grid: int = 64) -> Tuple[TransferMatrix, np.ndarray]:
    """
    Monic, stable, minimum-phase factor of Phi = H Lambda H*.

    Uses the innovations form of a realization of H chol(Lambda): with
    Q = B B^T, R = D D^T, S = B D^T, the filtering Riccati solution P gives
    Lambda~ = C P C^T + R, K = (A P C^T + S) Lambda~^-1 and
    H~ = I + C (zI - A)^-1 K.

    Returns:
        (H~, Lambda~)
    """
    Lambda = np.atleast_2d(np.asarray(Lambda, dtype=float))
    p, m = H.shape
    if Lambda.shape != (m, m):
        raise InputError(f"Lambda is {Lambda.shape}, expected ({m}, {m})")
    try:
        chol = np.linalg.cholesky((Lambda + Lambda.T) / 2.0)
    except np.linalg.LinAlgError:
        raise NumericalError("noise covariance is not positive definite", stage="spectral-factorization")
    sys = (H.to_state_space().scale_right(chol)).minimal()

    grid = np.linspace(0.0, np.pi, check_grid)
    resp = sys.frequency_response(grid)
    spectra = resp @ np.conj(np.transpose(resp, (0, 2, 1)))
    floor = min(np.linalg.eigvalsh(s).min() for s in spectra)
    top = max(np.linalg.eigvalsh(s).max() for s in spectra)
    if floor <= SINGULAR_SPECTRUM_TOL * max(1.0, top):
        raise NumericalError("spectrum is singular on the unit circle", stage="spectral-factorization")

    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    R = D @ D.T
    if sys.n == 0:
        return TransferMatrix.identity(p), (R + R.T) / 2.0
    Q = B @ B.T
    S = B @ D.T
    try:
        P = linalg.solve_discrete_are(A.T, C.T, Q, R, s=S)
    except (ValueError, np.linalg.LinAlgError) as e:
        logger.warning("[spectral-factorization] DARE solver failed (%s), using fixed-point iteration", e)
        P = _riccati_iteration(A, C, Q, R, S)
    P = (P + P.T) / 2.0
    Lt = C @ P @ C.T + R
    Lt = (Lt + Lt.T) / 2.0
    K = (A @ P @ C.T + S) @ np.linalg.inv(Lt)
    factor = StateSpace(A, K, C, np.eye(p)).minimal()
    if not factor.is_stable():
        raise NumericalError("spectral factor is unstable", stage="spectral-factorization")
    if not factor.inverse().is_stable():
        logger.warning("[spectral-factorization] DARE solution not stabilizing, retrying by iteration")
        P = _riccati_iteration(A, C, Q, R, S)
        Lt = C @ P @ C.T + R
        Lt = (Lt + Lt.T) / 2.0
        K = (A @ P @ C.T + S) @ np.linalg.inv(Lt)
        factor = StateSpace(A, K, C, np.eye(p)).minimal()
        if not factor.inverse().is_stable():
            raise NumericalError("spectral factor is not minimum phase", stage="spectral-factorization")
    return TransferMatrix.from_state_space(factor), Lt


def _selector(rows: int, picks: Sequence[int]) -> TransferMatrix:
    """Constant matrix E with E[k, picks[k]] = 1 (rows x width)."""
    E = np.zeros((len(picks), rows))
    for k, p in enumerate(picks):
        E[k, p] = 1.0
    return TransferMatrix.from_constant(E)


def _with_zeros(M: TransferMatrix, cells: Iterable[Tuple[int, int]]) -> TransferMatrix:
    cells = list(cells)
    if not cells:
        return M
    p, m = M.shape
    grid = [[M[k, l] for l in range(m)] for k in range(p)]
    for k, l in cells:
        grid[k][l] = RationalTransfer.zero()
    return TransferMatrix(grid, shape=(p, m))


def _scalar_inverse(tf: RationalTransfer, stage: str) -> TransferMatrix:
    if abs(tf.feedthrough()) <= FEEDTHROUGH_TOL:
        raise NumericalError("inverse is not proper", stage=stage)
    return TransferMatrix([[tf]]).inv()


def _max_abs(M: TransferMatrix, grid: np.ndarray) -> float:
    if 0 in M.shape:
        return 0.0
    return float(np.max(np.abs(M.to_state_space().frequency_response(grid))))


def _stack(blocks: Sequence[TransferMatrix], width: int) -> TransferMatrix:
    kept = [[b] for b in blocks if b.shape[0] > 0]
    if not kept:
        return TransferMatrix.zeros(0, width)
    if width == 0:
        return TransferMatrix.zeros(sum(b[0].shape[0] for b in kept), 0)
    return TransferMatrix.block(kept)


def transform_to_canonical(imm: ImmersedNetwork, sel: Selection,
                           factor: Optional[Tuple[TransferMatrix, np.ndarray]] = None,
                           grid_size: int = 128) -> TransformedNetwork:
    """
    Rewrite the immersed network so that the noise on w_Y is decoupled from
    w_U, w_o is eliminated from the right-hand side, the Q -> Q block is
    hollow and the noise model is monic, stable and minimum phase.
    """
    Ht, Lt = factor if factor is not None else spectral_factorize(imm.H, imm.Lambda)
    y_labels = sel.y_order
    u_labels = sorted(sel.U)
    q_labels = sorted(sel.Q)
    d_labels = q_labels + u_labels
    nQ, nY, nU = len(q_labels), len(y_labels), len(u_labels)
    nR, nD, K = nY + nU, len(d_labels), imm.R.shape[1]
    Yi, Ui, Ri = list(range(nY)), list(range(nY, nR)), list(range(nR))
    Qi = list(range(nQ))
    Di = Qi + Ui
    G = imm.G
    grid = uniform_grid(grid_size)
    stages: List[dict] = []
    warnings: List[str] = []

    # (i) remove the xi_U coupling from the Y rows
    if nU:
        HUU_inv = Ht.select(Ui, Ui).inv()
        if not HUU_inv.is_stable():
            msg = "inverse of the U-block noise factor is unstable"
            logger.warning("[noise-decoupling] %s", msg)
            warnings.append(msg)
        Hc = Ht.select(Yi, Ui) @ HUU_inv
        E_U = _selector(nR, Ui)
        G1 = G.select(Yi, Ri) - Hc @ G.select(Ui, Ri) + Hc @ E_U
        H1 = Ht.select(Yi, Yi) - Hc @ Ht.select(Ui, Yi)
        R1 = imm.R.select(Yi, list(range(K))) - Hc @ imm.R.select(Ui, list(range(K)))
        residual = _max_abs(Ht.select(Yi, Ui) - Hc @ Ht.select(Ui, Ui), grid)
        coupled = [u for n, u in enumerate(u_labels) if _max_abs(Hc.select(Yi, [n]), grid) > STRUCTURAL_TOL]
    else:
        Hc = None
        G1 = G.select(Yi, Ri)
        H1 = Ht.select(Yi, Yi)
        R1 = imm.R.select(Yi, list(range(K)))
        residual, coupled = 0.0, []
    stages.append({"stage": "noise-decoupling", "coupled_inputs": coupled, "decoupling_residual": residual})

    # (ii) eliminate w_o from the right-hand side
    if sel.o is not None:
        oi = nY - 1
        scale = _scalar_inverse(RationalTransfer.one() - G1[oi, oi], "o-elimination")
        G_o = scale @ G1.select([oi], Di)
        H_o = scale @ H1.select([oi], Yi)
        R_o = scale @ R1.select([oi], list(range(K)))
        if nQ:
            link = G1.select(Qi, [oi])
            G_Q = G1.select(Qi, Di) + link @ G_o
            H_Q = H1.select(Qi, Yi) + link @ H_o
            R_Q = R1.select(Qi, list(range(K))) + (link @ R_o if K else TransferMatrix.zeros(nQ, 0))
        else:
            G_Q, H_Q, R_Q = TransferMatrix.zeros(0, nD), TransferMatrix.zeros(0, nY), TransferMatrix.zeros(0, K)
        stages.append({"stage": "o-elimination", "self_loop_feedthrough": G1[oi, oi].feedthrough()})
    else:
        G_o, H_o, R_o = TransferMatrix.zeros(0, nD), TransferMatrix.zeros(0, nY), TransferMatrix.zeros(0, K)
        G_Q = G1.select(Qi, Di)
        H_Q = H1.select(Qi, Yi)
        R_Q = R1.select(Qi, list(range(K)))

    # (iii) hollow Q -> Q block
    if nQ:
        diag = [G_Q[k, k] for k in Qi]
        if any(not d.is_zero for d in diag):
            inv = TransferMatrix.diagonal([RationalTransfer.one() - d for d in diag])
            if any(abs(1.0 - d.feedthrough()) <= FEEDTHROUGH_TOL for d in diag):
                raise NumericalError("Q self-loop has unit feedthrough", stage="q-hollowing")
            inv = inv.inv()
            D_ext = TransferMatrix.block([[TransferMatrix.diagonal(diag), TransferMatrix.zeros(nQ, nU)]]) \
                if nU else TransferMatrix.diagonal(diag)
            G_Q = inv @ (G_Q - D_ext)
            H_Q = inv @ H_Q
            if K:
                R_Q = inv @ R_Q
        G_Q = _with_zeros(G_Q, [(k, k) for k in Qi])
        stages.append({"stage": "q-hollowing", "self_loops": [q for q, d in zip(q_labels, diag) if not d.is_zero]})

    G_bar = _stack([G_Q, G_o], nD)
    H_r = _stack([H_Q, H_o], nY)
    R_bar = _stack([R_Q, R_o], K) if K else TransferMatrix.zeros(nY, 0)

    # (iv) monic, stable, minimum-phase noise model for the Y block
    LYY = Lt[np.ix_(Yi, Yi)]
    H_bar, L_bar = spectral_factorize(H_r, LYY)
    stages.append({"stage": "y-factorization", "order": H_bar.to_state_space().n})

    out = TransformedNetwork(selection=sel, y_labels=y_labels, d_labels=d_labels, u_labels=u_labels,
                             G=G_bar, H=H_bar, Lambda=L_bar, R=R_bar, immersed=imm, factor=(Ht, Lt),
                             stages=stages, warnings=warnings)

    # (v) U rows: decouple from xi_Y, hollow, refactor
    if nU:
        try:
            L_U = Ht.select(Ui, Yi) @ H_r.inv()
            E_D = _selector(nR, Di)
            E_Y = _selector(nR, Yi)
            G_U = G.select(Ui, Ri) - L_U @ (G_bar @ E_D) + L_U @ E_Y
            diag_u = [G_U[n, nY + n] for n in range(nU)]
            inv_u = TransferMatrix.diagonal([RationalTransfer.one() - d for d in diag_u]).inv()
            D_ext = TransferMatrix.block([[TransferMatrix.zeros(nU, nY), TransferMatrix.diagonal(diag_u)]])
            G_U = _with_zeros(inv_u @ (G_U - D_ext), [(n, nY + n) for n in range(nU)])
            H_UU = inv_u @ Ht.select(Ui, Ui)
            LUU = Lt[np.ix_(Ui, Ui)]
            H_U, L_Ucov = spectral_factorize(H_UU, LUU)
            full = np.linspace(0.0, 2.0 * np.pi, 4 * grid_size, endpoint=False)
            left = (H_bar.inv() @ H_r).to_state_space().frequency_response(full)
            right = (H_U.inv() @ H_UU).to_state_space().frequency_response(full)
            LYU = Lt[np.ix_(Yi, Ui)]
            cross = np.mean(left @ LYU @ np.conj(np.transpose(right, (0, 2, 1))), axis=0).real
            out.G_U, out.H_U, out.Lambda_U, out.xi_cross_covariance = G_U, H_U, L_Ucov, cross
            stages.append({"stage": "u-rows", "order": H_U.to_state_space().n})
        except NumericalError as e:
            msg = f"U-row representation unavailable: {e}"
            logger.warning("[u-rows] %s", msg)
            warnings.append(msg)
    return out


def transform_network(net: NetworkSpec, sel: Selection, grid_size: int = 128) -> TransformedNetwork:
    """immerse, factorize and transform in one call."""
    imm = immerse(net, sel)
    return transform_to_canonical(imm, sel, grid_size=grid_size)


def gbar_oracle(imm: ImmersedNetwork, sel: Selection,
                Htilde: Optional[TransferMatrix] = None) -> RationalTransfer:
    """
    Closed form of the transformed target module:
    (1 - G_jj + Hc_j G_Uj)^-1 (G_ji - Hc_j G_Ui [+ Hc_ji when i in U]),
    with Hc = H~_YU H~_UU^-1.
    """
    if Htilde is None:
        Htilde, _ = spectral_factorize(imm.H, imm.Lambda)
    j, i = sel.j, sel.i
    if j not in sel.Y or i not in sel.D:
        raise InputError("oracle needs j in Y and i in D")
    y_labels = sel.y_order
    u_labels = sorted(sel.U)
    nY = len(y_labels)
    jp, ip = imm.index(j), imm.index(i)
    G = imm.G
    lead = RationalTransfer.one() - G[jp, jp]
    num = G[jp, ip]
    if u_labels:
        Ui = list(range(nY, nY + len(u_labels)))
        Hc = Htilde.select([y_labels.index(j)], Ui) @ Htilde.select(Ui, Ui).inv()
        for n, u in enumerate(u_labels):
            h = Hc[0, n]
            if h.is_zero:
                continue
            up = imm.index(u)
            lead = lead + h * G[up, jp]
            num = num - h * G[up, ip]
        if i in sel.U:
            num = num + Hc[0, u_labels.index(i)]
    if abs(lead.feedthrough()) <= FEEDTHROUGH_TOL:
        raise NumericalError("leading inverse is not proper", stage="oracle")
    return (num * lead.reciprocal()).reduce()


@dataclass
class InvarianceReport:
    deviation: float
    tol: float
    conditions: dict
    transformed: dict
    target: dict
    grid_size: int

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tol

    def to_dict(self) -> dict:
        return {"passed": self.passed, "deviation": self.deviation, "tol": self.tol,
                "conditions": self.conditions, "transformed_module": self.transformed,
                "true_module": self.target, "grid_size": self.grid_size}


def verify_invariance(net: NetworkSpec, sel: Selection, tol: float = 1e-6, grid_size: int = 256,
                      transformed: Optional[TransformedNetwork] = None) -> InvarianceReport:
    """Max grid deviation between the transformed and the true target module."""
    tn = transformed if transformed is not None else transform_network(net, sel)
    grid = uniform_grid(grid_size)
    gbar = tn.entry(sel.j, sel.i)
    true = net.module(sel.j, sel.i)
    a, fa = gbar.frequency_response(grid)
    b, fb = true.frequency_response(grid)
    if np.any(fa) or np.any(fb):
        raise NumericalError("module has a pole on the unit circle", stage="invariance")
    deviation = float(np.max(np.abs(a - b)))
    conditions = check_invariance_conditions(net, sel).to_dict()
    logger.info("invariance deviation for G_%d%d: %.3e", sel.j, sel.i, deviation)
    return InvarianceReport(deviation=deviation, tol=tol, conditions=conditions,
                            transformed=gbar.coefficients(), target=true.coefficients(), grid_size=grid_size)


def second_order_check(net: NetworkSpec, sel: Selection, transformed: TransformedNetwork,
                       grid: Optional[np.ndarray] = None) -> float:
    """
    Max over the grid of |M Phi_w M* - H Lambda H*| with M = S_Y - G S_D,
    i.e. the spectrum of w_Y - G w_D against the transformed noise model.
    """
    grid = uniform_grid(128) if grid is None else np.asarray(grid, dtype=float)
    L = net.L
    Gw = net.G.freqresp(grid)
    Hw = net.H_scaled.freqresp(grid)
    Gb = transformed.G.freqresp(grid)
    Hb = transformed.H.freqresp(grid)
    S_Y = np.zeros((len(transformed.y_labels), L))
    for n, y in enumerate(transformed.y_labels):
        S_Y[n, y - 1] = 1.0
    S_D = np.zeros((len(transformed.d_labels), L))
    for n, d in enumerate(transformed.d_labels):
        S_D[n, d - 1] = 1.0
    worst = 0.0
    eye = np.eye(L)
    for k in range(grid.size):
        T = np.linalg.solve(eye - Gw[k], Hw[k])
        M = S_Y - Gb[k] @ S_D
        lhs = M @ T @ T.conj().T @ M.conj().T
        rhs = Hb[k] @ transformed.Lambda @ Hb[k].conj().T
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def noise_blocks_orthogonal(imm: ImmersedNetwork, Phi: Iterable[int], Omega: Iterable[int],
                            X: Optional[Iterable[int]] = None, grid: Optional[np.ndarray] = None) -> float:
    """Max over the grid of |H_Omega,X H*_Phi,X| for retained node sets Phi, Omega."""
    grid = uniform_grid(128) if grid is None else np.asarray(grid, dtype=float)
    Phi, Omega = sorted(Phi), sorted(Omega)
    if not Phi or not Omega:
        return 0.0
    cols = [imm.noise_labels.index(x) for x in (imm.noise_labels if X is None else sorted(X))]
    resp = imm.H.freqresp(grid)
    rows_phi = [imm.index(k) for k in Phi]
    rows_omega = [imm.index(k) for k in Omega]
    worst = 0.0
    for k in range(grid.size):
        a = resp[k][np.ix_(rows_omega, cols)]
        b = resp[k][np.ix_(rows_phi, cols)]
        worst = max(worst, float(np.max(np.abs(a @ b.conj().T))))
    return worst


def unconfounded_noise_check(net: NetworkSpec, sel: Selection, grid: Optional[np.ndarray] = None) -> Dict[str, float]:
    """
    For (A, Y) and (A, B) with no confounders, the cross-spectrum of the
    immersed disturbances must vanish; returns the observed maxima.
    """
    g = build_graph(net)
    imm = immerse(net, sel)
    out = {}
    for name, target in (("A->Y", sel.Y), ("A->B", sel.B)):
        if sel.A and target and not find_confounders(g, sel.A, target, sel.Z):
            out[name] = noise_blocks_orthogonal(imm, sel.A, target, grid=grid)
    return out


def delay_pattern_of(transformed: TransformedNetwork, tol: float = 1e-10) -> Dict[Tuple[int, int], bool]:
    """{(y, d): strictly proper} for every non-structural entry of G."""
    pattern = {}
    for n, y in enumerate(transformed.y_labels):
        for m, d in enumerate(transformed.d_labels):
            if y == d:
                continue
            pattern[(y, d)] = abs(transformed.G[n, m].feedthrough()) <= tol
    return pattern


def predicted_delay_pattern(net: NetworkSpec, sel: Selection) -> Dict[Tuple[int, int], bool]:
    """
    Graph prediction of the strictly proper entries: G_kd is strictly proper
    when every direct or unmeasured path d -> k (possibly through w_o) has a
    delay.
    """
    g = build_graph(net)
    interior = set(sel.Z) | ({sel.o} if sel.o is not None else set())
    pattern = {}
    for y in sel.y_order:
        for d in sel.d_order:
            if y == d:
                continue
            pattern[(y, d)] = not exists_path(g, d, y, interior - {y, d}, delay_free=True)
    return pattern
