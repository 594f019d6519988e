"""
Discrete-time rational transfer functions, transfer matrices and state-space
realizations.

Scalar transfers are stored as polynomial ratios in the backward shift q^-1
(coefficients in ascending powers of q^-1, denominator constant term 1).
Matrix algebra (sums, products, inverses) is routed through minimal
state-space realizations; entries are recovered per input/output pair from a
minimal SISO realization.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import signal

from tools.errors import InputError, NumericalError

logger = logging.getLogger(__name__)

STABILITY_MARGIN = 1e-8
REDUCTION_TOL = 1e-9
FEEDTHROUGH_TOL = 1e-12
POLE_PROXIMITY_TOL = 1e-10


def _trim_trailing(coefs: np.ndarray, rel_tol: float = 1e-13) -> np.ndarray:
    """Drop trailing (highest-lag) near-zero coefficients, keep at least one."""
    if coefs.size <= 1:
        return coefs
    scale = max(1.0, float(np.max(np.abs(coefs))))
    last = coefs.size
    while last > 1 and abs(coefs[last - 1]) <= rel_tol * scale:
        last -= 1
    return coefs[:last]


def _pad_pair(num: np.ndarray, den: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    size = max(num.size, den.size)
    return (np.concatenate([num, np.zeros(size - num.size)]),
            np.concatenate([den, np.zeros(size - den.size)]))


class RationalTransfer:
    """
    Scalar proper rational transfer B(q)/A(q) in the delay operator q^-1.

    Args:
        num: numerator coefficients, ascending powers of q^-1
        den: denominator coefficients, ascending powers of q^-1; den[0] != 0,
            normalised to 1 on construction
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Iterable[float], den: Iterable[float] = (1.0,)):
        num_arr = np.atleast_1d(np.asarray(num, dtype=float)).astype(float)
        den_arr = np.atleast_1d(np.asarray(den, dtype=float)).astype(float)
        if den_arr.size == 0 or den_arr[0] == 0.0:
            raise InputError("denominator constant term must be nonzero")
        if not (np.all(np.isfinite(num_arr)) and np.all(np.isfinite(den_arr))):
            raise InputError("transfer coefficients must be finite")
        if num_arr.size == 0:
            num_arr = np.zeros(1)
        if den_arr[0] != 1.0:
            num_arr = num_arr / den_arr[0]
            den_arr = den_arr / den_arr[0]
        num_arr = _trim_trailing(num_arr)
        den_arr = _trim_trailing(den_arr)
        if np.all(num_arr == 0.0):
            num_arr, den_arr = np.zeros(1), np.ones(1)
        num_arr.setflags(write=False)
        den_arr.setflags(write=False)
        self.num = num_arr
        self.den = den_arr

    # constructors
    @classmethod
    def zero(cls) -> "RationalTransfer":
        return cls([0.0])

    @classmethod
    def one(cls) -> "RationalTransfer":
        return cls([1.0])

    @classmethod
    def from_coefficients(cls, num: Iterable[float], den: Iterable[float] = (1.0,)) -> "RationalTransfer":
        return cls(num, den)

    @classmethod
    def constant(cls, value: float) -> "RationalTransfer":
        return cls([float(value)])

    @classmethod
    def delay(cls, k: int = 1, gain: float = 1.0) -> "RationalTransfer":
        return cls(np.concatenate([np.zeros(k), [gain]]))

    # properties
    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.num == 0.0))

    @property
    def order(self) -> int:
        return max(self.num.size, self.den.size) - 1

    def feedthrough(self) -> float:
        return float(self.num[0])

    def strictly_proper(self) -> bool:
        return abs(self.num[0]) <= FEEDTHROUGH_TOL

    def delay_count(self) -> int:
        """Number of leading zero numerator coefficients (pure delays)."""
        if self.is_zero:
            return 0
        nz = np.flatnonzero(np.abs(self.num) > FEEDTHROUGH_TOL)
        return int(nz[0])

    def poles(self) -> np.ndarray:
        if self.den.size <= 1:
            return np.zeros(0, dtype=complex)
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        if self.is_zero:
            return np.zeros(0, dtype=complex)
        stripped = self.num[self.delay_count():]
        if stripped.size <= 1:
            return np.zeros(0, dtype=complex)
        return np.roots(stripped)

    def is_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        poles = self.poles()
        return bool(poles.size == 0 or np.max(np.abs(poles)) < 1.0 - margin)

    def is_minimum_phase(self, margin: float = STABILITY_MARGIN) -> bool:
        if self.is_zero or self.strictly_proper():
            return False
        zeros = np.roots(self.num) if self.num.size > 1 else np.zeros(0)
        return bool(zeros.size == 0 or np.max(np.abs(zeros)) < 1.0 - margin)

    # evaluation
    def evaluate(self, z: complex) -> complex:
        zinv = 1.0 / z
        return complex(P.polyval(zinv, self.num) / P.polyval(zinv, self.den))

    def frequency_response(self, grid: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate at z = e^{jw} for each w in grid.

        Returns:
            (values, flags): complex values and a boolean flag per point that
            is True where the point sits on (or numerically at) a pole.
        """
        zinv = np.exp(-1j * np.asarray(grid, dtype=float))
        den_val = P.polyval(zinv, self.den)
        num_val = P.polyval(zinv, self.num)
        scale = max(1.0, float(np.sum(np.abs(self.den))))
        flags = np.abs(den_val) <= POLE_PROXIMITY_TOL * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(flags, np.nan + 0j, num_val / np.where(flags, 1.0, den_val))
        return values, flags

    def impulse_response(self, n: int) -> np.ndarray:
        impulse = np.zeros(n)
        impulse[0] = 1.0
        return self.filter(impulse)

    def filter(self, x: np.ndarray) -> np.ndarray:
        """Filter x with zero initial conditions."""
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        if self.den.size <= 3:
            return signal.lfilter(self.num, self.den, x)
        b, a = _pad_pair(np.asarray(self.num), np.asarray(self.den))
        sos = signal.tf2sos(b, a)
        return signal.sosfilt(sos, x)

    # algebra (exact polynomial arithmetic, no cancellation)
    def __add__(self, other) -> "RationalTransfer":
        other = _as_transfer(other)
        if self.den.size == other.den.size and np.array_equal(self.den, other.den):
            return RationalTransfer(P.polyadd(self.num, other.num), self.den)
        return RationalTransfer(
            P.polyadd(P.polymul(self.num, other.den), P.polymul(other.num, self.den)),
            P.polymul(self.den, other.den),
        )

    __radd__ = __add__

    def __neg__(self) -> "RationalTransfer":
        return RationalTransfer(-np.asarray(self.num), self.den)

    def __sub__(self, other) -> "RationalTransfer":
        return self + (-_as_transfer(other))

    def __rsub__(self, other) -> "RationalTransfer":
        return _as_transfer(other) - self

    def __mul__(self, other) -> "RationalTransfer":
        other = _as_transfer(other)
        return RationalTransfer(P.polymul(self.num, other.num), P.polymul(self.den, other.den))

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalTransfer":
        """1 / self; requires nonzero feedthrough to stay proper."""
        if self.strictly_proper():
            raise NumericalError("inverse of a strictly proper transfer is not proper", stage="tf-algebra")
        return RationalTransfer(self.den, self.num)

    def __truediv__(self, other) -> "RationalTransfer":
        return self * _as_transfer(other).reciprocal()

    def reduce(self, tol: float = REDUCTION_TOL) -> "RationalTransfer":
        """Cancel common factors through a minimal realization."""
        return self.to_state_space().minimal(tol).siso_transfer()

    def to_state_space(self) -> "StateSpace":
        if self.den.size == 1 and self.num.size == 1:
            return StateSpace.static(np.array([[self.num[0]]]))
        b, a = _pad_pair(np.asarray(self.num), np.asarray(self.den))
        A, B, C, D = signal.tf2ss(b, a)
        return StateSpace(A, B, C, D)

    def coefficients(self) -> dict:
        return {"num": [float(c) for c in self.num], "den": [float(c) for c in self.den]}

    def __repr__(self) -> str:
        return f"RationalTransfer(num={list(np.round(self.num, 12))}, den={list(np.round(self.den, 12))})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalTransfer):
            return NotImplemented
        return (self.num.size == other.num.size and self.den.size == other.den.size
                and np.array_equal(self.num, other.num) and np.array_equal(self.den, other.den))

    __hash__ = None


def _as_transfer(value) -> RationalTransfer:
    if isinstance(value, RationalTransfer):
        return value
    if np.isscalar(value):
        return RationalTransfer.constant(float(value))
    raise TypeError(f"cannot combine RationalTransfer with {type(value).__name__}")


@dataclass(frozen=True)
class StateSpace:
    """x(t+1) = A x(t) + B u(t), y(t) = C x(t) + D u(t)"""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        A = np.asarray(self.A, dtype=float)
        A = np.atleast_2d(A) if A.size else np.zeros((0, 0))
        n = A.shape[0]
        if A.shape != (n, n):
            raise InputError(f"state matrix must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float).reshape(n, m)
        C = np.asarray(self.C, dtype=float).reshape(p, n)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @classmethod
    def static(cls, D: np.ndarray) -> "StateSpace":
        D = np.atleast_2d(np.asarray(D, dtype=float))
        p, m = D.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.D.shape

    # interconnections
    def __matmul__(self, other: "StateSpace") -> "StateSpace":
        """Series connection: (self @ other)(q) = self(q) other(q)."""
        if self.shape[1] != other.shape[0]:
            raise InputError(f"cannot multiply {self.shape} by {other.shape}")
        n1, n2 = self.n, other.n
        A = np.block([[other.A, np.zeros((n2, n1))],
                      [self.B @ other.C, self.A]])
        B = np.vstack([other.B, self.B @ other.D])
        C = np.hstack([self.D @ other.C, self.C])
        return StateSpace(A, B, C, self.D @ other.D)

    def __add__(self, other: "StateSpace") -> "StateSpace":
        if self.shape != other.shape:
            raise InputError(f"cannot add {self.shape} and {other.shape}")
        return StateSpace(_block_diag_rect([self.A, other.A]), np.vstack([self.B, other.B]),
                          np.hstack([self.C, other.C]), self.D + other.D)

    def __neg__(self) -> "StateSpace":
        return StateSpace(self.A, self.B, -self.C, -self.D)

    def __sub__(self, other: "StateSpace") -> "StateSpace":
        return self + (-other)

    def series(self, other: "StateSpace") -> "StateSpace":
        """self followed by other, i.e. other(q) self(q)."""
        return other @ self

    def parallel(self, other: "StateSpace") -> "StateSpace":
        return self + other

    @staticmethod
    def block_diag(systems: Sequence["StateSpace"]) -> "StateSpace":
        return StateSpace(_block_diag_rect([s.A for s in systems]),
                          _block_diag_rect([s.B for s in systems]),
                          _block_diag_rect([s.C for s in systems]),
                          _block_diag_rect([s.D for s in systems]))

    def scale_left(self, M: np.ndarray) -> "StateSpace":
        M = np.atleast_2d(M)
        return StateSpace(self.A, self.B, M @ self.C, M @ self.D)

    def scale_right(self, M: np.ndarray) -> "StateSpace":
        M = np.atleast_2d(M)
        return StateSpace(self.A, self.B @ M, self.C, self.D @ M)

    @staticmethod
    def hstack(systems: Sequence["StateSpace"]) -> "StateSpace":
        p = systems[0].shape[0]
        if any(s.shape[0] != p for s in systems):
            raise InputError("hstack requires equal output counts")
        return StateSpace(_block_diag_rect([s.A for s in systems]),
                          _block_diag_rect([s.B for s in systems]),
                          np.hstack([s.C for s in systems]),
                          np.hstack([s.D for s in systems]))

    @staticmethod
    def vstack(systems: Sequence["StateSpace"]) -> "StateSpace":
        m = systems[0].shape[1]
        if any(s.shape[1] != m for s in systems):
            raise InputError("vstack requires equal input counts")
        return StateSpace(_block_diag_rect([s.A for s in systems]),
                          np.vstack([s.B for s in systems]),
                          _block_diag_rect([s.C for s in systems]),
                          np.vstack([s.D for s in systems]))

    def select(self, rows: Sequence[int], cols: Sequence[int]) -> "StateSpace":
        rows, cols = list(rows), list(cols)
        return StateSpace(self.A, self.B[:, cols], self.C[rows, :], self.D[np.ix_(rows, cols)])

    def inverse(self) -> "StateSpace":
        p, m = self.shape
        if p != m:
            raise InputError(f"inverse requires a square system, got {self.shape}")
        cond = np.linalg.cond(self.D) if p else 1.0
        if not np.isfinite(cond) or cond > 1e12:
            raise NumericalError("singular feedthrough, no proper inverse exists", stage="tf-algebra")
        Dinv = np.linalg.inv(self.D)
        return StateSpace(self.A - self.B @ Dinv @ self.C, self.B @ Dinv, -Dinv @ self.C, Dinv)

    # analysis
    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A) if self.n else np.zeros(0, dtype=complex)

    def is_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        poles = self.poles()
        return bool(poles.size == 0 or np.max(np.abs(poles)) < 1.0 - margin)

    def spectral_radius(self) -> float:
        poles = self.poles()
        return float(np.max(np.abs(poles))) if poles.size else 0.0

    def frequency_response(self, grid: Sequence[float]) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        p, m = self.shape
        out = np.empty((grid.size, p, m), dtype=complex)
        eye = np.eye(self.n)
        for k, w in enumerate(grid):
            if self.n:
                out[k] = self.C @ np.linalg.solve(np.exp(1j * w) * eye - self.A, self.B) + self.D
            else:
                out[k] = self.D
        return out

    def minimal(self, tol: float = REDUCTION_TOL) -> "StateSpace":
        """
        Remove uncontrollable then unobservable modes by orthonormal projection
        onto the reachable (resp. observable) Krylov subspace.
        """
        if self.n == 0:
            return self
        V = _krylov_basis(self.A, self.B, tol)
        A1, B1, C1 = V.T @ self.A @ V, V.T @ self.B, self.C @ V
        if A1.shape[0] == 0:
            return StateSpace.static(self.D)
        W = _krylov_basis(A1.T, C1.T, tol)
        return StateSpace(W.T @ A1 @ W, W.T @ B1, C1 @ W, self.D)

    def siso_transfer(self) -> RationalTransfer:
        if self.shape != (1, 1):
            raise InputError(f"siso_transfer requires a 1x1 system, got {self.shape}")
        sys = self.minimal()
        if sys.n == 0:
            return RationalTransfer([sys.D[0, 0]])
        num, den = signal.ss2tf(sys.A, sys.B, sys.C, sys.D)
        num = np.real_if_close(np.asarray(num[0], dtype=complex)).real
        den = np.real_if_close(np.asarray(den, dtype=complex)).real
        scale = max(1.0, float(np.max(np.abs(num))), float(np.max(np.abs(den))))
        num = np.where(np.abs(num) <= 1e-13 * scale, 0.0, num)
        return RationalTransfer(num, den)


def _block_diag_rect(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def _krylov_basis(A: np.ndarray, B: np.ndarray, tol: float) -> np.ndarray:
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A, 2)) if n else 1.0, float(np.linalg.norm(B)) if B.size else 1.0)
    V = np.zeros((n, 0))
    block = B
    while V.shape[1] < n and block.size:
        for _ in range(2):
            block = block - V @ (V.T @ block)
        U, s, _ = np.linalg.svd(block, full_matrices=False)
        keep = s > tol * scale
        if not np.any(keep):
            break
        new = U[:, keep]
        V = np.hstack([V, new])
        block = A @ new
    return V


class TransferMatrix:
    """
    p x m matrix of RationalTransfer entries.

    A TransferMatrix built from a state-space realization keeps that
    realization and computes its entries lazily.
    """

    def __init__(self, entries: Optional[Sequence[Sequence[RationalTransfer]]] = None,
                 realization: Optional[StateSpace] = None, shape: Optional[Tuple[int, int]] = None):
        if entries is None and realization is None:
            raise InputError("TransferMatrix needs entries or a realization")
        if entries is not None:
            entries = [list(row) for row in entries]
            p = len(entries)
            m = len(entries[0]) if p else (shape[1] if shape else 0)
            if any(len(row) != m for row in entries):
                raise InputError("TransferMatrix rows must have equal length")
            for row in entries:
                for e in row:
                    if not isinstance(e, RationalTransfer):
                        raise InputError(f"TransferMatrix entries must be RationalTransfer, got {type(e).__name__}")
            self._shape = (p, m)
        else:
            self._shape = realization.shape
        if shape is not None and tuple(shape) != self._shape and entries is not None and len(entries):
            raise InputError(f"shape {shape} does not match entries {self._shape}")
        if shape is not None and entries is not None and not len(entries):
            self._shape = tuple(shape)
        self._entries = entries
        self._ss = realization

    # constructors
    @classmethod
    def zeros(cls, p: int, m: int) -> "TransferMatrix":
        return cls([[RationalTransfer.zero() for _ in range(m)] for _ in range(p)], shape=(p, m))

    @classmethod
    def identity(cls, n: int) -> "TransferMatrix":
        return cls.from_constant(np.eye(n))

    @classmethod
    def from_constant(cls, M: np.ndarray) -> "TransferMatrix":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls([[RationalTransfer.constant(v) for v in row] for row in M], shape=M.shape,
                   realization=StateSpace.static(M))

    @classmethod
    def from_state_space(cls, ss: StateSpace) -> "TransferMatrix":
        return cls(realization=ss)

    @classmethod
    def diagonal(cls, items: Sequence[RationalTransfer]) -> "TransferMatrix":
        n = len(items)
        return cls([[items[k] if k == l else RationalTransfer.zero() for l in range(n)] for k in range(n)],
                   shape=(n, n))

    @classmethod
    def block(cls, rows: Sequence[Sequence["TransferMatrix"]]) -> "TransferMatrix":
        """Assemble from a grid of conformable blocks."""
        height = sum(row[0].shape[0] for row in rows)
        width = sum(b.shape[1] for b in rows[0])
        if height == 0 or width == 0:
            return cls.zeros(height, width)
        row_systems = [StateSpace.hstack([b.to_state_space() for b in row if b.shape[1] > 0])
                       for row in rows if row[0].shape[0] > 0]
        return cls.from_state_space(StateSpace.vstack(row_systems).minimal())

    # access
    @property
    def shape(self) -> Tuple[int, int]:
        return self._shape

    @property
    def entries(self) -> List[List[RationalTransfer]]:
        if self._entries is None:
            ss = self._ss
            p, m = self._shape
            self._entries = [[ss.select([k], [l]).siso_transfer() for l in range(m)] for k in range(p)]
        return self._entries

    def __getitem__(self, index) -> RationalTransfer:
        k, l = index
        p, m = self._shape
        if not (0 <= k < p and 0 <= l < m):
            raise IndexError(f"entry ({k}, {l}) out of bounds for shape {self._shape}")
        return self.entries[k][l]

    def select(self, rows: Sequence[int], cols: Sequence[int]) -> "TransferMatrix":
        rows, cols = list(rows), list(cols)
        if self._entries is None:
            if not rows or not cols:
                return TransferMatrix.zeros(len(rows), len(cols))
            return TransferMatrix.from_state_space(self._ss.select(rows, cols).minimal())
        return TransferMatrix([[self._entries[k][l] for l in cols] for k in rows], shape=(len(rows), len(cols)))

    def to_state_space(self) -> StateSpace:
        if self._ss is None:
            p, m = self._shape
            blocks = []
            for k in range(p):
                for l in range(m):
                    entry = self._entries[k][l]
                    if entry.is_zero:
                        continue
                    ss = entry.to_state_space()
                    B = np.zeros((ss.n, m))
                    B[:, l] = ss.B[:, 0]
                    C = np.zeros((p, ss.n))
                    C[k, :] = ss.C[0, :]
                    D = np.zeros((p, m))
                    D[k, l] = ss.D[0, 0]
                    blocks.append(StateSpace(ss.A, B, C, D))
            if not blocks:
                self._ss = StateSpace.static(np.zeros((p, m)))
            else:
                total = blocks[0]
                for b in blocks[1:]:
                    total = total + b
                self._ss = total.minimal()
        return self._ss

    def feedthrough(self) -> np.ndarray:
        if self._ss is not None:
            return self._ss.D.copy()
        p, m = self._shape
        return np.array([[self._entries[k][l].feedthrough() for l in range(m)] for k in range(p)]).reshape(p, m)

    def is_monic(self, tol: float = 1e-10) -> bool:
        p, m = self._shape
        return p == m and np.allclose(self.feedthrough(), np.eye(p), atol=tol)

    def is_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        return self.to_state_space().is_stable(margin)

    def is_minimum_phase(self, margin: float = STABILITY_MARGIN) -> bool:
        p, m = self._shape
        if p != m:
            return False
        try:
            return self.to_state_space().inverse().is_stable(margin)
        except NumericalError:
            return False

    def frequency_response(self, grid: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """Entrywise rational evaluation; returns (values[grid, p, m], pole flags)."""
        grid = np.asarray(grid, dtype=float)
        p, m = self._shape
        values = np.zeros((grid.size, p, m), dtype=complex)
        flags = np.zeros((grid.size, p, m), dtype=bool)
        for k in range(p):
            for l in range(m):
                entry = self.entries[k][l]
                if entry.is_zero:
                    continue
                values[:, k, l], flags[:, k, l] = entry.frequency_response(grid)
        return values, flags

    def freqresp(self, grid: Sequence[float]) -> np.ndarray:
        """frequency_response values, raising if any point sits on a pole."""
        values, flags = self.frequency_response(grid)
        if np.any(flags):
            raise NumericalError("evaluation at a pole on the unit circle", stage="frequency-response")
        return values

    # algebra through state space
    def __add__(self, other: "TransferMatrix") -> "TransferMatrix":
        if self.shape != other.shape:
            raise InputError(f"cannot add {self.shape} and {other.shape}")
        if 0 in self.shape:
            return TransferMatrix.zeros(*self.shape)
        return TransferMatrix.from_state_space((self.to_state_space() + other.to_state_space()).minimal())

    def __neg__(self) -> "TransferMatrix":
        if 0 in self.shape:
            return self
        return TransferMatrix.from_state_space(-self.to_state_space())

    def __sub__(self, other: "TransferMatrix") -> "TransferMatrix":
        return self + (-other)

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        if self.shape[1] != other.shape[0]:
            raise InputError(f"cannot multiply {self.shape} by {other.shape}")
        if 0 in (self.shape[0], other.shape[1]):
            return TransferMatrix.zeros(self.shape[0], other.shape[1])
        if self.shape[1] == 0:
            return TransferMatrix.zeros(self.shape[0], other.shape[1])
        return TransferMatrix.from_state_space((self.to_state_space() @ other.to_state_space()).minimal())

    def scale(self, left: Optional[np.ndarray] = None, right: Optional[np.ndarray] = None) -> "TransferMatrix":
        ss = self.to_state_space()
        if left is not None:
            ss = ss.scale_left(left)
        if right is not None:
            ss = ss.scale_right(right)
        return TransferMatrix.from_state_space(ss.minimal())

    def inv(self) -> "TransferMatrix":
        p, m = self.shape
        if p != m:
            raise InputError(f"inverse requires a square matrix, got {self.shape}")
        if p == 0:
            return self
        return TransferMatrix.from_state_space(self.to_state_space().inverse().minimal())

    def transpose(self) -> "TransferMatrix":
        p, m = self.shape
        if self._entries is None:
            ss = self._ss
            return TransferMatrix.from_state_space(StateSpace(ss.A.T, ss.C.T, ss.B.T, ss.D.T))
        return TransferMatrix([[self._entries[k][l] for k in range(p)] for l in range(m)], shape=(m, p))

    def diag_part(self) -> "TransferMatrix":
        p, m = self.shape
        if p != m:
            raise InputError("diag_part requires a square matrix")
        return TransferMatrix.diagonal([self[k, k] for k in range(p)])

    def filter(self, signals: np.ndarray) -> np.ndarray:
        """Apply to signals (m x N) with zero initial conditions, entry by entry."""
        signals = np.atleast_2d(np.asarray(signals, dtype=float))
        p, m = self.shape
        if signals.shape[0] != m:
            raise InputError(f"expected {m} input signals, got {signals.shape[0]}")
        out = np.zeros((p, signals.shape[1]))
        for k in range(p):
            for l in range(m):
                entry = self.entries[k][l]
                if not entry.is_zero:
                    out[k] += entry.filter(signals[l])
        return out

    def max_order(self) -> int:
        p, m = self.shape
        return max([self.entries[k][l].order for k in range(p) for l in range(m)] or [0])

    def coefficient_table(self, labels_out: Sequence[int], labels_in: Sequence[int]) -> List[dict]:
        rows = []
        p, m = self.shape
        for k in range(p):
            for l in range(m):
                entry = self.entries[k][l]
                if entry.is_zero:
                    continue
                rows.append({"to": int(labels_out[k]), "from": int(labels_in[l]),
                             "num": [f"{c:.12f}" for c in entry.num],
                             "den": [f"{c:.12f}" for c in entry.den]})
        return rows

    def __repr__(self) -> str:
        return f"TransferMatrix(shape={self._shape})"


@dataclass(frozen=True)
class FrequencyResponse:
    values: np.ndarray
    flags: np.ndarray

    @property
    def ok(self) -> bool:
        return not bool(np.any(self.flags))


def frequency_response(M: TransferMatrix, grid: Sequence[float]) -> FrequencyResponse:
    """Entrywise evaluation of M at z = e^{jw}; grid values must lie in [0, pi]."""
    grid = np.asarray(grid, dtype=float)
    if grid.size and (grid.min() < 0.0 or grid.max() > np.pi + 1e-12):
        raise InputError("frequency grid must lie in [0, pi]")
    values, flags = M.frequency_response(grid)
    return FrequencyResponse(values=values, flags=flags)


def tf_algebra(op: str, *operands: TransferMatrix) -> TransferMatrix:
    """
    Dispatch for add | multiply | inverse on TransferMatrix operands.
    """
    if op == "add":
        result = operands[0]
        for other in operands[1:]:
            result = result + other
        return result
    if op == "multiply":
        result = operands[0]
        for other in operands[1:]:
            result = result @ other
        return result
    if op == "inverse":
        if len(operands) != 1:
            raise InputError("inverse takes exactly one operand")
        return operands[0].inv()
    raise InputError(f"unknown transfer algebra operation '{op}'")


def uniform_grid(n: int) -> np.ndarray:
    """n uniformly spaced frequencies on [0, pi]."""
    if n < 2:
        raise InputError("grid size must be at least 2")
    return np.linspace(0.0, np.pi, n)
