"""Kets, density matrices and the measurement bases used by the protocols."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import linalg

NORM_TOL = 1e-12
PSD_TOL = 1e-10
RENORMALIZE_TOL = 1e-6

SQRT2 = math.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _qubit_count(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Ket:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size == 0 or not np.all(np.isfinite(amps)):
            raise ValueError("ket amplitudes must be finite and non-empty")
        _qubit_count(amps.size)
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"ket is not normalized (norm^2 = {norm2!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def normalized(cls, amplitudes) -> "Ket":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(amps))
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm)

    @property
    def n_qubits(self) -> int:
        return _qubit_count(self.amplitudes.size)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def overlap(self, other: "Ket") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self, other: "Ket") -> "Ket":
        return Ket.normalized(np.kron(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        v = self.amplitudes.reshape(-1, 1)
        return v @ v.conj().T

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector())


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = linalg.as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        _qubit_count(m.shape[0])
        if not linalg.is_hermitian(m, NORM_TOL):
            raise ValueError("density matrix is not Hermitian")
        tr = linalg.trace(m)
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        if min(linalg.eig_hermitian(m, NORM_TOL)) < -PSD_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_unnormalized(cls, m) -> "DensityMatrix":
        m = linalg.as_matrix(m)
        tr = linalg.trace(m).real
        if tr <= 0.0:
            raise ValueError("cannot normalize a matrix with non-positive trace")
        m = m / tr
        return cls(0.5 * (m + m.conj().T))

    @property
    def n_qubits(self) -> int:
        return _qubit_count(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(linalg.kron(self.matrix, other.matrix))

    def reduced(self, keep) -> "DensityMatrix":
        n = self.n_qubits
        return DensityMatrix(linalg.partial_trace(self.matrix, [2] * n, keep))


def input_state(alpha: complex, beta: complex) -> Ket:
    """alpha|0> + beta|1>, renormalized when the caller is off by <= 1e-6."""
    alpha, beta = complex(alpha), complex(beta)
    norm2 = abs(alpha) ** 2 + abs(beta) ** 2
    if norm2 == 0.0:
        raise ValueError("alpha and beta cannot both be zero")
    if abs(norm2 - 1.0) > RENORMALIZE_TOL:
        raise ValueError(f"|alpha|^2 + |beta|^2 = {norm2!r} is not 1")
    scale = 1.0 / math.sqrt(norm2)
    return Ket(np.array([alpha * scale, beta * scale]))


def input_from_population(x: float, phase_alpha: float = 0.0, phase_beta: float = 0.0) -> Ket:
    """Input with |alpha|^2 = x and the given relative phases."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"population {x!r} outside [0, 1]")
    a = math.sqrt(x) * cmath.exp(1j * phase_alpha)
    b = math.sqrt(1.0 - x) * cmath.exp(1j * phase_beta)
    return input_state(a, b)


def basis_ket(bits: str) -> Ket:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return Ket(v)


def w_state(n: float = 1.0, gamma: float = 0.0, delta: float = 0.0) -> Ket:
    """Three-qubit W-class state (|100> + sqrt(n)e^{ig}|010> + sqrt(n+1)e^{id}|001>)/sqrt(2+2n)."""
    if not n > 0:
        raise ValueError(f"W-state weight n must be positive, got {n!r}")
    v = np.zeros(8, dtype=complex)
    v[0b100] = 1.0
    v[0b010] = math.sqrt(n) * cmath.exp(1j * gamma)
    v[0b001] = math.sqrt(n + 1.0) * cmath.exp(1j * delta)
    return Ket.normalized(v / math.sqrt(2.0 + 2.0 * n))


def bell_state() -> Ket:
    return Ket(np.array([1, 0, 0, 1], dtype=complex) / SQRT2)


def eta_basis() -> list[Ket]:
    """Alice's three-qubit measurement basis for W-state teleportation."""
    rows = [
        {0b010: 0.5, 0b001: 0.5, 0b100: SQRT2 / 2},
        {0b010: 0.5, 0b001: 0.5, 0b100: -SQRT2 / 2},
        {0b110: 0.5, 0b101: 0.5, 0b000: SQRT2 / 2},
        {0b110: 0.5, 0b101: 0.5, 0b000: -SQRT2 / 2},
    ]
    kets = []
    for row in rows:
        v = np.zeros(8, dtype=complex)
        for idx, amp in row.items():
            v[idx] = amp
        kets.append(Ket(v))
    return kets


def bell_basis() -> list[Ket]:
    s = 1.0 / SQRT2
    return [
        Ket(np.array([s, 0, 0, s], dtype=complex)),
        Ket(np.array([s, 0, 0, -s], dtype=complex)),
        Ket(np.array([0, s, s, 0], dtype=complex)),
        Ket(np.array([0, s, -s, 0], dtype=complex)),
    ]


def fidelity(psi: Ket, rho: DensityMatrix) -> float:
    """<psi|rho|psi>, clipped into [0, 1] after rounding."""
    if psi.dim != rho.dim:
        raise ValueError(f"dimension mismatch: ket {psi.dim}, density matrix {rho.dim}")
    v = psi.amplitudes
    f = float(np.vdot(v, rho.matrix @ v).real)
    if f < -NORM_TOL or f > 1.0 + NORM_TOL:
        raise ValueError(f"fidelity {f!r} outside [0, 1]")
    return min(1.0, max(0.0, f))
