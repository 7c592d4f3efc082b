"""Kraus channels, environment-assisted post-selection and weak-measurement reversal."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg
from .linalg import NotInvertible
from .states import I2, SIGMA_X, SIGMA_Z, DensityMatrix, Ket

COMPLETENESS_TOL = 1e-12
UNITARY_TOL = 1e-12
ZERO_BRANCH_TOL = 1e-15


class ZeroProbabilityBranch(ArithmeticError):
    """The requested Kraus branch has (numerically) zero probability."""

    def __init__(self, label: str, probability: float):
        super().__init__(f"branch {label!r} has probability {probability:.3e}")
        self.label = label
        self.probability = probability


@dataclass(frozen=True, eq=False)
class KrausChannel:
    operators: tuple
    labels: tuple

    def __post_init__(self):
        ops = tuple(np.array(linalg.as_matrix(k)) for k in self.operators)
        labels = tuple(str(s) for s in self.labels)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        if len(labels) != len(ops):
            raise ValueError("one label per Kraus operator is required")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate Kraus labels: {labels}")
        dim = ops[0].shape[0]
        for k in ops:
            if k.shape != (dim, dim):
                raise ValueError("Kraus operators must be square and equally sized")
        total = sum(k.conj().T @ k for k in ops)
        err = float(np.max(np.abs(total - np.eye(dim))))
        if err > COMPLETENESS_TOL:
            raise ValueError(f"Kraus operators are not complete (max deviation {err:.3e})")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def __len__(self) -> int:
        return len(self.operators)

    def operator(self, label: str) -> np.ndarray:
        try:
            return self.operators[self.labels.index(label)]
        except ValueError:
            raise KeyError(f"unknown Kraus label {label!r}; have {self.labels}") from None


@dataclass(frozen=True, eq=False)
class WeakMeasurement:
    strength: float
    unitary: np.ndarray
    operator: np.ndarray

    def __post_init__(self):
        m = linalg.as_matrix(self.operator)
        top = max(linalg.eig_hermitian(m.conj().T @ m))
        if top > 1.0 + COMPLETENESS_TOL:
            raise ValueError(f"M^dag M has eigenvalue {top!r} > 1")
        m = np.array(m)
        m.setflags(write=False)
        object.__setattr__(self, "operator", m)
        object.__setattr__(self, "unitary", linalg.as_matrix(self.unitary))

    def failure_operator(self) -> np.ndarray:
        """Positive element completing the measurement: sqrt(I - M^dag M)."""
        m = self.operator
        rest = np.eye(m.shape[0]) - m.conj().T @ m
        w, v = np.linalg.eigh(0.5 * (rest + rest.conj().T))
        w = np.clip(w, 0.0, None)
        return (v * np.sqrt(w)) @ v.conj().T


def adc(r: float) -> KrausChannel:
    """Amplitude damping with decay probability r."""
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"decay probability r = {r!r} outside [0, 1]")
    e0 = np.array([[1, 0], [0, math.sqrt(1.0 - r)]], dtype=complex)
    e1 = np.array([[0, math.sqrt(r)], [0, 0]], dtype=complex)
    return KrausChannel((e0, e1), ("e0", "e1"))


def decay_probability(rate: float, t: float) -> float:
    """r = 1 - exp(-rate * t) for energy relaxation rate ``rate`` over time ``t``."""
    if rate < 0 or t < 0:
        raise ValueError("relaxation rate and time must be non-negative")
    return -math.expm1(-rate * t)


def adc_from_rate(rate: float, t: float) -> KrausChannel:
    return adc(decay_probability(rate, t))


def lift(channel: KrausChannel, targets: Sequence[int], n_qubits: int) -> KrausChannel:
    """Independent copies of a one-qubit channel acting on ``targets`` of an n-qubit register.

    Labels join the per-target labels with ``_`` in target order, so lifting
    ``adc`` onto qubits (0, 1) yields ``e0_e0, e0_e1, e1_e0, e1_e1``.
    """
    if channel.dim != 2:
        raise ValueError("only single-qubit channels can be lifted")
    targets = [int(t) for t in targets]
    if not targets:
        raise ValueError("at least one target qubit is required")
    if len(set(targets)) != len(targets):
        raise ValueError(f"target positions must be distinct: {targets}")
    if any(t < 0 or t >= n_qubits for t in targets):
        raise ValueError(f"targets {targets} out of range for {n_qubits} qubits")

    ops, labels = [], []
    for combo in itertools.product(range(len(channel)), repeat=len(targets)):
        per_qubit = [I2] * n_qubits
        for t, k in zip(targets, combo):
            per_qubit[t] = channel.operators[k]
        ops.append(linalg.kron_all(per_qubit))
        labels.append("_".join(channel.labels[k] for k in combo))
    return KrausChannel(tuple(ops), tuple(labels))


def _as_density(state) -> DensityMatrix:
    if isinstance(state, Ket):
        return state.density()
    if isinstance(state, DensityMatrix):
        return state
    raise TypeError(f"expected Ket or DensityMatrix, got {type(state).__name__}")


def apply_channel(channel: KrausChannel, rho) -> DensityMatrix:
    rho = _as_density(rho)
    if rho.dim != channel.dim:
        raise ValueError(f"channel dimension {channel.dim} does not match state {rho.dim}")
    out = sum(k @ rho.matrix @ k.conj().T for k in channel.operators)
    return DensityMatrix(0.5 * (out + out.conj().T))


def branch_probabilities(channel: KrausChannel, state) -> dict[str, float]:
    rho = _as_density(state)
    if rho.dim != channel.dim:
        raise ValueError(f"channel dimension {channel.dim} does not match state {rho.dim}")
    return {
        label: float(np.trace(k @ rho.matrix @ k.conj().T).real)
        for label, k in zip(channel.labels, channel.operators)
    }


def eam_select(channel: KrausChannel, state, branch: str) -> tuple[DensityMatrix, float]:
    """Keep only the environment outcome ``branch``; return the renormalized state and its probability."""
    rho = _as_density(state)
    if rho.dim != channel.dim:
        raise ValueError(f"channel dimension {channel.dim} does not match state {rho.dim}")
    k = channel.operator(branch)
    out = k @ rho.matrix @ k.conj().T
    p = float(np.trace(out).real)
    if p < ZERO_BRANCH_TOL:
        raise ZeroProbabilityBranch(branch, p)
    return DensityMatrix.from_unnormalized(out), p


def reversal_norm(k) -> float:
    """Smallest singular value of k, i.e. min sqrt(eig(k k^dag))."""
    k = linalg.as_matrix(k)
    lam = linalg.eig_hermitian(k @ k.conj().T)
    return math.sqrt(max(lam[0], 0.0))


def wm_reversal(k) -> np.ndarray:
    """Scaled inverse N k^-1 with N the smallest singular value of k."""
    k = linalg.as_matrix(k)
    if k.shape != (2, 2):
        raise ValueError("wm_reversal is defined for 2x2 Kraus operators")
    inv = linalg.inverse_2x2(k)
    return reversal_norm(k) * inv


CORRECTIONS = (I2, SIGMA_Z, SIGMA_X, SIGMA_X @ SIGMA_Z)

WM_VARIANTS = ("sqrt", "linear")


def wm_operator(q: float, branch: int, variant: str = "sqrt") -> WeakMeasurement:
    """Bob's reversal U_i diag(f(q), 1) for Alice outcome ``branch`` (1-based).

    ``variant="sqrt"`` uses f(q) = sqrt(1 - q) and ``variant="linear"`` uses
    f(q) = 1 - q (the controlled Bell-state protocol).
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"weak measurement strength {q!r} outside [0, 1]")
    if branch not in (1, 2, 3, 4):
        raise ValueError(f"branch index must be 1..4, got {branch!r}")
    if variant == "sqrt":
        f = math.sqrt(1.0 - q)
    elif variant == "linear":
        f = 1.0 - q
    else:
        raise ValueError(f"unknown variant {variant!r}; expected one of {WM_VARIANTS}")
    u = CORRECTIONS[branch - 1]
    return WeakMeasurement(q, u, u @ np.diag([f, 1.0]).astype(complex))


def transform_kraus(channel: KrausChannel, v) -> KrausChannel:
    """F_i = sum_j v_ij K_j for a unitary mixing matrix v."""
    v = linalg.as_matrix(v)
    n = len(channel)
    if v.shape != (n, n):
        raise ValueError(f"mixing matrix must be {n}x{n}, got {v.shape}")
    err = float(np.max(np.abs(v.conj().T @ v - np.eye(n))))
    if err > UNITARY_TOL:
        raise ValueError(f"mixing matrix is not unitary (deviation {err:.3e})")
    ops = tuple(sum(v[i, j] * channel.operators[j] for j in range(n)) for i in range(n))
    return KrausChannel(ops, tuple(f"f{i}" for i in range(n)))


def rotation_family(delta: float) -> np.ndarray:
    c, s = math.cos(delta), math.sin(delta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def unitary_u2(alpha: float, beta: float, gamma: float, delta: float) -> np.ndarray:
    """General 2x2 unitary; alpha = beta = gamma = 0 reduces to ``rotation_family``."""
    e = np.exp
    c, s = math.cos(delta), math.sin(delta)
    return np.array(
        [
            [e(1j * (alpha - beta - gamma)) * c, -e(1j * (alpha - beta + gamma)) * s],
            [e(1j * (alpha + beta - gamma)) * s, e(1j * (alpha + beta + gamma)) * c],
        ],
        dtype=complex,
    )


def recoverable_probability(channel: KrausChannel) -> float:
    """Sum of N_i^2 over invertible Kraus operators; singular ones contribute nothing."""
    if channel.dim != 2:
        raise ValueError("recoverable_probability is defined for single-qubit channels")
    total = 0.0
    for k in channel.operators:
        if abs(linalg.det_2x2(k)) < linalg.SINGULAR_TOL:
            continue
        total += reversal_norm(k) ** 2
    return total


__all__ = [
    "KrausChannel",
    "NotInvertible",
    "WeakMeasurement",
    "ZeroProbabilityBranch",
    "adc",
    "adc_from_rate",
    "apply_channel",
    "branch_probabilities",
    "decay_probability",
    "eam_select",
    "lift",
    "recoverable_probability",
    "rotation_family",
    "transform_kraus",
    "unitary_u2",
    "wm_operator",
    "wm_reversal",
]
