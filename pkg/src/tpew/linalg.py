"""Dense complex-matrix kernel for operators of dimension 1 to 16.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Qubit ordering
follows the usual ket-label convention: the leftmost label is the most
significant bit and corresponds to the leftmost Kronecker factor.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 16
SINGULAR_TOL = 1e-12
HERMITIAN_TOL = 1e-12

ComplexMatrix = np.ndarray


class NotInvertible(ArithmeticError):
    """Raised when a matrix determinant falls below the singularity cutoff."""


def as_matrix(a) -> ComplexMatrix:
    """Coerce ``a`` to a finite 2-D complex array, rejecting anything else."""
    m = np.asarray(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError("matrix dimensions must be positive")
    if max(m.shape) > MAX_DIM:
        raise ValueError(f"dimension {max(m.shape)} exceeds kernel limit {MAX_DIM}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def identity(dim: int) -> ComplexMatrix:
    return np.eye(dim, dtype=complex)


def matmul(a, b) -> ComplexMatrix:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def kron(a, b) -> ComplexMatrix:
    return as_matrix(np.kron(as_matrix(a), as_matrix(b)))


def kron_all(factors: Iterable) -> ComplexMatrix:
    out = identity(1)
    for f in factors:
        out = kron(out, f)
    return out


def dagger(a) -> ComplexMatrix:
    return as_matrix(a).conj().T


def trace(a) -> complex:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("trace of a non-square matrix")
    return complex(np.trace(a))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        return False
    return float(np.max(np.abs(a - a.conj().T))) <= tol


def partial_trace(rho, dims: Sequence[int], keep: Iterable[int]) -> ComplexMatrix:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` lists subsystem dimensions, most significant first.  The kept
    subsystems stay in their original relative order.  Keeping nothing
    returns the full trace as a 1x1 matrix.
    """
    rho = as_matrix(rho)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"matrix shape {rho.shape} does not match subsystem dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")

    n = len(dims)
    t = rho.reshape(dims + dims)
    # einsum labels: row index i uses letter i, column index uses letter n+i;
    # traced subsystems share the row letter.
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = [letters[i] for i in range(n)]
    cols = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = [letters[i] for i in keep] + [letters[n + i] for i in keep]
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + "".join(out), t)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return reduced.reshape(d, d)


def eig_hermitian(a, tol: float = HERMITIAN_TOL) -> list[float]:
    """Ascending real eigenvalues of a Hermitian matrix.

    The 2x2 case uses the closed form ``m +/- sqrt(((a-d)/2)^2 + |b|^2)``;
    larger matrices go through LAPACK's Hermitian solver.
    """
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    n = a.shape[0]
    if n == 1:
        return [float(a[0, 0].real)]
    if n == 2:
        p, d = a[0, 0].real, a[1, 1].real
        b = a[0, 1]
        mean = 0.5 * (p + d)
        half_gap = 0.5 * (p - d)
        disc = float(np.hypot(half_gap, abs(b)))
        return [mean - disc, mean + disc]
    return [float(v) for v in np.linalg.eigvalsh(0.5 * (a + a.conj().T))]


def det_2x2(a) -> complex:
    a = as_matrix(a)
    if a.shape != (2, 2):
        raise ValueError("det_2x2 requires a 2x2 matrix")
    return complex(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])


def inverse_2x2(a) -> ComplexMatrix:
    a = as_matrix(a)
    det = det_2x2(a)
    if abs(det) < SINGULAR_TOL:
        raise NotInvertible(f"|det| = {abs(det):.3e} below {SINGULAR_TOL:g}")
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]], dtype=complex) / det
