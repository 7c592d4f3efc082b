import numpy as np
import pytest

from tpew import linalg
from tpew.linalg import NotInvertible


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        linalg.as_matrix(np.ones(3))
    with pytest.raises(ValueError):
        linalg.as_matrix(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(ValueError):
        linalg.as_matrix(np.eye(32))


def test_matmul_dimension_mismatch():
    with pytest.raises(ValueError):
        linalg.matmul(np.eye(2), np.eye(4))


def test_kron_ordering_leftmost_is_msb():
    zero = np.array([[1, 0], [0, 0]])
    one = np.array([[0, 0], [0, 1]])
    m = linalg.kron_all([one, zero, zero])  # |100><100|
    assert m[4, 4] == 1 and np.count_nonzero(m) == 1


def test_partial_trace_product_state(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    ra = a @ a.conj().T
    rb = b @ b.conj().T
    ra /= np.trace(ra)
    rb /= np.trace(rb)
    full = np.kron(ra, rb)
    np.testing.assert_allclose(linalg.partial_trace(full, [2, 2, 2], [0]), ra, atol=1e-14)
    np.testing.assert_allclose(linalg.partial_trace(full, [2, 2, 2], [1, 2]), rb, atol=1e-14)
    assert linalg.partial_trace(full, [2, 2, 2], []).shape == (1, 1)


def test_partial_trace_bell_is_maximally_mixed():
    v = np.array([1, 0, 0, 1]) / np.sqrt(2)
    rho = np.outer(v, v.conj())
    np.testing.assert_allclose(linalg.partial_trace(rho, [2, 2], [1]), np.eye(2) / 2, atol=1e-15)


def test_eig_hermitian_closed_form_matches_numpy(rng):
    for _ in range(20):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h = a + a.conj().T
        np.testing.assert_allclose(linalg.eig_hermitian(h), np.linalg.eigvalsh(h), atol=1e-12)


def test_eig_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        linalg.eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_inverse_2x2():
    a = np.array([[1, 2], [3, 4]], dtype=complex)
    np.testing.assert_allclose(linalg.inverse_2x2(a) @ a, np.eye(2), atol=1e-14)
    assert linalg.det_2x2(a) == pytest.approx(-2)
    with pytest.raises(NotInvertible):
        linalg.inverse_2x2(np.array([[0, 1], [0, 0]]))
