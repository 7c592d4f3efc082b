import math

import numpy as np
import pytest

from tpew.states import (
    DensityMatrix,
    Ket,
    basis_ket,
    bell_basis,
    eta_basis,
    fidelity,
    input_from_population,
    input_state,
    w_state,
)


def test_ket_requires_normalization():
    with pytest.raises(ValueError):
        Ket(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        Ket(np.array([1.0, 0.0, 0.0]))


def test_ket_is_immutable():
    k = basis_ket("01")
    with pytest.raises(ValueError):
        k.amplitudes[0] = 1.0


def test_input_state_renormalizes_small_drift():
    k = input_state(0.6 * (1 + 1e-8), 0.8)
    assert np.vdot(k.amplitudes, k.amplitudes).real == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        input_state(0.6, 0.9)
    with pytest.raises(ValueError):
        input_state(0, 0)


def test_w_state_amplitudes():
    w = w_state()
    expected = np.zeros(8)
    expected[[0b100, 0b010]] = 0.5
    expected[0b001] = math.sqrt(2) / 2
    np.testing.assert_allclose(w.amplitudes, expected, atol=1e-15)


@pytest.mark.parametrize("basis", [eta_basis, bell_basis])
def test_measurement_bases_orthonormal(basis):
    kets = basis()
    gram = np.array([[a.overlap(b) for b in kets] for a in kets])
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-15)


def test_eta_basis_spans_w_support():
    # Only the symmetric combinations of Alice's two shared qubits are resolved,
    # which is all a W-class register ever populates.
    proj = sum(k.projector() for k in eta_basis())
    sym = np.zeros(8)
    sym[[0b010, 0b001]] = math.sqrt(0.5)
    sym1 = np.zeros(8)
    sym1[[0b110, 0b101]] = math.sqrt(0.5)
    for v in (basis_ket("100").amplitudes, basis_ket("000").amplitudes, sym, sym1):
        assert np.vdot(v, proj @ v).real == pytest.approx(1.0, abs=1e-15)
    anti = np.zeros(8)
    anti[[0b010, 0b001]] = [math.sqrt(0.5), -math.sqrt(0.5)]
    assert np.vdot(anti, proj @ anti).real == pytest.approx(0.0, abs=1e-15)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))


def test_reduced_state_of_w():
    rho = w_state().density().reduced([2])
    np.testing.assert_allclose(rho.matrix, np.diag([0.5, 0.5]), atol=1e-15)


def test_fidelity_pure_states():
    psi = input_from_population(0.3, 0.4, -1.0)
    assert fidelity(psi, psi.density()) == pytest.approx(1.0, abs=1e-15)
    orth = Ket(np.array([-psi.amplitudes[1].conj(), psi.amplitudes[0].conj()]))
    assert fidelity(psi, orth.density()) == pytest.approx(0.0, abs=1e-15)
