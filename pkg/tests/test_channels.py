import math

import numpy as np
import pytest

from tpew.channels import (
    CORRECTIONS,
    KrausChannel,
    ZeroProbabilityBranch,
    adc,
    adc_from_rate,
    apply_channel,
    branch_probabilities,
    decay_probability,
    eam_select,
    lift,
    recoverable_probability,
    rotation_family,
    transform_kraus,
    unitary_u2,
    wm_operator,
    wm_reversal,
)
from tpew.linalg import NotInvertible
from tpew.states import basis_ket, w_state


def test_adc_operators():
    ch = adc(0.36)
    np.testing.assert_allclose(ch.operator("e0"), np.diag([1, 0.8]))
    np.testing.assert_allclose(ch.operator("e1"), [[0, 0.6], [0, 0]])
    with pytest.raises(ValueError):
        adc(1.1)


def test_channel_rejects_incomplete_and_duplicates():
    with pytest.raises(ValueError):
        KrausChannel((np.eye(2) * 0.5,), ("a",))
    with pytest.raises(ValueError):
        KrausChannel((np.eye(2) / math.sqrt(2), np.eye(2) / math.sqrt(2)), ("a", "a"))


def test_channel_does_not_freeze_caller_arrays():
    k = np.eye(2, dtype=complex)
    KrausChannel((k,), ("id",))
    k[0, 0] = 1.0  # still writable


def test_decay_probability():
    assert decay_probability(2.0, 0.5) == pytest.approx(1 - math.exp(-1))
    assert decay_probability(0.0, 3.0) == 0.0
    np.testing.assert_allclose(adc_from_rate(1.0, 1.0).operator("e0")[1, 1], math.exp(-0.5))


def test_lift_labels_and_order():
    ch = lift(adc(0.3), [0, 1], 2)
    assert ch.labels == ("e0_e0", "e0_e1", "e1_e0", "e1_e1")
    np.testing.assert_allclose(ch.operator("e1_e0"), np.kron(adc(0.3).operator("e1"), adc(0.3).operator("e0")))
    with pytest.raises(ValueError):
        lift(adc(0.3), [2], 2)


def test_full_decay_sends_everything_to_ground():
    out = apply_channel(adc(1.0), basis_ket("1"))
    np.testing.assert_allclose(out.matrix, np.diag([1, 0]), atol=1e-15)


def test_branch_probabilities_on_w():
    probs = branch_probabilities(lift(adc(0.4), [2], 3), w_state())
    assert probs["e1"] == pytest.approx(0.5 * 0.4)
    assert sum(probs.values()) == pytest.approx(1.0)


def test_eam_select_zero_branch():
    with pytest.raises(ZeroProbabilityBranch) as err:
        eam_select(lift(adc(1.0), [0, 1, 2], 3), w_state(), "e0_e0_e0")
    assert err.value.label == "e0_e0_e0"


def test_wm_reversal_scaling():
    k = adc(0.75).operator("e0")
    m = wm_reversal(k)
    np.testing.assert_allclose(m, np.diag([0.5, 1.0]), atol=1e-15)
    np.testing.assert_allclose(m @ k, 0.5 * np.eye(2), atol=1e-15)
    with pytest.raises(NotInvertible):
        wm_reversal(adc(0.5).operator("e1"))


@pytest.mark.parametrize("variant,diag", [("sqrt", math.sqrt(0.5)), ("linear", 0.5)])
def test_wm_operator_variants(variant, diag):
    for i in (1, 2, 3, 4):
        m = wm_operator(0.5, i, variant).operator
        np.testing.assert_allclose(m, CORRECTIONS[i - 1] @ np.diag([diag, 1.0]))
    with pytest.raises(ValueError):
        wm_operator(0.5, 5)
    with pytest.raises(ValueError):
        wm_operator(0.5, 1, "cubic")


def test_failure_operator_completes_measurement():
    wm = wm_operator(0.3, 2)
    f = wm.failure_operator()
    total = wm.operator.conj().T @ wm.operator + f.conj().T @ f
    np.testing.assert_allclose(total, np.eye(2), atol=1e-14)


def test_transform_kraus_requires_unitary():
    with pytest.raises(ValueError):
        transform_kraus(adc(0.3), np.array([[1, 1], [0, 1]]))


def test_rotation_family_and_u2_agree():
    np.testing.assert_allclose(unitary_u2(0, 0, 0, 0.7), rotation_family(0.7), atol=1e-15)


@pytest.mark.parametrize("r", [0.0, 0.2, 0.5, 0.9])
def test_recoverable_probability_endpoints(r):
    assert recoverable_probability(adc(r)) == pytest.approx(1 - r, abs=1e-12)
    half = transform_kraus(adc(r), rotation_family(math.pi / 4))
    assert recoverable_probability(half) < 1 - r or r == 0
