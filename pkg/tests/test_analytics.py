import math

import numpy as np
import pytest

from tpew import analytics as A


def test_closed_form_registry_and_domain():
    assert A.closed_form("total_success_tp_ew", r=0.5, q=0.5) == pytest.approx(2 / 3)
    assert A.closed_form("total_success_mr", r=0.5) == pytest.approx(0.625)
    with pytest.raises(ValueError):
        A.closed_form("nonexistent", r=0.1)
    with pytest.raises(ValueError):
        A.closed_form("total_success_tp_ew", r=1.2, q=0.0)
    with pytest.raises(ValueError):
        A.closed_form("branch_probability_w", x=0.5, r=0.5, i=7)


def test_baseline_average_spot_values():
    for r in (0.0, 0.3, 1.0):
        expected = (8 * math.sqrt(1 - r) + 22 - 7 * r) / 30
        assert A.average_fidelity("original-w", r, method="constructive") == pytest.approx(expected, abs=1e-12)
    assert A.average_fidelity_original(0.0) == pytest.approx(1.0)
    assert A.average_fidelity_original(1.0) == pytest.approx(0.5)


@pytest.mark.parametrize("protocol", ["tp-ew-w", "tp-ew-bell", "ctp-bell", "original-w", "original-cw", "original-cb", "ctp-w"])
def test_closed_form_and_constructive_agree(protocol):
    for r, q in ((0.2, 0.1), (0.5, 0.3), (0.8, 0.8)):
        a = A.average_fidelity(protocol, r, q, method="closed_form")
        b = A.average_fidelity(protocol, r, q, method="constructive", nodes=32)
        assert a == pytest.approx(b, abs=1e-12)


def test_frozen_reference_averages():
    # Values computed by both quadrature paths and cross-checked by trajectory sampling.
    assert A.average_fidelity("tp-ew-w", 0.5, 0.3) == pytest.approx(0.99629521880064, abs=1e-12)
    assert A.average_fidelity("ctp-bell", 0.5, 0.3) == pytest.approx(0.98590918738014, abs=1e-12)
    assert A.average_fidelity("mr", 0.5) == pytest.approx(0.86923425233195, abs=1e-12)
    assert A.average_fidelity("original-cb", 0.5) == pytest.approx(0.75, abs=1e-12)


def test_population_measure_differs_from_amplitude():
    amp = A.average_fidelity("original-w", 0.6)
    pop = A.average_fidelity("original-w", 0.6, measure="population")
    assert abs(amp - pop) > 1e-4
    with pytest.raises(ValueError):
        A.quadrature_rule(measure="haar")


def test_quadrature_integrates_polynomials_exactly():
    xs, ws = A.quadrature_rule(nodes=8, panels=3, measure="population")
    assert np.dot(ws, xs**5) == pytest.approx(1 / 6, abs=1e-15)
    xs, ws = A.quadrature_rule(nodes=8, measure="amplitude")
    assert np.dot(ws, xs) == pytest.approx(1 / 3, abs=1e-15)


def test_degenerate_and_unsupported():
    assert math.isnan(A.average_fidelity("ctp-w", 1.0))
    with pytest.raises(ValueError):
        A.average_fidelity("mr", 0.3, method="constructive")
    with pytest.raises(ValueError):
        A.average_fidelity("nope", 0.3)


def test_sweep_grid_validation_and_q_axis():
    with pytest.raises(ValueError):
        A.SweepGrid("tp-ew-w", (0.2, 0.1))
    with pytest.raises(ValueError):
        A.SweepGrid("tp-ew-w", (0.2, 1.5))
    g = A.SweepGrid("original-w", (0.1, 0.2), (0.0, 0.5))
    assert len(g.q_axis) == 1 and math.isnan(g.q_axis[0])


def test_sweep_degenerate_cells_and_worker_independence():
    grid = A.SweepGrid("ctp-w", (0.5, 1.0))
    res = A.sweep(grid)
    rows = list(res.rows())
    assert rows[1]["degenerate"] and math.isnan(rows[1]["avg_fidelity"]) and rows[1]["unconditional_success"] == 0.0
    grid2 = A.SweepGrid("tp-ew-w", (0.1, 0.4, 0.7), (0.0, 0.5))
    one, two = A.sweep(grid2, workers=1), A.sweep(grid2, workers=2)
    assert np.array_equal(one.avg_fidelity, two.avg_fidelity)


def test_sweep_constructive_matches_closed_form():
    grid = dict(r_values=(0.2, 0.6), q_values=(0.1, 0.6), nodes=16)
    a = A.sweep(A.SweepGrid("tp-ew-w", method="closed_form", **grid))
    b = A.sweep(A.SweepGrid("tp-ew-w", method="constructive", **grid))
    np.testing.assert_allclose(a.avg_fidelity, b.avg_fidelity, atol=1e-12)
    np.testing.assert_allclose(a.conditional_success, b.conditional_success, atol=1e-12)


def test_decomposition_basics():
    deltas = A.delta_grid()
    assert deltas[0] == 0.0 and deltas[-1] == pytest.approx(2 * math.pi)
    vals = A.decomposition_sweep([0.0, 0.4], deltas)
    np.testing.assert_allclose(vals[0], 1.0, atol=1e-12)
    assert vals[1, 0] == pytest.approx(0.6, abs=1e-12)
    mask = A.row_argmax_mask(vals)
    assert mask[0].all()
    assert set(np.flatnonzero(mask[1])) == {0, 100, 200, 300, 400}
