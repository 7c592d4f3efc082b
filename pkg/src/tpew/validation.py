"""Invariant suites behind ``tpew validate``.

Each check yields a named pass/fail record with its measured deviation so
failures can be diagnosed from the JSON report alone.  The analytic suite
takes the formula registry as an argument; tests inject a perturbed
registry to confirm the suite actually catches a wrong formula.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from . import analytics
from .analytics import FORMULAS, quadrature_rule
from .channels import adc, eam_select, lift
from .montecarlo import PROTOCOLS as MC_PROTOCOLS, McEstimate, TrajectoryConfig, run_trajectories
from .protocols import StrengthWarning, USES_STRENGTH, run
from .states import w_state

UNIT_GRID = tuple(round(0.1 * k, 10) for k in range(10))
FINE_GRID = tuple(round(0.05 * k, 10) for k in range(21))
MC_GRID = (0.1, 0.5, 0.9)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("deviation", "tolerance"):
            if isinstance(d[k], float) and not math.isfinite(d[k]):
                d[k] = None
        return d


@dataclass(frozen=True)
class SuiteResult:
    suite: str
    checks: tuple
    parameters: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 2

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "parameters": self.parameters,
            "checks": [c.to_dict() for c in self.checks],
        }


def _check(name: str, deviation: float, tol: float, detail: str = "") -> Check:
    ok = math.isfinite(deviation) and deviation <= tol
    return Check(name, bool(ok), float(deviation), float(tol), detail)


def _report(protocol, x, r, q=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StrengthWarning)
        return run(protocol, math.sqrt(x), math.sqrt(1.0 - x), r, q)


# ---------------------------------------------------------------------------
# analytic suite
# ---------------------------------------------------------------------------

def check_tp_ew_success(formulas: Mapping[str, Callable] = FORMULAS, grid=FINE_GRID) -> Check:
    """Constructive total click probability against the closed form on an (r, q) grid."""
    worst = 0.0
    for r in grid:
        for q in grid:
            rep = _report("tp-ew-w", 0.3, r, q)
            worst = max(worst, abs(rep.conditional_success - formulas["total_success_tp_ew"](r, q)))
    return _check("tp_ew_success_formula", worst, 1e-12, f"{len(grid)}x{len(grid)} grid")


def check_branch_closed_forms(formulas: Mapping[str, Callable] = FORMULAS) -> Check:
    """Per-branch P_i, g_i and fid_i of the protocols with branch formulas."""
    families = {
        "tp-ew-w": ("branch_probability_w", "wm_success_w", "branch_fidelity_w"),
        "tp-ew-bell": ("branch_probability_bell", "wm_success_bell", "branch_fidelity_bell"),
        "ctp-bell": ("branch_probability_cb", "wm_success_cb", "branch_fidelity_cb"),
    }
    worst = 0.0
    for protocol, (fp, fg, ff) in families.items():
        for x in (0.0, 0.2, 0.5, 0.8, 1.0):
            for r in UNIT_GRID:
                for q in UNIT_GRID:
                    rep = _report(protocol, x, r, q)
                    for i, b in enumerate(rep.branches, start=1):
                        worst = max(worst, abs(b.conditional_probability - formulas[fp](x, r, i)))
                        worst = max(worst, abs(b.wm_success - formulas[fg](x, r, q, i)))
                        if b.defined:
                            worst = max(worst, abs(b.fidelity - formulas[ff](x, r, q, i)))
    for x in (0.0, 0.3, 0.7, 1.0):
        for r in UNIT_GRID:
            rep = _report("original-w", x, r)
            for i, b in enumerate(rep.branches, start=1):
                worst = max(worst, abs(b.conditional_probability - formulas["branch_probability_original_w"](x, r, i)))
                worst = max(worst, abs(b.fidelity - formulas["branch_fidelity_original_w"](x, r, i)))
    return _check("branch_closed_forms", worst, 1e-12)


def check_unit_fidelity_at_matched_strength(grid=UNIT_GRID) -> Check:
    worst = 0.0
    for r in grid:
        worst = max(worst, abs(analytics.average_fidelity("tp-ew-w", r, r, method="constructive") - 1.0))
    return _check("unit_fidelity_q_equals_r", worst, 1e-9)


def check_success_formulas(formulas: Mapping[str, Callable] = FORMULAS) -> Check:
    worst = 0.0
    for r in FINE_GRID:
        worst = max(worst, abs(_report("ctp-w", 0.4, r).eam_probability - formulas["eam_probability_cw"](r))
                    if r < 1 else 0.0)
        worst = max(worst, abs(_report("tp-ew-w", 0.4, r, 0.0).eam_probability - formulas["eam_probability_w"](r)))
        if r < 1:
            worst = max(worst, abs(_report("ctp-bell", 0.4, r, 0.0).eam_probability - formulas["eam_probability_cb"](r)))
        for q in UNIT_GRID:
            if r < 1:
                rep = _report("ctp-bell", 0.4, r, q)
                worst = max(worst, abs(rep.conditional_success - formulas["total_success_ctp_bell"](r, q)))
    return _check("acceptance_and_success_formulas", worst, 1e-12)


def check_closed_form_averages(formulas: Mapping[str, Callable] = FORMULAS, grid=UNIT_GRID) -> Check:
    """Quadrature of constructive reports against closed-form averages."""
    table = {
        "original-w": "average_fidelity_original",
        "original-cw": "average_fidelity_original_cw",
        "original-cb": "average_fidelity_original_cb",
        "ctp-w": "average_fidelity_ctp_w",
    }
    worst = 0.0
    for protocol, key in table.items():
        for r in grid:
            got = analytics.average_fidelity(protocol, r, method="constructive")
            worst = max(worst, abs(got - formulas[key](r)))
    return _check("closed_form_averages", worst, 1e-9, "baseline, controlled and unprotected averages")


def check_mr(formulas: Mapping[str, Callable] = FORMULAS) -> list[Check]:
    xs, ws = quadrature_rule()
    fids = [float(np.dot(ws, formulas["mr_integrand"](xs, r))) for r in FINE_GRID]
    rises = max(0.0, max(b - a for a, b in zip(fids, fids[1:])))
    succ = max(abs(formulas["total_success_mr"](r) - (2 - r - r * r) / 2) for r in FINE_GRID)
    return [
        _check("mr_fidelity_at_zero", abs(fids[0] - 1.0), 1e-12),
        _check("mr_fidelity_nonincreasing", rises, 0.0),
        _check("mr_success_formula", succ, 0.0),
    ]


def check_ctp_w_shared_state() -> Check:
    worst = 0.0
    ref = w_state().density().matrix
    for r in FINE_GRID[:-1]:
        shared, _ = eam_select(lift(adc(r), [0, 1, 2], 3), w_state(), "e0_e0_e0")
        worst = max(worst, float(np.max(np.abs(shared.matrix - ref))))
    return _check("ctp_w_post_selected_state", worst, 1e-15)


def check_w_bell_equivalence(grid=UNIT_GRID) -> Check:
    worst = 0.0
    for x in (0.0, 0.3, 1.0):
        for r in grid:
            for q in grid:
                a, b = _report("tp-ew-w", x, r, q), _report("tp-ew-bell", x, r, q)
                worst = max(worst, abs(a.eam_probability - b.eam_probability),
                            abs(a.conditional_success - b.conditional_success))
                for ba, bb in zip(a.branches, b.branches):
                    worst = max(worst, abs(ba.conditional_probability - bb.conditional_probability),
                                abs(ba.wm_success - bb.wm_success))
                    if ba.defined != bb.defined:
                        worst = math.inf
                    elif ba.defined:
                        worst = max(worst, float(np.max(np.abs(ba.output_state.matrix - bb.output_state.matrix))))
    return _check("w_bell_equivalence", worst, 1e-12)


def check_decomposition(grid=FINE_GRID[:-1]) -> list[Check]:
    deltas = analytics.delta_grid()
    values = analytics.decomposition_sweep(grid, deltas)
    mask = analytics.row_argmax_mask(values)
    quarter = deltas / (math.pi / 2)
    nearest = np.abs(quarter - np.round(quarter)) < 1e-9
    misplaced = 0
    max_dev = 0.0
    for i, r in enumerate(grid):
        if r > 0 and not np.array_equal(mask[i], nearest):
            misplaced += 1
        max_dev = max(max_dev, abs(values[i].max() - (1.0 - r)))
    cross = max(
        abs((1.0 - r) - FORMULAS["eam_probability_w"](r) * FORMULAS["total_success_tp_ew"](r, r)) for r in grid
    )
    return [
        _check("decomposition_argmax_at_quarter_turns", float(misplaced), 0.0, "rows with misplaced argmax"),
        _check("decomposition_max_value", max_dev, 1e-9),
        _check("decomposition_cross_check", cross, 1e-12),
    ]


def check_orderings(formulas: Mapping[str, Callable] = FORMULAS) -> Check:
    xs, ws = quadrature_rule()
    worst = 0.0
    for r in FINE_GRID[1:-1]:
        mr = float(np.dot(ws, formulas["mr_integrand"](xs, r)))
        matched = analytics.average_fidelity("tp-ew-w", r, r)
        unprotected = analytics.average_fidelity("tp-ew-w", r, 0.0)
        base = formulas["average_fidelity_original"](r)
        ctp_w = formulas["average_fidelity_ctp_w"](r)
        ctp_orig = formulas["average_fidelity_original_cw"](r)
        worst = max(worst, mr - matched, max(mr, base) - unprotected, ctp_orig - ctp_w)
    return _check("fidelity_orderings", max(worst, 0.0), 1e-12, "largest violation")


def analytic_suite(formulas: Optional[Mapping[str, Callable]] = None) -> SuiteResult:
    formulas = FORMULAS if formulas is None else formulas
    checks = [
        check_tp_ew_success(formulas),
        check_branch_closed_forms(formulas),
        check_unit_fidelity_at_matched_strength(),
        check_success_formulas(formulas),
        check_closed_form_averages(formulas),
        *check_mr(formulas),
        check_ctp_w_shared_state(),
        check_w_bell_equivalence(),
        *check_decomposition(),
        check_orderings(formulas),
    ]
    return SuiteResult("analytic", tuple(checks))


# ---------------------------------------------------------------------------
# Monte Carlo suite
# ---------------------------------------------------------------------------

def constructive_expectations(protocol: str, r: float, q: float, *, measure="amplitude", nodes=64) -> dict:
    """Input-averaged constructive values of every quantity the trajectory oracle estimates."""
    xs, ws = quadrature_rule(nodes, 1, measure)
    reps = [_report(protocol, float(x), r, q) for x in xs]
    if reps[0].degenerate:
        nan = math.nan
        out = {k: nan for k in ("conditional_success", "average_fidelity")}
        out.update(eam_probability=0.0, unconditional_success=0.0)
        out.update({f"p_{i}": nan for i in (1, 2, 3, 4)})
        out.update({f"fidelity_{i}": nan for i in (1, 2, 3, 4)})
        return out
    eam = reps[0].eam_probability
    cond = float(np.dot(ws, [rep.conditional_success for rep in reps]))
    out = {
        "eam_probability": eam,
        "conditional_success": cond,
        "unconditional_success": eam * cond,
        "average_fidelity": float(np.dot(ws, [rep.mean_fidelity_for_input for rep in reps])),
    }
    for i in range(4):
        out[f"p_{i + 1}"] = float(np.dot(ws, [rep.branches[i].conditional_probability for rep in reps]))
        g = np.array([rep.branches[i].wm_success for rep in reps])
        fid = np.array([rep.branches[i].fidelity if rep.branches[i].defined else 0.0 for rep in reps])
        den = float(np.dot(ws, g))
        out[f"fidelity_{i + 1}"] = float(np.dot(ws, g * fid)) / den if den > 0 else math.nan
    return out


def compare_estimates(estimates: Mapping[str, McEstimate], expected: Mapping[str, float], n_se: float = 5.0):
    """Yield (quantity, z-like deviation, passed) with the 5-SE band plus a 1e-12 floor."""
    for name, est in estimates.items():
        target = expected[name]
        if math.isnan(target) or est.n_total == 0:
            ok = math.isnan(target) and (est.n_total == 0 or math.isnan(est.mean))
            yield name, 0.0 if ok else math.inf, ok
            continue
        dev = abs(est.mean - target)
        band = n_se * est.standard_error + 1e-12
        yield name, dev / band, dev <= band


def mc_suite(
    seed: int = 42,
    n_trajectories: int = 1_000_000,
    protocols: Iterable[str] = MC_PROTOCOLS,
    r_values=MC_GRID,
    q_values=MC_GRID,
    workers: int = 1,
) -> SuiteResult:
    """Every trajectory estimate against its constructive value, per protocol and (r, q) cell.

    Protocols without a strength parameter are sampled once per r; their
    estimates do not depend on q.
    """
    checks = []
    for protocol in protocols:
        qs = q_values if protocol in USES_STRENGTH else (0.0,)
        for r in r_values:
            for q in qs:
                cfg = TrajectoryConfig(protocol, r, q, n_trajectories, seed)
                est = run_trajectories(cfg, workers=workers)
                expected = constructive_expectations(protocol, r, q)
                worst_name, worst_ratio, all_ok = "", 0.0, True
                for name, ratio, ok in compare_estimates(est, expected):
                    all_ok &= ok
                    if ratio > worst_ratio or not ok:
                        worst_name, worst_ratio = name, ratio
                label = f"mc[{protocol},r={r:g}" + (f",q={q:g}]" if protocol in USES_STRENGTH else "]")
                checks.append(Check(label, bool(all_ok), worst_ratio, 1.0,
                                    f"worst quantity {worst_name}; deviation in units of the 5-SE band"))
    params = {"seed": seed, "n_trajectories": n_trajectories}
    return SuiteResult("mc", tuple(checks), params)


SUITES = {"analytic": analytic_suite, "mc": mc_suite}
