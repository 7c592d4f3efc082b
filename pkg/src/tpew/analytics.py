"""Closed-form evaluators, input-averaged fidelities and parameter sweeps.

Formulas are written in terms of the input population ``x = |alpha|^2``
(``y = 1 - x``), the decay probability ``r`` and the weak-measurement
strength ``q``.  They accept scalars or numpy arrays.

Averaging over inputs
---------------------
Two input measures are available for the average over input states:

``"amplitude"`` (default)
    the real amplitude ``a = |alpha|`` is uniform on [0, 1] and
    ``x = a^2``.  The published closed-form averages of the unprotected
    baselines correspond to this measure.
``"population"``
    ``x`` itself is uniform on [0, 1] (equivalently, uniform on the Bloch
    sphere).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .channels import adc, recoverable_probability, rotation_family, transform_kraus
from .protocols import PROTOCOLS, USES_STRENGTH, StrengthWarning, canonical, run

MEASURES = ("amplitude", "population")
METHODS = ("closed_form", "constructive")
DEFAULT_NODES = 64


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _safe_div(num, den):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den == 0.0, np.nan, num / np.where(den == 0.0, 1.0, den))
    return out[()] if out.ndim == 0 else out


def _pair(i, first, second):
    """Select the i = 1, 2 expression or the i = 3, 4 expression."""
    return first if i in (1, 2) else second


def eam_probability_w(r):
    return 1.0 - r / 2.0


def branch_probability_w(x, r, i):
    y = 1.0 - x
    return _pair(i, (1.0 - y * r), (1.0 - x * r)) / (4.0 - 2.0 * r)


def wm_success_w(x, r, q, i):
    y = 1.0 - x
    body = _pair(i, x * (1.0 - q) + y * (1.0 - r), x * (1.0 - r) + y * (1.0 - q))
    return body / (4.0 - 2.0 * r)


def total_success_tp_ew(r, q):
    return 1.0 - q / (2.0 - r)


def branch_fidelity_w(x, r, q, i):
    y = 1.0 - x
    cross = 2.0 * x * y * np.sqrt(1.0 - q) * np.sqrt(1.0 - r)
    if i in (1, 2):
        num = y**2 * (1.0 - r) + x**2 * (1.0 - q) + cross
        den = x * (1.0 - q) + y * (1.0 - r)
    else:
        num = y**2 * (1.0 - q) + x**2 * (1.0 - r) + cross
        den = x * (1.0 - r) + y * (1.0 - q)
    return _safe_div(num, den)


def average_fidelity_original(r):
    return (8.0 * np.sqrt(1.0 - r) + 22.0 - 7.0 * r) / 30.0


def branch_probability_original_w(x, r, i):
    return 0.25 + 0.0 * np.asarray(x, dtype=float)


def branch_fidelity_original_w(x, r, i):
    y = 1.0 - x
    cross = x * y * (r + 2.0 * np.sqrt(1.0 - r))
    return _pair(i, x**2 + y**2 * (1.0 - r), y**2 + x**2 * (1.0 - r)) + cross


def mr_integrand(x, r):
    y = 1.0 - x
    top = 1.0 + r * x * y
    return top / (2.0 * (1.0 + r * y)) + top / (2.0 * (1.0 + r * x))


def total_success_mr(r):
    return (2.0 - r - r**2) / 2.0


def eam_probability_cw(r):
    return 1.0 - r


def average_fidelity_ctp_w(r):
    return 1.0 + 0.0 * r


def average_fidelity_original_cw(r):
    return 1.0 - 11.0 * r / 15.0


def eam_probability_cb(r):
    return 0.5 * ((1.0 - r) ** 2 + 1.0)


def _cb_den(r):
    return 2.0 * (r**2 - 2.0 * r + 2.0)


def branch_probability_cb(x, r, i):
    y = 1.0 - x
    pop = _pair(i, y, x)
    return (pop * r**2 - 2.0 * pop * r + 1.0) / _cb_den(r)


def wm_success_cb(x, r, q, i):
    y = 1.0 - x
    body = _pair(i, x * (1.0 - q) ** 2 + y * (1.0 - r) ** 2, x * (1.0 - r) ** 2 + y * (1.0 - q) ** 2)
    return body / _cb_den(r)


def total_success_ctp_bell(r, q):
    return 1.0 - (2.0 * q - q**2) / (r**2 - 2.0 * r + 2.0)


def branch_fidelity_cb(x, r, q, i):
    y = 1.0 - x
    if i in (1, 2):
        num = (x * q + y * r - 1.0) ** 2
        den = x * (q**2 - 2.0 * q) + y * (r**2 - 2.0 * r) + 1.0
    else:
        num = (y * q + x * r - 1.0) ** 2
        den = x * (r**2 - 2.0 * r) + y * (q**2 - 2.0 * q) + 1.0
    return _safe_div(num, den)


def average_fidelity_original_cb(r):
    return 1.0 - 11.0 * r / 15.0 + 7.0 * r**2 / 15.0


# The Bell-state variant of the weak-measurement protocol shares every
# branch expression with the W-state one.
FORMULAS: dict[str, Callable] = {
    "eam_probability_w": eam_probability_w,
    "eam_probability_bell": eam_probability_w,
    "branch_probability_w": branch_probability_w,
    "branch_probability_bell": branch_probability_w,
    "wm_success_w": wm_success_w,
    "wm_success_bell": wm_success_w,
    "total_success_tp_ew": total_success_tp_ew,
    "total_success_tp_ew_bell": total_success_tp_ew,
    "branch_fidelity_w": branch_fidelity_w,
    "branch_fidelity_bell": branch_fidelity_w,
    "average_fidelity_original": average_fidelity_original,
    "branch_probability_original_w": branch_probability_original_w,
    "branch_fidelity_original_w": branch_fidelity_original_w,
    "mr_integrand": mr_integrand,
    "total_success_mr": total_success_mr,
    "eam_probability_cw": eam_probability_cw,
    "average_fidelity_ctp_w": average_fidelity_ctp_w,
    "average_fidelity_original_cw": average_fidelity_original_cw,
    "eam_probability_cb": eam_probability_cb,
    "branch_probability_cb": branch_probability_cb,
    "wm_success_cb": wm_success_cb,
    "total_success_ctp_bell": total_success_ctp_bell,
    "branch_fidelity_cb": branch_fidelity_cb,
    "average_fidelity_original_cb": average_fidelity_original_cb,
}


def closed_form(quantity: str, **params) -> float:
    """Evaluate a named closed-form expression.

    >>> closed_form("total_success_tp_ew", r=0.5, q=0.5)
    0.6666666666666667
    """
    try:
        fn = FORMULAS[quantity]
    except KeyError:
        raise ValueError(f"unknown quantity {quantity!r}") from None
    for name in ("x", "r", "q"):
        if name in params:
            v = np.asarray(params[name], dtype=float)
            if np.any(v < 0.0) or np.any(v > 1.0):
                raise ValueError(f"{name} outside [0, 1]")
    if "i" in params and params["i"] not in (1, 2, 3, 4):
        raise ValueError(f"branch index must be 1..4, got {params['i']!r}")
    out = fn(**params)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# branch expressions per protocol
# ---------------------------------------------------------------------------

def branch_closed_forms(protocol: str, x, r, q=0.0) -> Optional[list[tuple]]:
    """(P_i, g_i, fid_i) per Alice outcome, or None when no per-branch closed form exists."""
    name = canonical(protocol)
    if name in ("tp-ew-w", "tp-ew-bell"):
        return [
            (branch_probability_w(x, r, i), wm_success_w(x, r, q, i), branch_fidelity_w(x, r, q, i))
            for i in (1, 2, 3, 4)
        ]
    if name == "ctp-bell":
        return [
            (branch_probability_cb(x, r, i), wm_success_cb(x, r, q, i), branch_fidelity_cb(x, r, q, i))
            for i in (1, 2, 3, 4)
        ]
    if name in ("original-w", "original-bell"):
        return [
            (0.25, 0.25, branch_fidelity_original_w(x, r, i)) for i in (1, 2, 3, 4)
        ]
    if name == "ctp-w":
        return [(0.25, 0.25, 1.0) for _ in range(4)]
    return None


def success_closed_form(protocol: str, r: float, q: float = 0.0) -> tuple[float, float]:
    """(environment-check acceptance, success given acceptance)."""
    name = canonical(protocol)
    if name == "tp-ew-w":
        return eam_probability_w(r), total_success_tp_ew(r, q)
    if name == "tp-ew-bell":
        return eam_probability_w(r), total_success_tp_ew(r, q)
    if name == "ctp-w":
        return eam_probability_cw(r), 1.0
    if name == "ctp-bell":
        return eam_probability_cb(r), total_success_ctp_bell(r, q)
    if name == "mr":
        return 1.0, total_success_mr(r)
    if name in ("original-w", "original-bell", "original-cw", "original-cb"):
        return 1.0, 1.0
    raise ValueError(f"unknown protocol {protocol!r}")


def _weighted_fidelity(branches) -> float:
    total = 0.0
    for p, _, fid in branches:
        p = float(p)
        if p == 0.0:
            continue
        total += p * float(fid)
    return total


def closed_form_integrand(protocol: str, x, r: float, q: float = 0.0):
    """sum_i P_i fid_i from the closed forms, vectorized over x; None if unavailable."""
    name = canonical(protocol)
    if name == "mr":
        return mr_integrand(np.asarray(x, dtype=float), r)
    if name == "ctp-w":
        return np.ones_like(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    branches = branch_closed_forms(name, x, r, q)
    if branches is None:
        return None
    total = np.zeros_like(x)
    for p, _, fid in branches:
        p = np.broadcast_to(np.asarray(p, dtype=float), x.shape)
        fid = np.broadcast_to(np.asarray(fid, dtype=float), x.shape)
        total = total + np.where(p == 0.0, 0.0, p * fid)
    return total


CLOSED_FORM_AVERAGES: dict[str, Callable[[float], float]] = {
    "original-w": average_fidelity_original,
    "original-bell": average_fidelity_original,
    "original-cw": average_fidelity_original_cw,
    "original-cb": average_fidelity_original_cb,
    "ctp-w": average_fidelity_ctp_w,
}


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _gauss_legendre(nodes: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    if nodes < 1 or panels < 1:
        raise ValueError("nodes and panels must be positive")
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, 1.0, panels + 1)
    pts, wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        pts.append(lo + half * (t + 1.0))
        wts.append(half * w)
    pts, wts = np.concatenate(pts), np.concatenate(wts)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def quadrature_rule(nodes: int = DEFAULT_NODES, panels: int = 1, measure: str = "amplitude"):
    """Population nodes x_k and weights w_k such that sum w_k f(x_k) averages f over inputs."""
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}; expected one of {MEASURES}")
    t, w = _gauss_legendre(int(nodes), int(panels))
    x = t**2 if measure == "amplitude" else t.copy()
    return x, w


def constructive_integrand(protocol: str, x: float, r: float, q: float = 0.0) -> float:
    alpha, beta = math.sqrt(x), math.sqrt(1.0 - x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StrengthWarning)
        return run(protocol, alpha, beta, r, q).mean_fidelity_for_input


def _is_degenerate(protocol: str, r: float) -> bool:
    return canonical(protocol) == "ctp-w" and r >= 1.0


def average_fidelity(
    protocol: str,
    r: float,
    q: float = 0.0,
    *,
    method: str = "closed_form",
    nodes: int = DEFAULT_NODES,
    panels: int = 1,
    measure: str = "amplitude",
) -> float:
    """Average over inputs of sum_i P_i fid_i by Gauss-Legendre quadrature.

    ``method="closed_form"`` integrates the branch formulas (falling back to
    the constructive pipeline for protocols that only have a closed-form
    average); ``method="constructive"`` integrates protocol reports.
    Returns NaN when the protocol is degenerate at ``r``.
    """
    name = canonical(protocol)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if name != "mr" and name not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if _is_degenerate(name, r):
        return math.nan
    xs, ws = quadrature_rule(nodes, panels, measure)
    if method == "closed_form":
        vals = closed_form_integrand(name, xs, r, q)
        if vals is not None:
            return float(np.dot(ws, vals))
    elif name == "mr":
        raise ValueError("the MR baseline has no constructive pipeline")
    vals = np.array([constructive_integrand(name, float(x), r, q) for x in xs])
    return float(np.dot(ws, vals))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

ALL_PROTOCOLS = tuple(sorted(PROTOCOLS)) + ("mr",)


def uses_strength(protocol: str) -> bool:
    return canonical(protocol) in USES_STRENGTH


def _check_axis(name: str, values) -> tuple:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValueError(f"{name} grid is empty")
    if any(not 0.0 <= v <= 1.0 for v in vals):
        raise ValueError(f"{name} grid values must lie in [0, 1]")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} grid must be strictly increasing")
    return vals


@dataclass(frozen=True)
class SweepGrid:
    protocol: str
    r_values: tuple
    q_values: tuple = (0.0,)
    nodes: int = DEFAULT_NODES
    panels: int = 1
    measure: str = "amplitude"
    method: str = "closed_form"

    def __post_init__(self):
        name = canonical(self.protocol)
        if name not in ALL_PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        object.__setattr__(self, "protocol", name)
        object.__setattr__(self, "r_values", _check_axis("r", self.r_values))
        object.__setattr__(self, "q_values", _check_axis("q", self.q_values))
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def q_axis(self) -> tuple:
        """Strength values actually swept; NaN for protocols without a strength parameter."""
        return self.q_values if uses_strength(self.protocol) else (math.nan,)

    @property
    def x_values(self) -> np.ndarray:
        return quadrature_rule(self.nodes, self.panels, self.measure)[0]


@dataclass(frozen=True, eq=False)
class SweepResult:
    grid: SweepGrid
    avg_fidelity: np.ndarray
    conditional_success: np.ndarray
    unconditional_success: np.ndarray
    degenerate: np.ndarray
    metadata: dict = field(default_factory=dict)

    def rows(self):
        """Long-format records in grid order (r outer, q inner)."""
        for i, r in enumerate(self.grid.r_values):
            for j, q in enumerate(self.grid.q_axis):
                yield {
                    "protocol": self.grid.protocol,
                    "r": r,
                    "q": q,
                    "avg_fidelity": float(self.avg_fidelity[i, j]),
                    "conditional_success": float(self.conditional_success[i, j]),
                    "unconditional_success": float(self.unconditional_success[i, j]),
                    "degenerate": bool(self.degenerate[i, j]),
                }


def _cell(grid: SweepGrid, r: float, q: float) -> tuple[float, float, float, bool]:
    q_eff = 0.0 if math.isnan(q) else q
    if _is_degenerate(grid.protocol, r):
        return math.nan, math.nan, 0.0, True
    fid = average_fidelity(
        grid.protocol, r, q_eff, method=grid.method, nodes=grid.nodes, panels=grid.panels, measure=grid.measure
    )
    if grid.method == "constructive" and grid.protocol != "mr":
        # Success probabilities do not depend on the input; take them from one report.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StrengthWarning)
            rep = run(grid.protocol, math.sqrt(0.5), math.sqrt(0.5), r, q_eff)
        eam, cond = rep.eam_probability, rep.conditional_success
    else:
        eam, cond = success_closed_form(grid.protocol, r, q_eff)
    return fid, float(cond), float(eam * cond), False


def _sweep_row(args):
    grid, r = args
    return [_cell(grid, r, q) for q in grid.q_axis]


def sweep(grid: SweepGrid, workers: int = 1) -> SweepResult:
    """Evaluate every (r, q) cell.  Output is independent of ``workers``."""
    tasks = [(grid, r) for r in grid.r_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    arr = np.array([[c[:3] for c in row] for row in rows], dtype=float)
    deg = np.array([[c[3] for c in row] for row in rows], dtype=bool)
    meta = {
        "quadrature": "gauss-legendre",
        "nodes": grid.nodes,
        "panels": grid.panels,
        "measure": grid.measure,
        "method": grid.method,
        "version": __version__,
    }
    return SweepResult(grid, arr[..., 0], arr[..., 1], arr[..., 2], deg, meta)


# ---------------------------------------------------------------------------
# Kraus re-decomposition
# ---------------------------------------------------------------------------

def delta_grid(step: float = math.pi / 200, stop: float = 2 * math.pi) -> np.ndarray:
    n = int(round(stop / step))
    return np.arange(n + 1) * step


def decomposition_value(r: float, delta: float) -> float:
    return recoverable_probability(transform_kraus(adc(r), rotation_family(delta)))


def decomposition_sweep(r_values: Sequence[float], delta_values: Sequence[float]) -> np.ndarray:
    """Recoverable probability for each (r, delta) re-decomposition of the damping channel."""
    return np.array([[decomposition_value(r, d) for d in delta_values] for r in r_values], dtype=float)


def row_argmax_mask(values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Cells within ``tol`` of their row maximum."""
    values = np.asarray(values, dtype=float)
    return values >= values.max(axis=1, keepdims=True) - tol
