"""Branch-by-branch density-matrix execution of the teleportation protocols.

Every protocol follows the same pipeline: distribute the shared entangled
state through amplitude-damping channels (keeping only the invertible
environment branch when environment-assisted measurement is used), attach
the input qubit, let Alice project onto her measurement basis, and let Bob
apply a correction (a unitary, or a weak-measurement reversal whose failed
click is discarded).  Bob's qubit is always the last qubit of the register.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import linalg
from .channels import (
    CORRECTIONS,
    ZERO_BRANCH_TOL,
    ZeroProbabilityBranch,
    adc,
    apply_channel,
    eam_select,
    lift,
    wm_operator,
)
from .states import DensityMatrix, Ket, bell_basis, bell_state, eta_basis, fidelity, input_state, w_state


class StrengthWarning(UserWarning):
    """Weak-measurement strength exceeds the decay probability."""


@dataclass(frozen=True, eq=False)
class BranchOutcome:
    alice_outcome: str
    conditional_probability: float
    wm_success: float
    output_state: Optional[DensityMatrix]
    fidelity: float

    @property
    def defined(self) -> bool:
        return self.output_state is not None

    def to_dict(self) -> dict:
        out = None
        if self.output_state is not None:
            m = self.output_state.matrix
            out = {"real": m.real.tolist(), "imag": m.imag.tolist()}
        return {
            "alice_outcome": self.alice_outcome,
            "conditional_probability": self.conditional_probability,
            "wm_success": self.wm_success,
            "fidelity": None if math.isnan(self.fidelity) else self.fidelity,
            "output_state": out,
        }


@dataclass(frozen=True, eq=False)
class ProtocolReport:
    protocol: str
    parameters: dict
    eam_probability: float
    branches: tuple = ()
    conditional_success: float = math.nan
    degenerate: bool = False
    warnings: tuple = field(default_factory=tuple)

    @property
    def unconditional_success(self) -> float:
        if self.degenerate:
            return 0.0
        return self.eam_probability * self.conditional_success

    @property
    def retry_count(self) -> float:
        """Expected number of distribution attempts until the environment check passes."""
        return math.inf if self.eam_probability == 0 else 1.0 / self.eam_probability

    @property
    def mean_fidelity_for_input(self) -> float:
        """sum_i P_i fid_i; outcomes that never occur carry no weight."""
        if self.degenerate:
            return math.nan
        total = 0.0
        for b in self.branches:
            if b.conditional_probability == 0.0:
                continue
            total += b.conditional_probability * b.fidelity
        return total

    def to_dict(self) -> dict:
        def num(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        params = {}
        for k, v in self.parameters.items():
            if isinstance(v, complex):
                params[k] = {"real": v.real, "imag": v.imag}
            else:
                params[k] = v
        return {
            "protocol": self.protocol,
            "parameters": params,
            "degenerate": self.degenerate,
            "eam_probability": self.eam_probability,
            "conditional_success": num(self.conditional_success),
            "unconditional_success": num(self.unconditional_success),
            "mean_fidelity_for_input": num(self.mean_fidelity_for_input),
            "branches": [b.to_dict() for b in self.branches],
            "warnings": list(self.warnings),
        }


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} = {value!r} outside [0, 1]")
    return value


def _strength_warning(q: float, r: float, name: str) -> tuple:
    if q > r:
        msg = f"{name} = {q:g} exceeds r = {r:g}; fidelity and success are both below the {name} = r point"
        warnings.warn(msg, StrengthWarning, stacklevel=3)
        return (msg,)
    return ()


def teleport(
    psi_in: Ket,
    shared: DensityMatrix,
    basis: Sequence[Ket],
    corrections: Sequence[np.ndarray],
    labels: Sequence[str],
) -> tuple[BranchOutcome, ...]:
    """Run Alice's joint measurement and Bob's per-outcome correction.

    ``basis`` kets span the input qubit plus Alice's share of ``shared``; Bob
    holds the final qubit.  ``corrections`` may be non-unitary, in which case
    the trace lost to the failed click lowers ``wm_success`` below the outcome
    probability.
    """
    total = psi_in.density().tensor(shared)
    n = total.n_qubits
    bob = n - 1
    branches = []
    for ket, m, label in zip(basis, corrections, labels):
        proj = linalg.kron(ket.projector(), np.eye(2))
        unnorm = proj @ total.matrix @ proj.conj().T
        p = float(np.trace(unnorm).real)
        if p < ZERO_BRANCH_TOL:
            branches.append(BranchOutcome(label, 0.0, 0.0, None, math.nan))
            continue
        bob_state = linalg.partial_trace(unnorm, [2] * n, [bob])
        after = m @ bob_state @ m.conj().T
        g = float(np.trace(after).real)
        if g < ZERO_BRANCH_TOL:
            branches.append(BranchOutcome(label, p, 0.0, None, math.nan))
            continue
        out = DensityMatrix.from_unnormalized(after)
        branches.append(BranchOutcome(label, p, g, out, fidelity(psi_in, out)))
    return tuple(branches)


ETA_LABELS = ("eta1", "eta2", "eta3", "eta4")
BELL_LABELS = ("b1", "b2", "b3", "b4")


def _wm_ops(q: float, variant: str) -> list[np.ndarray]:
    return [wm_operator(q, i, variant).operator for i in (1, 2, 3, 4)]


def _params(alpha, beta, r, **extra) -> dict:
    return {"alpha": complex(alpha), "beta": complex(beta), "r": float(r), **extra}


def _report(protocol, params, psi_in, shared, p_eam, basis, labels, corrections, warned=()):
    branches = teleport(psi_in, shared, basis, corrections, labels)
    g_tot = sum(b.wm_success for b in branches)
    return ProtocolReport(protocol, params, p_eam, branches, g_tot, False, tuple(warned))


def _degenerate(protocol, params, exc: ZeroProbabilityBranch, warned=()) -> ProtocolReport:
    return ProtocolReport(
        protocol,
        params,
        exc.probability,
        (),
        math.nan,
        True,
        tuple(warned) + (f"environment branch {exc.label!r} never occurs; no teleportation possible",),
    )


def run_tp_ew_w(alpha, beta, r: float, q: float) -> ProtocolReport:
    """W-state teleportation with the environment check on Bob's channel and weak-measurement reversal."""
    r = _check_unit("r", r)
    q = _check_unit("q", q)
    warned = _strength_warning(q, r, "q")
    psi = input_state(alpha, beta)
    shared, p_eam = eam_select(lift(adc(r), [2], 3), w_state(), "e0")
    return _report(
        "tp-ew-w", _params(alpha, beta, r, q=q, entanglement="W"),
        psi, shared, p_eam, eta_basis(), ETA_LABELS, _wm_ops(q, "sqrt"), warned,
    )


def run_tp_ew_bell(alpha, beta, r: float, q: float) -> ProtocolReport:
    """Bell-state counterpart of :func:`run_tp_ew_w`."""
    r = _check_unit("r", r)
    q = _check_unit("q", q)
    warned = _strength_warning(q, r, "q")
    psi = input_state(alpha, beta)
    shared, p_eam = eam_select(lift(adc(r), [1], 2), bell_state(), "e0")
    return _report(
        "tp-ew-bell", _params(alpha, beta, r, q=q, entanglement="Bell"),
        psi, shared, p_eam, bell_basis(), BELL_LABELS, _wm_ops(q, "sqrt"), warned,
    )


def run_ctp_w(alpha, beta, r: float) -> ProtocolReport:
    """Controlled W-state teleportation: every qubit is damped, all three channels must pass the check."""
    r = _check_unit("r", r)
    psi = input_state(alpha, beta)
    params = _params(alpha, beta, r, entanglement="W")
    try:
        shared, p_eam = eam_select(lift(adc(r), [0, 1, 2], 3), w_state(), "e0_e0_e0")
    except ZeroProbabilityBranch as exc:
        return _degenerate("ctp-w", params, exc)
    return _report("ctp-w", params, psi, shared, p_eam, eta_basis(), ETA_LABELS, CORRECTIONS)


def run_ctp_bell(alpha, beta, r: float, q_prime: float) -> ProtocolReport:
    """Controlled Bell-state teleportation with checks on both channels and a (1 - q') reversal."""
    r = _check_unit("r", r)
    q_prime = _check_unit("q_prime", q_prime)
    warned = _strength_warning(q_prime, r, "q'")
    psi = input_state(alpha, beta)
    params = _params(alpha, beta, r, q_prime=q_prime, entanglement="Bell")
    try:
        shared, p_eam = eam_select(lift(adc(r), [0, 1], 2), bell_state(), "e0_e0")
    except ZeroProbabilityBranch as exc:
        return _degenerate("ctp-bell", params, exc, warned)
    return _report(
        "ctp-bell", params, psi, shared, p_eam, bell_basis(), BELL_LABELS,
        _wm_ops(q_prime, "linear"), warned,
    )


def _unprotected(protocol, alpha, beta, r, entangled: Ket, targets, basis, labels, entanglement):
    r = _check_unit("r", r)
    psi = input_state(alpha, beta)
    n = entangled.n_qubits
    shared = apply_channel(lift(adc(r), targets, n), entangled)
    params = _params(alpha, beta, r, entanglement=entanglement)
    return _report(protocol, params, psi, shared, 1.0, basis, labels, CORRECTIONS)


def run_original_w(alpha, beta, r: float) -> ProtocolReport:
    """Standard W-state teleportation with Bob's qubit damped and no protection."""
    return _unprotected("original-w", alpha, beta, r, w_state(), [2], eta_basis(), ETA_LABELS, "W")


def run_original_bell(alpha, beta, r: float) -> ProtocolReport:
    return _unprotected("original-bell", alpha, beta, r, bell_state(), [1], bell_basis(), BELL_LABELS, "Bell")


def run_original_controlled(entanglement: str, alpha, beta, r: float) -> ProtocolReport:
    """Unprotected controlled teleportation: every qubit of the shared state is damped."""
    key = entanglement.lower()
    if key == "w":
        return _unprotected("original-cw", alpha, beta, r, w_state(), [0, 1, 2], eta_basis(), ETA_LABELS, "W")
    if key == "bell":
        return _unprotected("original-cb", alpha, beta, r, bell_state(), [0, 1], bell_basis(), BELL_LABELS, "Bell")
    raise ValueError(f"entanglement must be 'W' or 'Bell', got {entanglement!r}")


# Uniform call signature (alpha, beta, r, q) for sweeps and the CLI.
PROTOCOLS: dict[str, Callable[..., ProtocolReport]] = {
    "tp-ew-w": run_tp_ew_w,
    "tp-ew-bell": run_tp_ew_bell,
    "ctp-w": lambda a, b, r, q=0.0: run_ctp_w(a, b, r),
    "ctp-bell": run_ctp_bell,
    "original-w": lambda a, b, r, q=0.0: run_original_w(a, b, r),
    "original-bell": lambda a, b, r, q=0.0: run_original_bell(a, b, r),
    "original-cw": lambda a, b, r, q=0.0: run_original_controlled("W", a, b, r),
    "original-cb": lambda a, b, r, q=0.0: run_original_controlled("Bell", a, b, r),
}

USES_STRENGTH = frozenset({"tp-ew-w", "tp-ew-bell", "ctp-bell"})

ALIASES = {"tp-ew": "tp-ew-w", "ctp-ew-bell": "ctp-bell", "original": "original-w"}


def canonical(protocol: str) -> str:
    return ALIASES.get(protocol, protocol)


def run(protocol: str, alpha, beta, r: float, q: float = 0.0) -> ProtocolReport:
    name = canonical(protocol)
    try:
        fn = PROTOCOLS[name]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {sorted(PROTOCOLS)}") from None
    return fn(alpha, beta, r, q)
