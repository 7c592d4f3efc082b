"""Teleportation through amplitude-damping channels protected by environment-assisted
measurement and weak-measurement reversal."""

__version__ = "0.1.0"

from .channels import (  # noqa: E402
    KrausChannel,
    WeakMeasurement,
    ZeroProbabilityBranch,
    adc,
    apply_channel,
    eam_select,
    lift,
    recoverable_probability,
    rotation_family,
    transform_kraus,
    wm_operator,
    wm_reversal,
)
from .linalg import NotInvertible  # noqa: E402
from .protocols import (  # noqa: E402
    BranchOutcome,
    ProtocolReport,
    run,
    run_ctp_bell,
    run_ctp_w,
    run_original_bell,
    run_original_controlled,
    run_original_w,
    run_tp_ew_bell,
    run_tp_ew_w,
)
from .states import DensityMatrix, Ket, bell_basis, bell_state, eta_basis, fidelity, input_state, w_state  # noqa: E402
