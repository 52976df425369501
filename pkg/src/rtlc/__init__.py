"""Robust Taylor-Lagrange control (rTLC) safety filters and baselines."""

from .acc import AccParams, AccState, acc_lie_jet, acc_rmin_closed_form, acc_step_controller
from .constraints import (
    EventRegion,
    LinearControlConstraint,
    RemainderBound,
    du_bounds,
    estimate_rmin_grid,
    etlc_row,
    hocbf_row,
    remainder_terms,
    rtlc_row,
    tlc_row,
    tls_row,
)
from .lie import (
    ControlBounds,
    DynamicsModel,
    LieJet,
    SafetyFunction,
    StateBox,
    eval_lie_jet,
    fd_lie_derivative,
    validate_oracle,
)
from .qp import QpProblem, QpSolution, brute_force_qp, solve_qp
from .sim import SimConfig, run_simulation

__version__ = "0.1.0"

__all__ = [
    "AccParams", "AccState", "acc_lie_jet", "acc_rmin_closed_form", "acc_step_controller",
    "EventRegion", "LinearControlConstraint", "RemainderBound", "du_bounds", "estimate_rmin_grid",
    "etlc_row", "hocbf_row", "remainder_terms", "rtlc_row", "tlc_row", "tls_row",
    "ControlBounds", "DynamicsModel", "LieJet", "SafetyFunction", "StateBox",
    "eval_lie_jet", "fd_lie_derivative", "validate_oracle",
    "QpProblem", "QpSolution", "brute_force_qp", "solve_qp",
    "SimConfig", "run_simulation",
]
